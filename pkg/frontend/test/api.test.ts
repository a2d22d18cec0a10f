import { describe, expect, it } from "vitest"

import { ApiClient, ApiRequestError } from "../src/api.js"

function fakeFetch(
  handler: (url: string, init?: RequestInit) => { status?: number; body: unknown },
) {
  const calls: Array<{ url: string; init?: RequestInit }> = []
  const fetchFn = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({ url, init })
    const { status = 200, body } = handler(url, init)
    return new Response(JSON.stringify(body), {
      status,
      headers: { "content-type": "application/json" },
    })
  }
  return { fetchFn, calls }
}

describe("ApiClient", () => {
  it("posts RFI bodies to /api/rfi", async () => {
    const { fetchFn, calls } = fakeFetch(() => ({
      body: { token: "m1", mode: "mv", total_matched: 0, matched: [], candidates_per_attribute: {}, timing: {} },
    }))
    const client = new ApiClient("http://svc:8080/", fetchFn)
    const body = { constraints: { language: "en" }, fuzziness: {}, mode: "mv" }
    const resp = await client.rfi(body)
    expect(resp.token).toBe("m1")
    expect(calls[0].url).toBe("http://svc:8080/api/rfi")
    expect(JSON.parse(String(calls[0].init?.body))).toEqual(body)
  })

  it("surfaces the service error envelope", async () => {
    const { fetchFn } = fakeFetch(() => ({
      status: 400,
      body: { code: "invalid_rfi", message: "RFI needs at least one constraint", detail: "" },
    }))
    const client = new ApiClient("http://svc", fetchFn)
    const err = await client.rfi({}).catch((e) => e)
    expect(err).toBeInstanceOf(ApiRequestError)
    expect(err.code).toBe("invalid_rfi")
    expect(err.status).toBe(400)
  })

  it("builds aggregation urls with token, kind, and bucket", async () => {
    const { fetchFn, calls } = fakeFetch(() => ({ body: { series: [] } }))
    const client = new ApiClient("http://svc", fetchFn)
    await client.volume("m42", "6h")
    expect(calls[0].url).toBe("http://svc/api/aggregations?token=m42&kind=volume&bucket=6h")
  })

  it("escapes record ids in paths", async () => {
    const { fetchFn, calls } = fakeFetch(() => ({ body: { id: "a/b", text: "", hashtags: [], created_at: "" } }))
    const client = new ApiClient("http://svc", fetchFn)
    await client.record("a/b")
    expect(calls[0].url).toBe("http://svc/api/records/a%2Fb")
  })
})
