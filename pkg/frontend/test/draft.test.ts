import { describe, expect, it } from "vitest"

import { clamp01, RfiDraft } from "../src/draft.js"

describe("RfiDraft", () => {
  it("is not submittable with zero constraints", () => {
    const draft = new RfiDraft()
    const problems = draft.validate()
    expect(problems.length).toBeGreaterThan(0)
    expect(problems[0]).toContain("at least one constraint")
  })

  it("serializes a query-by-example body the service accepts", () => {
    const draft = new RfiDraft()
    draft.palette.exampleId = "t000005"
    draft.setFuzziness("text", 0.3)
    draft.mode = "mv"
    expect(draft.validate()).toEqual([])
    expect(draft.toRequestBody()).toEqual({
      constraints: { text: "t000005" },
      fuzziness: { text: 0.3 },
      mode: "mv",
    })
  })

  it("clamps slider values into [0,1]", () => {
    expect(clamp01(-0.5)).toBe(0)
    expect(clamp01(1.7)).toBe(1)
    expect(clamp01(0.42)).toBe(0.42)
    expect(clamp01(Number.NaN)).toBe(0)
    const draft = new RfiDraft()
    draft.setFuzziness("text", 99)
    expect(draft.fuzziness("text")).toBe(1)
  })

  it("splits and strips hashtags", () => {
    const draft = new RfiDraft()
    draft.palette.hashtags = "#kherson, stocks  #gaming"
    expect(draft.constraints()).toEqual({ hashtags: ["kherson", "stocks", "gaming"] })
  })

  it("maps palette fields onto service constraint names", () => {
    const draft = new RfiDraft()
    draft.palette.language = "en"
    draft.palette.location = "kyiv"
    draft.palette.sentimentClass = "positive"
    draft.palette.timeStart = "2022-03-01T00:00"
    draft.palette.timeEnd = "2022-03-20T00:00"
    expect(draft.constraints()).toEqual({
      language: "en",
      location: "kyiv",
      sentiment_class: "positive",
      time_range: ["2022-03-01T00:00", "2022-03-20T00:00"],
    })
  })

  it("rejects a half-specified or inverted time range", () => {
    const draft = new RfiDraft()
    draft.palette.timeStart = "2022-03-01T00:00"
    expect(draft.validate().some((p) => p.includes("both start and end"))).toBe(true)
    draft.palette.timeEnd = "2021-01-01T00:00"
    expect(draft.validate().some((p) => p.includes("precede"))).toBe(true)
  })

  it("only sends fuzziness for constrained attributes", () => {
    const draft = new RfiDraft()
    draft.applyDefaults({ text: 0.47, language: 0.05, sentiment: 0.45 })
    draft.palette.language = "en"
    const body = draft.toRequestBody()
    expect(body.fuzziness).toEqual({ language: 0.05 })
  })

  it("defaults never override a slider the analyst moved", () => {
    const draft = new RfiDraft()
    draft.setFuzziness("text", 0.2)
    draft.applyDefaults({ text: 0.47 })
    expect(draft.fuzziness("text")).toBe(0.2)
  })

  it("example id takes precedence over search terms for the text constraint", () => {
    const draft = new RfiDraft()
    draft.palette.exampleId = "t000001"
    draft.palette.searchTerms = "something else"
    expect(draft.constraints().text).toBe("t000001")
  })
})
