// Thin typed client for the hvd service. The fetch implementation is
// injectable so tests can run without a network.

import type {
  MatchResponse,
  SentimentPoint,
  ServiceConfig,
  StoredRecord,
  VolumePoint,
  WordFrequencyEntry,
} from "./types.js"

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>

export class ApiRequestError extends Error {
  code: string
  detail: string
  status: number

  constructor(status: number, code: string, message: string, detail = "") {
    super(message)
    this.status = status
    this.code = code
    this.detail = detail
  }
}

export class ApiClient {
  private baseUrl: string
  private fetchFn: FetchLike

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "")
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init))
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, init)
    const body = await resp.json().catch(() => ({}))
    if (!resp.ok) {
      throw new ApiRequestError(
        resp.status,
        body.code ?? "error",
        body.message ?? `request failed (${resp.status})`,
        body.detail ?? "",
      )
    }
    return body as T
  }

  config(): Promise<ServiceConfig> {
    return this.request("/api/config")
  }

  health(): Promise<{ status: string; records: number }> {
    return this.request("/api/health")
  }

  record(id: string): Promise<StoredRecord> {
    return this.request(`/api/records/${encodeURIComponent(id)}`)
  }

  rfi(body: object, signal?: AbortSignal): Promise<MatchResponse> {
    return this.request("/api/rfi", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
      signal,
    })
  }

  wordFrequencies(token: string): Promise<{ table: WordFrequencyEntry[] }> {
    return this.request(`/api/aggregations?token=${token}&kind=word_frequencies`)
  }

  volume(token: string, bucket: string): Promise<{ series: VolumePoint[] }> {
    return this.request(`/api/aggregations?token=${token}&kind=volume&bucket=${bucket}`)
  }

  sentimentOverTime(token: string, bucket: string): Promise<{ series: SentimentPoint[] }> {
    return this.request(
      `/api/aggregations?token=${token}&kind=sentiment_over_time&bucket=${bucket}`,
    )
  }
}
