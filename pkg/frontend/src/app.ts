// DOM wiring for the analyst portal. All rendering goes through the pure
// functions in render.ts; at most one RFI is in flight, and resubmitting
// cancels the previous one.

import { ApiClient, ApiRequestError } from "./api.js"
import { EMPTY_PALETTE, RfiDraft } from "./draft.js"
import {
  renderMatchTable,
  renderSentimentChart,
  renderVolumeChart,
  renderWordCloud,
} from "./render.js"
import type { MatchResponse, ServiceConfig, StoredRecord } from "./types.js"

const SLIDER_ATTRS = ["text", "hashtags", "language", "location", "sentiment", "created_at"]

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id)
  if (!node) throw new Error(`missing element #${id}`)
  return node as T
}

export class Portal {
  private api: ApiClient
  private draft = new RfiDraft()
  private config: ServiceConfig | null = null
  private inflight: AbortController | null = null

  constructor(api: ApiClient) {
    this.api = api
  }

  async start(): Promise<void> {
    this.config = await this.api.config()
    this.buildSliders()
    this.bindPalette()
    el<HTMLSpanElement>("store-info").textContent =
      `${this.config.records} records, ${this.config.dim} bits, modes ${this.config.modes.join("/")}`
    const modeSelect = el<HTMLSelectElement>("mode")
    modeSelect.innerHTML = this.config.modes
      .map((m) => `<option value="${m}">${m}</option>`)
      .join("")
    modeSelect.onchange = () => {
      this.draft.mode = modeSelect.value
      this.resetSliderDefaults()
      this.refreshValidation()
    }
    this.draft.mode = this.config.modes[0]
    this.resetSliderDefaults()
    el<HTMLButtonElement>("submit").onclick = () => void this.submit()
    this.refreshValidation()
  }

  private defaults(): Record<string, number> {
    const all = this.config?.default_fuzziness ?? {}
    return all[this.draft.mode] ?? {}
  }

  private buildSliders(): void {
    const host = el<HTMLDivElement>("sliders")
    host.innerHTML = SLIDER_ATTRS.map(
      (attr) => `
      <label class="slider-row">
        <span class="slider-name">${attr}</span>
        <input type="range" id="fuzz-${attr}" min="0" max="1" step="0.005">
        <span class="slider-value" id="fuzz-${attr}-value"></span>
      </label>`,
    ).join("")
    for (const attr of SLIDER_ATTRS) {
      const input = el<HTMLInputElement>(`fuzz-${attr}`)
      input.oninput = () => {
        this.draft.setFuzziness(attr, Number(input.value))
        el<HTMLSpanElement>(`fuzz-${attr}-value`).textContent = Number(input.value).toFixed(3)
      }
    }
  }

  private resetSliderDefaults(): void {
    for (const [attr, value] of Object.entries(this.defaults())) {
      if (!SLIDER_ATTRS.includes(attr)) continue
      this.draft.setFuzziness(attr, value)
      const input = el<HTMLInputElement>(`fuzz-${attr}`)
      input.value = String(value)
      el<HTMLSpanElement>(`fuzz-${attr}-value`).textContent = value.toFixed(3)
    }
  }

  private bindPalette(): void {
    const bind = (id: string, key: keyof typeof EMPTY_PALETTE) => {
      const input = el<HTMLInputElement>(id)
      input.oninput = () => {
        this.draft.palette[key] = input.value
        this.refreshValidation()
      }
    }
    bind("example-id", "exampleId")
    bind("search-terms", "searchTerms")
    bind("hashtags", "hashtags")
    bind("language", "language")
    bind("location", "location")
    bind("time-start", "timeStart")
    bind("time-end", "timeEnd")
    const sentiment = el<HTMLSelectElement>("sentiment-class")
    sentiment.onchange = () => {
      this.draft.palette.sentimentClass = sentiment.value
      this.refreshValidation()
    }
  }

  private refreshValidation(): void {
    const problems = this.draft.validate()
    const submit = el<HTMLButtonElement>("submit")
    submit.disabled = problems.length > 0
    el<HTMLDivElement>("validation").textContent = problems.join("; ")
  }

  private showError(message: string): void {
    el<HTMLDivElement>("error").textContent = message
  }

  async submit(): Promise<MatchResponse | null> {
    this.inflight?.abort()
    const controller = new AbortController()
    this.inflight = controller
    this.showError("")
    try {
      const response = await this.api.rfi(this.draft.toRequestBody(), controller.signal)
      await this.renderResults(response)
      return response
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") return null
      const message =
        err instanceof ApiRequestError ? `${err.message} ${err.detail}`.trim() : String(err)
      this.showError(message)
      return null
    } finally {
      if (this.inflight === controller) this.inflight = null
    }
  }

  private async renderResults(response: MatchResponse): Promise<void> {
    el<HTMLSpanElement>("match-count").textContent =
      `${response.total_matched} matched of ${response.timing.store_size}` +
      ` in ${response.timing.elapsed_ms.toFixed(1)} ms`

    const records = new Map<string, StoredRecord>()
    await Promise.all(
      response.matched.slice(0, 50).map(async (m) => {
        records.set(m.id, await this.api.record(m.id))
      }),
    )
    el<HTMLDivElement>("results").innerHTML = renderMatchTable(response.matched, records)

    const [words, volume, sentiment] = await Promise.all([
      this.api.wordFrequencies(response.token),
      this.api.volume(response.token, "1d"),
      this.api.sentimentOverTime(response.token, "1d"),
    ])
    el<HTMLDivElement>("word-cloud").innerHTML = renderWordCloud(words.table)
    el<HTMLDivElement>("volume-chart").innerHTML = renderVolumeChart(volume.series)
    el<HTMLDivElement>("sentiment-chart").innerHTML = renderSentimentChart(sentiment.series)
  }
}

declare global {
  interface Window {
    hvdPortal?: Portal
  }
}

if (typeof document !== "undefined" && document.getElementById("submit")) {
  const base = (document.body.dataset.apiBase ?? "").trim() || window.location.origin
  const portal = new Portal(new ApiClient(base))
  window.hvdPortal = portal
  void portal.start().catch((err) => {
    const box = document.getElementById("error")
    if (box) box.textContent = `cannot reach service: ${err}`
  })
}
