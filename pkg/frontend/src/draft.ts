// RFI draft state: the palette selections and fuzziness sliders, and their
// serialization into a POST /api/rfi body. Validation mirrors what the
// service will reject so errors surface before submitting.

export interface PaletteState {
  exampleId: string
  searchTerms: string
  hashtags: string
  language: string
  location: string
  sentimentClass: string
  timeStart: string
  timeEnd: string
}

export const EMPTY_PALETTE: PaletteState = {
  exampleId: "",
  searchTerms: "",
  hashtags: "",
  language: "",
  location: "",
  sentimentClass: "",
  timeStart: "",
  timeEnd: "",
}

const SENTIMENT_CLASSES = ["negative", "neutral", "positive"]

export function clamp01(value: number): number {
  if (Number.isNaN(value)) return 0
  return Math.min(1, Math.max(0, value))
}

export class RfiDraft {
  palette: PaletteState = { ...EMPTY_PALETTE }
  mode = "mv"
  k: number | null = null
  private sliders: Record<string, number> = {}

  setFuzziness(attribute: string, value: number): void {
    this.sliders[attribute] = clamp01(value)
  }

  fuzziness(attribute: string): number | undefined {
    return this.sliders[attribute]
  }

  applyDefaults(defaults: Record<string, number>): void {
    for (const [attr, value] of Object.entries(defaults)) {
      if (this.sliders[attr] === undefined) this.sliders[attr] = clamp01(value)
    }
  }

  /** Constraint object for the current palette; empty fields contribute nothing. */
  constraints(): Record<string, unknown> {
    const out: Record<string, unknown> = {}
    const p = this.palette
    const text = (p.exampleId || p.searchTerms).trim()
    if (text) out.text = text
    const tags = p.hashtags
      .split(/[\s,]+/)
      .map((t) => t.replace(/^#/, "").trim())
      .filter((t) => t.length > 0)
    if (tags.length) out.hashtags = tags
    if (p.language.trim()) out.language = p.language.trim()
    if (p.location.trim()) out.location = p.location.trim()
    if (p.sentimentClass) out.sentiment_class = p.sentimentClass
    if (p.timeStart && p.timeEnd) out.time_range = [p.timeStart, p.timeEnd]
    return out
  }

  /** Human-readable blockers; empty list means the draft is submittable. */
  validate(): string[] {
    const problems: string[] = []
    const cons = this.constraints()
    if (Object.keys(cons).length === 0) {
      problems.push("select at least one constraint from the palette")
    }
    if (this.palette.sentimentClass && !SENTIMENT_CLASSES.includes(this.palette.sentimentClass)) {
      problems.push(`sentiment must be one of ${SENTIMENT_CLASSES.join(", ")}`)
    }
    if ((this.palette.timeStart === "") !== (this.palette.timeEnd === "")) {
      problems.push("time range needs both start and end")
    }
    if (
      this.palette.timeStart &&
      this.palette.timeEnd &&
      this.palette.timeStart >= this.palette.timeEnd
    ) {
      problems.push("time range start must precede end")
    }
    if (this.k !== null && (!Number.isInteger(this.k) || this.k < 1)) {
      problems.push("k must be a positive integer")
    }
    return problems
  }

  /** Body for POST /api/rfi; only sliders for constrained attributes are sent. */
  toRequestBody(): Record<string, unknown> {
    const cons = this.constraints()
    const attrs = new Set<string>()
    if ("text" in cons) attrs.add("text")
    if ("hashtags" in cons) attrs.add("hashtags")
    if ("language" in cons) attrs.add("language")
    if ("location" in cons) attrs.add("location")
    if ("sentiment_class" in cons) attrs.add("sentiment")
    if ("time_range" in cons) attrs.add("created_at")
    const fuzziness: Record<string, number> = {}
    for (const attr of attrs) {
      const v = this.sliders[attr]
      if (v !== undefined) fuzziness[attr] = v
    }
    const body: Record<string, unknown> = { constraints: cons, fuzziness, mode: this.mode }
    if (this.k !== null) body.k = this.k
    return body
  }
}
