// Pure string renderers for the result views. Keeping these DOM-free makes
// the visual logic testable: word sizes monotone in frequency, time axes
// aligned to the service's buckets, explicit empty states, and no
// client-side re-ranking anywhere.

import type {
  MatchEntry,
  SentimentPoint,
  StoredRecord,
  VolumePoint,
  WordFrequencyEntry,
} from "./types.js"

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
}

export const EMPTY_STATE = '<p class="empty">no matches to display</p>'

const MIN_FONT_PX = 12
const MAX_FONT_PX = 42

/** Font size in px, monotone in count; equal counts get equal sizes. */
export function wordSize(count: number, minCount: number, maxCount: number): number {
  if (maxCount <= minCount) return Math.round((MIN_FONT_PX + MAX_FONT_PX) / 2)
  const t = (count - minCount) / (maxCount - minCount)
  return Math.round(MIN_FONT_PX + t * (MAX_FONT_PX - MIN_FONT_PX))
}

export function renderWordCloud(entries: WordFrequencyEntry[]): string {
  if (entries.length === 0) return EMPTY_STATE
  const counts = entries.map((e) => e.count)
  const lo = Math.min(...counts)
  const hi = Math.max(...counts)
  const spans = entries.map(
    (e) =>
      `<span class="cloud-word" style="font-size:${wordSize(e.count, lo, hi)}px"` +
      ` title="${e.count}">${escapeHtml(e.token)}</span>`,
  )
  return `<div class="word-cloud">${spans.join(" ")}</div>`
}

const CHART_W = 640
const CHART_H = 180
const PAD = 28

function xPositions(n: number): number[] {
  if (n === 1) return [CHART_W / 2]
  const span = CHART_W - 2 * PAD
  return Array.from({ length: n }, (_, i) => PAD + (i * span) / (n - 1))
}

function axisLabels(buckets: string[]): string {
  const n = buckets.length
  const xs = xPositions(n)
  const picks = n <= 4 ? buckets.map((_, i) => i) : [0, Math.floor(n / 2), n - 1]
  return picks
    .map(
      (i) =>
        `<text x="${xs[i].toFixed(1)}" y="${CHART_H - 4}" class="tick"` +
        ` text-anchor="middle">${escapeHtml(buckets[i].slice(0, 10))}</text>`,
    )
    .join("")
}

export function renderVolumeChart(series: VolumePoint[]): string {
  if (series.length === 0) return EMPTY_STATE
  const max = Math.max(...series.map((p) => p.count), 1)
  const xs = xPositions(series.length)
  const barW = Math.max(2, Math.min(24, (CHART_W - 2 * PAD) / Math.max(series.length, 1) - 2))
  const bars = series
    .map((p, i) => {
      const h = ((CHART_H - 2 * PAD) * p.count) / max
      const x = xs[i] - barW / 2
      const y = CHART_H - PAD - h
      return `<rect x="${x.toFixed(1)}" y="${y.toFixed(1)}" width="${barW.toFixed(1)}"` +
        ` height="${h.toFixed(1)}" class="volume-bar"><title>${p.bucket}: ${p.count}</title></rect>`
    })
    .join("")
  return (
    `<svg viewBox="0 0 ${CHART_W} ${CHART_H}" class="chart volume-chart" role="img">` +
    bars +
    axisLabels(series.map((p) => p.bucket)) +
    `</svg>`
  )
}

const SENTIMENT_SERIES: Array<{ key: "negative" | "neutral" | "positive"; cls: string }> = [
  { key: "negative", cls: "line-negative" },
  { key: "neutral", cls: "line-neutral" },
  { key: "positive", cls: "line-positive" },
]

export function renderSentimentChart(series: SentimentPoint[]): string {
  if (series.length === 0) return EMPTY_STATE
  const xs = xPositions(series.length)
  const y = (v: number) => CHART_H - PAD - (CHART_H - 2 * PAD) * v
  const lines = SENTIMENT_SERIES.map(({ key, cls }) => {
    const pts = series.map((p, i) => `${xs[i].toFixed(1)},${y(p[key]).toFixed(1)}`).join(" ")
    return `<polyline points="${pts}" fill="none" class="${cls}"><title>${key}</title></polyline>`
  }).join("")
  return (
    `<svg viewBox="0 0 ${CHART_W} ${CHART_H}" class="chart sentiment-chart" role="img">` +
    lines +
    axisLabels(series.map((p) => p.bucket)) +
    `</svg>`
  )
}

/** Match table rows, in the exact order the service returned them. */
export function renderMatchTable(
  matched: MatchEntry[],
  records: Map<string, StoredRecord>,
  limit = 50,
): string {
  if (matched.length === 0) return EMPTY_STATE
  const attrs = Object.keys(matched[0].distances)
  const head =
    "<tr><th>id</th><th>text</th>" + attrs.map((a) => `<th>${escapeHtml(a)}</th>`).join("") + "</tr>"
  const rows = matched.slice(0, limit).map((m) => {
    const rec = records.get(m.id)
    const snippet = rec ? (rec.text.length > 80 ? rec.text.slice(0, 77) + "..." : rec.text) : ""
    const cells = attrs.map((a) => `<td>${m.distances[a].toFixed(4)}</td>`).join("")
    return `<tr><td>${escapeHtml(m.id)}</td><td>${escapeHtml(snippet)}</td>${cells}</tr>`
  })
  const more =
    matched.length > limit
      ? `<tr><td colspan="${2 + attrs.length}" class="more">... ${matched.length - limit} more</td></tr>`
      : ""
  return `<table class="match-table">${head}${rows.join("")}${more}</table>`
}
