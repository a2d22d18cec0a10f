// Response shapes of the hvd HTTP API; every number the portal displays
// comes from one of these fields.

export interface ServiceConfig {
  dim: number
  embed_dim: number
  modes: string[]
  records: number
  attributes: string[]
  default_fuzziness: Record<string, Record<string, number>>
  time: {
    mode: string
    range_start: string
    range_end: string
    levels: number
    components: string[]
  }
  registry_hash: string
}

export interface MatchEntry {
  id: string
  distances: Record<string, number>
}

export interface MatchResponse {
  token: string
  mode: string
  total_matched: number
  matched: MatchEntry[]
  candidates_per_attribute: Record<string, number>
  timing: { elapsed_ms: number; k: number; store_size: number }
}

export interface StoredRecord {
  id: string
  text: string
  hashtags: string[]
  language?: string
  location?: string
  sentiment?: number[]
  created_at: string
}

export interface WordFrequencyEntry {
  token: string
  count: number
}

export interface VolumePoint {
  bucket: string
  count: number
}

export interface SentimentPoint {
  bucket: string
  count: number
  negative: number
  neutral: number
  positive: number
}

export interface ApiError {
  code: string
  message: string
  detail?: string
}
