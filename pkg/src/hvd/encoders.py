"""Attribute encoders: raw values to binary hypervectors.

Four encoding families cover the metadata model:

* semantic (text, hashtags): externally computed real embeddings projected
  through a seeded random binary matrix with sign thresholding,
* lexical (language, location): per-character basis vectors bundled into a
  compound, so similarly spelt strings land near each other,
* probability (sentiment): the classifier's 3-probability vector projected
  like an embedding,
* temporal (created_at): either a level-hypervector sequence quantizing the
  configured time range, or per-component basis vectors (year, month, day).

Everything is derived from the seeds in `EncoderConfig`; two parties sharing
the config file produce bit-identical encodings.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from hvd.bsc import BitHypervector, ItemMemory, Rng, _pack_bits, _unpack_bits, bundle

log = logging.getLogger(__name__)

__all__ = [
    "ProjectionMatrix",
    "LevelSequence",
    "TimeConfig",
    "EncoderConfig",
    "Encoders",
    "project",
    "project_many",
    "new_level_sequence",
    "level_lookup",
    "new_alphabet_memory",
    "encode_lexical",
    "encode_semantic_text",
    "encode_hashtags",
    "encode_sentiment",
    "encode_timestamp_level",
    "encode_timestamp_components",
    "parse_utc",
    "format_utc",
    "DEFAULT_ALPHABET",
]

DEFAULT_ALPHABET = "abcdefghijklmnopqrstuvwxyz0123456789-_ '.,"

COMPONENT_RANGES = {
    "year": range(1970, 2101),
    "month": range(1, 13),
    "day": range(1, 32),
    "hour": range(0, 24),
    "minute": range(0, 60),
}


def parse_utc(value: str) -> datetime:
    """Parse an ISO-8601 timestamp into an aware UTC datetime."""
    text = value.strip()
    if text.endswith("Z") or text.endswith("z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_utc(dt: datetime) -> str:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


# Inputs are quantized to this fixed-point scale before projection.  With
# signed-integer values carried in float64 every partial sum stays exactly
# representable (< 2^53), so the projected bits are independent of batch
# shape, summation order, and BLAS backend.
PROJECTION_SCALE = 2**20
_MAX_INPUT_MAGNITUDE = 1e6


class ProjectionMatrix:
    """Random binary matrix (out_bits x in_dim) fully determined by its seed.

    Entries are Bernoulli(0.5); the matrix is reused verbatim for every
    vector it projects, so persisting the seed reconstructs it exactly.
    """

    def __init__(self, in_dim: int, out_bits: int, seed: int):
        if in_dim <= 0:
            raise ValueError(f"in_dim must be positive, got {in_dim}")
        if out_bits <= 0 or out_bits % 64 != 0:
            raise ValueError(f"out_bits must be a positive multiple of 64, got {out_bits}")
        self.in_dim = in_dim
        self.out_bits = out_bits
        self.seed = seed
        gen = Rng(seed).generator
        self.entries = gen.integers(0, 2, size=(out_bits, in_dim), dtype=np.uint8)
        # 2P - 1 in transposed layout: sign(signed @ r) == sign(P @ r - 0.5 sum r)
        self._signed_t = (self.entries.T.astype(np.float64) * 2.0) - 1.0


def project(r: np.ndarray, P: ProjectionMatrix) -> BitHypervector:
    """Project a real vector into VSA space: matrix product, center, threshold.

    The raw sums a_b = sum_i P[b,i] * r_i have expectation 0.5 * sum(r) under
    Bernoulli(0.5) entries; centering there and thresholding at 0 makes the
    output scale-invariant (project(c*r) == project(r) for c > 0).  Exact
    zeros after centering map to bit 1.
    """
    return project_many(np.asarray(r, dtype=np.float64)[None, :], P)[0]


def project_many(rows: np.ndarray, P: ProjectionMatrix) -> list[BitHypervector]:
    """Vectorized `project` over the rows of a (n x in_dim) matrix."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != P.in_dim:
        raise ValueError(f"expected (n, {P.in_dim}) input, got {rows.shape}")
    if not np.all(np.isfinite(rows)):
        raise ValueError("non-finite input vector")
    if np.abs(rows).max(initial=0.0) > _MAX_INPUT_MAGNITUDE:
        raise ValueError(f"input magnitude exceeds {_MAX_INPUT_MAGNITUDE:g}")
    quantized = np.rint(rows * PROJECTION_SCALE)
    if np.any(np.all(quantized == 0.0, axis=1)):
        raise ValueError("all-zero input vector: sign pattern undefined")
    out: list[BitHypervector] = []
    for start in range(0, len(quantized), 1024):
        chunk = quantized[start : start + 1024]
        centered = chunk @ P._signed_t  # exact: integer values in float64
        bits = (centered >= 0.0).astype(np.uint8)
        out.extend(BitHypervector(_pack_bits(row), P.out_bits) for row in bits)
    return out


class LevelSequence:
    """Ordered hypervectors [L_1..L_m] with linearly increasing distance from L_1.

    A fixed random subset of `span * dim` bit positions is partitioned into
    m-1 nearly equal chunks; each level flips one more chunk.  With the
    default span 0.5 the endpoints are orthogonal (distance exactly 0.5).
    Role sequences use span 1.0 so the middle element sits at distance 0.5
    from L_1.
    """

    def __init__(self, levels: list[BitHypervector], seed: int, span: float):
        self.levels = levels
        self.m = len(levels)
        self.seed = seed
        self.span = span

    def __getitem__(self, i: int) -> BitHypervector:
        return self.levels[i]

    def __len__(self) -> int:
        return self.m

    @property
    def middle(self) -> BitHypervector:
        return self.levels[(self.m - 1) // 2]


def new_level_sequence(m: int, dim: int, rng: Rng, span: float = 0.5) -> LevelSequence:
    """Build a level sequence by progressive disjoint-chunk flipping."""
    if m < 2:
        raise ValueError(f"need at least 2 levels, got {m}")
    if not 0.0 < span <= 1.0:
        raise ValueError(f"span must be in (0, 1], got {span}")
    n_flip = round(span * dim)
    if n_flip < m - 1:
        raise ValueError(f"{m} levels exceed the flip budget of {n_flip} bits at dim {dim}")

    first = rng.words(dim // 64)
    positions = rng.generator.permutation(dim)[:n_flip]
    chunks = np.array_split(positions, m - 1)

    bits = _unpack_bits(first, dim).copy()
    levels = [BitHypervector(first.copy(), dim)]
    for chunk in chunks:
        bits[chunk] ^= 1
        levels.append(BitHypervector(_pack_bits(bits), dim))
    return LevelSequence(levels, rng.seed, span)


def level_lookup(seq: LevelSequence, value: float, lo: float, hi: float) -> BitHypervector:
    """Clamp value into [lo, hi] and return the linearly quantized level."""
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    if value != value:  # NaN
        raise ValueError("NaN value")
    return seq[level_index(seq.m, value, lo, hi)]


def level_index(m: int, value: float, lo: float, hi: float) -> int:
    """0-based window index for a value quantized over [lo, hi]."""
    clamped = min(max(value, lo), hi)
    return min(m - 1, int((clamped - lo) / (hi - lo) * m))


def new_alphabet_memory(dim: int, rng: Rng, alphabet: str = DEFAULT_ALPHABET) -> ItemMemory:
    """Basis vectors for every character in `alphabet`, drawn in order."""
    if len(set(alphabet)) != len(alphabet):
        raise ValueError("alphabet contains duplicate characters")
    memory = ItemMemory(dim)
    for ch in alphabet:
        memory.add(ch, BitHypervector(rng.words(dim // 64), dim))
    return memory


def normalize_lexical(text: str) -> str:
    return text.strip().lower()


def encode_lexical(text: str, alphabet: ItemMemory, rng: Rng) -> BitHypervector:
    """Bundle the per-character basis vectors of the normalized string.

    Duplicates count as independent votes, so anagrams collide by design;
    similarly spelt strings land near each other.
    """
    norm = normalize_lexical(text)
    if not norm:
        raise ValueError("empty text after normalization")
    try:
        vectors = [alphabet.get(ch) for ch in norm]
    except KeyError as exc:
        raise ValueError(f"character not in alphabet: {exc}") from None
    return bundle(vectors, rng)


def encode_semantic_text(embedding: np.ndarray, P: ProjectionMatrix) -> BitHypervector:
    """Project a precomputed text embedding; distinct matrices keep attributes apart."""
    return project(embedding, P)


def encode_hashtags(
    embeddings: list[np.ndarray], P: ProjectionMatrix, rng: Rng
) -> BitHypervector:
    """Project each hashtag embedding and bundle into one compound vector."""
    if not embeddings:
        raise ValueError("no hashtag embeddings")
    return bundle(project_many(np.stack(embeddings), P), rng)


def encode_sentiment(probs: np.ndarray, P: ProjectionMatrix) -> BitHypervector:
    """Project a (negative, neutral, positive) probability vector."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape != (P.in_dim,):
        raise ValueError(f"expected {P.in_dim} probabilities, got shape {probs.shape}")
    if np.any(probs < 0):
        raise ValueError("negative probability component")
    if abs(float(probs.sum()) - 1.0) > 1e-6:
        raise ValueError(f"probabilities sum to {probs.sum():.6f}, expected 1")
    return project(probs, P)


@dataclass(frozen=True)
class TimeConfig:
    """Time-range quantization settings for the created_at attribute."""

    range_start: datetime
    range_end: datetime
    levels: int = 1024
    mode: str = "level"  # "level" | "components"
    components: tuple[str, ...] = ("year", "month", "day")

    def __post_init__(self):
        if self.range_start >= self.range_end:
            raise ValueError("range_start must precede range_end")
        if self.levels < 2:
            raise ValueError("need at least 2 time windows")
        if self.mode not in ("level", "components"):
            raise ValueError(f"unknown time mode {self.mode!r}")
        for c in self.components:
            if c not in COMPONENT_RANGES:
                raise ValueError(f"unknown time component {c!r}")

    def window_of(self, ts: datetime) -> int:
        return level_index(
            self.levels, ts.timestamp(), self.range_start.timestamp(), self.range_end.timestamp()
        )


def encode_timestamp_level(
    ts: datetime, cfg: TimeConfig, seq: LevelSequence
) -> BitHypervector:
    """Level vector for the window containing ts; out-of-range values clamp with a warning."""
    lo = cfg.range_start.timestamp()
    hi = cfg.range_end.timestamp()
    t = ts.timestamp()
    if t < lo or t > hi:
        log.warning("timestamp %s outside configured range, clamped", format_utc(ts))
    return level_lookup(seq, t, lo, hi)


def timestamp_components(ts: datetime) -> dict[str, int]:
    ts = ts.astimezone(timezone.utc)
    return {
        "year": ts.year,
        "month": ts.month,
        "day": ts.day,
        "hour": ts.hour,
        "minute": ts.minute,
    }


def encode_timestamp_components(
    ts: datetime, memories: dict[str, ItemMemory]
) -> dict[str, BitHypervector]:
    """Map each timestamp component to its orthogonal basis vector."""
    values = timestamp_components(ts)
    out = {}
    for component, memory in memories.items():
        value = values[component]
        if value not in COMPONENT_RANGES[component]:
            raise ValueError(f"{component}={value} outside supported set")
        out[component] = memory.get(str(value))
    return out


# Attribute names that get their own projection or basis seeds.  Order is the
# canonical derivation order; appending new names keeps old seeds stable.
_SEED_ATTRS = ("text", "hashtags", "sentiment", "alphabet", "time_levels", "roles", "components", "tiebreak")


@dataclass
class EncoderConfig:
    """Everything needed to reproduce an encoding bit-exactly.

    Serialized as JSON next to the index; per-attribute seeds are stored
    explicitly so the file alone is the contract between parties.
    """

    dim: int = 10240
    embed_dim: int = 768
    seeds: dict[str, int] = field(default_factory=dict)
    alphabet: str = DEFAULT_ALPHABET
    time: TimeConfig = field(
        default_factory=lambda: TimeConfig(
            range_start=datetime(1970, 1, 1, tzinfo=timezone.utc),
            range_end=datetime(2100, 1, 1, tzinfo=timezone.utc),
        )
    )
    role_levels: int = 5

    @classmethod
    def create(cls, dim: int = 10240, seed: int = 0, **kwargs) -> "EncoderConfig":
        """Derive all per-attribute seeds from one master seed."""
        base = Rng(seed)
        seeds = {name: base.child("seed", name).seed for name in _SEED_ATTRS}
        cfg = cls(dim=dim, seeds=seeds, **kwargs)
        if cfg.time.mode == "level" and cfg.time.levels > dim // 2:
            # level resolution is capped by the flip budget
            cfg.time = TimeConfig(
                range_start=cfg.time.range_start,
                range_end=cfg.time.range_end,
                levels=dim // 2,
                mode=cfg.time.mode,
                components=cfg.time.components,
            )
        return cfg

    def __post_init__(self):
        if self.dim <= 0 or self.dim % 64 != 0:
            raise ValueError(f"dim must be a positive multiple of 64, got {self.dim}")
        missing = [name for name in _SEED_ATTRS if name not in self.seeds]
        if missing:
            raise ValueError(f"config missing seeds for {missing}")

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": 1,
                "dim": self.dim,
                "embed_dim": self.embed_dim,
                "seeds": self.seeds,
                "alphabet": self.alphabet,
                "time": {
                    "mode": self.time.mode,
                    "range_start": format_utc(self.time.range_start),
                    "range_end": format_utc(self.time.range_end),
                    "levels": self.time.levels,
                    "components": list(self.time.components),
                },
                "role_levels": self.role_levels,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "EncoderConfig":
        raw = json.loads(text)
        if raw.get("format") != 1:
            raise ValueError(f"unsupported encoder config format {raw.get('format')!r}")
        time = TimeConfig(
            range_start=parse_utc(raw["time"]["range_start"]),
            range_end=parse_utc(raw["time"]["range_end"]),
            levels=raw["time"]["levels"],
            mode=raw["time"]["mode"],
            components=tuple(raw["time"]["components"]),
        )
        return cls(
            dim=raw["dim"],
            embed_dim=raw["embed_dim"],
            seeds={k: int(v) for k, v in raw["seeds"].items()},
            alphabet=raw["alphabet"],
            time=time,
            role_levels=raw["role_levels"],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "EncoderConfig":
        return cls.from_json(Path(path).read_text())


class Encoders:
    """Materialized encoder set for one config: matrices, sequences, memories.

    Construction is deterministic from the config; all state is immutable
    afterwards so encoding is safe to parallelize.
    """

    def __init__(self, config: EncoderConfig):
        self.config = config
        dim = config.dim
        self.text_projection = ProjectionMatrix(config.embed_dim, dim, config.seeds["text"])
        self.hashtag_projection = ProjectionMatrix(
            config.embed_dim, dim, config.seeds["hashtags"]
        )
        self.sentiment_projection = ProjectionMatrix(3, dim, config.seeds["sentiment"])
        self.alphabet = new_alphabet_memory(dim, Rng(config.seeds["alphabet"]), config.alphabet)
        self.time_levels = new_level_sequence(
            config.time.levels, dim, Rng(config.seeds["time_levels"])
        )
        self.component_memories = self._build_component_memories()
        self._tiebreak_seed = config.seeds["tiebreak"]
        self._lexical_cache: dict[str, BitHypervector] = {}

    def _build_component_memories(self) -> dict[str, ItemMemory]:
        base = Rng(self.config.seeds["components"])
        memories: dict[str, ItemMemory] = {}
        for component in self.config.time.components:
            rng = base.child(component)
            memory = ItemMemory(self.config.dim)
            for value in COMPONENT_RANGES[component]:
                memory.add(str(value), BitHypervector(rng.words(self.config.dim // 64), self.config.dim))
            memories[component] = memory
        return memories

    def tiebreak_rng(self, *tags: str | int) -> Rng:
        """Tie-break stream for bundling, derived per encoding target."""
        return Rng(self._tiebreak_seed).child(*tags)

    def text(self, embedding: np.ndarray) -> BitHypervector:
        return encode_semantic_text(embedding, self.text_projection)

    def hashtags(self, embeddings: list[np.ndarray], tag: str) -> BitHypervector:
        return encode_hashtags(embeddings, self.hashtag_projection, self.tiebreak_rng("hashtags", tag))

    def lexical(self, text: str) -> BitHypervector:
        """Lexical vector; the tie-break stream is seeded from the string itself
        so equal values always encode identically."""
        norm = normalize_lexical(text)
        cached = self._lexical_cache.get(norm)
        if cached is None:
            cached = encode_lexical(norm, self.alphabet, self.tiebreak_rng("lexical", norm))
            self._lexical_cache[norm] = cached
        return cached

    def sentiment(self, probs: np.ndarray) -> BitHypervector:
        return encode_sentiment(probs, self.sentiment_projection)

    def timestamp_level(self, ts: datetime) -> BitHypervector:
        return encode_timestamp_level(ts, self.config.time, self.time_levels)

    def timestamp_components(self, ts: datetime) -> dict[str, BitHypervector]:
        return encode_timestamp_components(ts, self.component_memories)
