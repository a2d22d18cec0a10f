"""Hamming-distance search over packed hypervector stores.

`HammingIndex.search` is the accelerated path: a blocked vectorized scan
using hardware popcount with partition-based top-K selection.
`distance_matrix` is the deliberately plain brute-force oracle; the two must
produce identical orderings (ties broken by insertion order), which the test
suite asserts rather than assumes.

Distances are normalized by the bit width at the API boundary so fuzziness
thresholds carry across dimensions.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hvd.bsc import BitHypervector

__all__ = [
    "HammingIndex",
    "DistanceMatrix",
    "Fuzziness",
    "MatchResult",
    "index_build",
    "index_search",
    "match",
    "distance_matrix",
]

MAGIC = b"HVIX"
FORMAT_VERSION = 1
_BLOCK_ROWS = 4096


class HammingIndex:
    """Row-major packed vector store searchable by Hamming distance."""

    def __init__(self, dim: int, attribute: str = ""):
        if dim <= 0 or dim % 64 != 0:
            raise ValueError(f"dim must be a positive multiple of 64, got {dim}")
        self.dim = dim
        self.attribute = attribute
        self.ids: list[str] = []
        self._id_set: set[str] = set()
        self._rows = np.empty((0, dim // 64), dtype=np.uint64)

    def __len__(self) -> int:
        return len(self.ids)

    def add(self, id_: str, vector: BitHypervector) -> None:
        if vector.dim != self.dim:
            raise ValueError(f"dimension mismatch: {vector.dim} != {self.dim}")
        if id_ in self._id_set:
            raise ValueError(f"duplicate id: {id_!r}")
        self.ids.append(id_)
        self._id_set.add(id_)
        self._rows = np.vstack([self._rows, vector.words[None, :]])

    def add_many(self, items: list[tuple[str, BitHypervector]]) -> None:
        """Append a batch; the whole batch is validated before any mutation."""
        seen = set(self._id_set)
        for id_, vec in items:
            if vec.dim != self.dim:
                raise ValueError(f"dimension mismatch: {vec.dim} != {self.dim}")
            if id_ in seen:
                raise ValueError(f"duplicate id: {id_!r}")
            seen.add(id_)
        if not items:
            return
        self.ids.extend(id_ for id_, _ in items)
        self._id_set = seen
        block = np.stack([vec.words for _, vec in items])
        self._rows = np.vstack([self._rows, block]) if len(self._rows) else block

    def vector(self, row: int) -> BitHypervector:
        return BitHypervector(self._rows[row].copy(), self.dim)

    def extended(self, items: list[tuple[str, BitHypervector]]) -> "HammingIndex":
        """A new index with `items` appended; the original is untouched."""
        out = HammingIndex(self.dim, self.attribute)
        out.ids = list(self.ids)
        out._id_set = set(self._id_set)
        out._rows = self._rows
        out.add_many(items)
        return out

    def raw_distances(self, query: BitHypervector) -> np.ndarray:
        """Unnormalized popcount distances to every row, blocked to bound memory."""
        if query.dim != self.dim:
            raise ValueError(f"dimension mismatch: {query.dim} != {self.dim}")
        n = len(self.ids)
        out = np.empty(n, dtype=np.int64)
        for start in range(0, n, _BLOCK_ROWS):
            block = self._rows[start : start + _BLOCK_ROWS]
            out[start : start + _BLOCK_ROWS] = np.bitwise_count(block ^ query.words).sum(
                axis=1, dtype=np.int64
            )
        return out

    def search(self, query: BitHypervector, k: int) -> list[tuple[str, float]]:
        """Top-k (id, normalized distance) ascending; ties resolve to earlier rows.

        With k equal to the row count this is exactly the brute-force
        ordering.
        """
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        n = len(self.ids)
        if n == 0:
            return []
        counts = self.raw_distances(query)
        # composite key makes (distance, insertion index) ordering exact even
        # through the unstable partition
        keys = counts * n + np.arange(n, dtype=np.int64)
        k = min(k, n)
        if k < n:
            picked = np.argpartition(keys, k - 1)[:k]
            picked = picked[np.argsort(keys[picked])]
        else:
            picked = np.argsort(keys)
        return [(self.ids[i], int(counts[i]) / self.dim) for i in picked]

    # -- persistence ---------------------------------------------------

    def to_bytes(self) -> bytes:
        """Serialize: magic, version u16, flags u16, dim u32, rows u64,
        length-prefixed attribute name, id table, then the packed rows as
        little-endian u64 words.  All prefixes are u16, all integers LE."""
        buf = io.BytesIO()
        buf.write(MAGIC)
        buf.write(struct.pack("<HHIQ", FORMAT_VERSION, 0, self.dim, len(self.ids)))
        name = self.attribute.encode("utf-8")
        buf.write(struct.pack("<H", len(name)))
        buf.write(name)
        for id_ in self.ids:
            raw = id_.encode("utf-8")
            buf.write(struct.pack("<H", len(raw)))
            buf.write(raw)
        buf.write(self._rows.astype("<u8").tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "HammingIndex":
        buf = io.BytesIO(raw)
        if buf.read(4) != MAGIC:
            raise ValueError("not an HVIX index file")
        version, _flags, dim, rows = struct.unpack("<HHIQ", buf.read(16))
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported index format version {version}")
        (name_len,) = struct.unpack("<H", buf.read(2))
        attribute = buf.read(name_len).decode("utf-8")
        idx = cls(dim, attribute)
        ids = []
        for _ in range(rows):
            (id_len,) = struct.unpack("<H", buf.read(2))
            ids.append(buf.read(id_len).decode("utf-8"))
        words = dim // 64
        data = np.frombuffer(buf.read(rows * words * 8), dtype="<u8").astype(np.uint64)
        if data.size != rows * words:
            raise ValueError("truncated index file")
        idx.ids = ids
        idx._id_set = set(ids)
        if len(idx._id_set) != len(ids):
            raise ValueError("duplicate ids in index file")
        idx._rows = data.reshape(rows, words)
        return idx

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "HammingIndex":
        return cls.from_bytes(Path(path).read_bytes())


def index_build(
    vectors: list[tuple[str, BitHypervector]], attribute: str = "", dim: int | None = None
) -> HammingIndex:
    """Build an index from (id, vector) pairs, preserving insertion order."""
    if dim is None:
        if not vectors:
            raise ValueError("cannot infer dim from empty input; pass dim=")
        dim = vectors[0][1].dim
    idx = HammingIndex(dim, attribute)
    idx.add_many(vectors)
    return idx


def index_search(idx: HammingIndex, query: BitHypervector, k: int) -> list[tuple[str, float]]:
    return idx.search(query, k)


@dataclass
class Fuzziness:
    """Per-attribute Hamming-distance thresholds; a record matches an
    attribute only when its distance is strictly below the threshold."""

    thresholds: dict[str, float]

    def __post_init__(self):
        for attr, t in self.thresholds.items():
            if not 0.0 <= t <= 1.0:
                raise ValueError(f"fuzziness for {attr!r} must be in [0,1], got {t}")

    def __getitem__(self, attr: str) -> float:
        try:
            return self.thresholds[attr]
        except KeyError:
            raise KeyError(f"no fuzziness threshold for attribute {attr!r}") from None

    def covers(self, attrs) -> bool:
        return all(a in self.thresholds for a in attrs)


@dataclass
class DistanceMatrix:
    """Normalized Hamming distances, one row per query attribute."""

    attributes: list[str]
    ids: list[str]
    values: np.ndarray  # (len(attributes), len(ids))

    def row(self, attribute: str) -> np.ndarray:
        return self.values[self.attributes.index(attribute)]

    def mask(self, fuzz: Fuzziness) -> np.ndarray:
        """Boolean mask: entry true iff distance strictly below the threshold."""
        rows = [self.values[i] < fuzz[a] for i, a in enumerate(self.attributes)]
        return np.stack(rows)

    def intersect(self, fuzz: Fuzziness) -> list[str]:
        """Ids matching every attribute, in insertion order."""
        combined = self.mask(fuzz).all(axis=0)
        return [self.ids[i] for i in np.flatnonzero(combined)]


def distance_matrix(
    queries: list[tuple[str, BitHypervector]],
    records: list[tuple[str, BitHypervector]],
) -> DistanceMatrix:
    """Exact brute-force distances for each query against every record.

    Kept deliberately simple; this is the oracle the accelerated index is
    checked against.
    """
    ids = [rid for rid, _ in records]
    attrs = [attr for attr, _ in queries]
    values = np.zeros((len(queries), len(records)), dtype=np.float64)
    for qi, (_, qvec) in enumerate(queries):
        for ri, (_, rvec) in enumerate(records):
            if rvec.dim != qvec.dim:
                raise ValueError(f"dimension mismatch: {rvec.dim} != {qvec.dim}")
            values[qi, ri] = int(np.bitwise_count(qvec.words ^ rvec.words).sum()) / qvec.dim
    return DistanceMatrix(attrs, ids, values)


@dataclass
class MatchResult:
    """Intersection matching output: matched ids plus per-attribute context."""

    matched: list[str]
    distances: dict[str, dict[str, float]]  # id -> attr -> distance
    candidates_per_attribute: dict[str, int]


def match(
    queries: list[tuple[str, BitHypervector]],
    indexes: dict[str, HammingIndex],
    fuzz: Fuzziness,
    k: int | None = None,
) -> MatchResult:
    """Per-attribute top-K threshold masks intersected across attributes.

    K defaults to the full store size, making the result independent of K
    handling; smaller K can only shrink the candidate sets.
    """
    if not queries:
        raise ValueError("no query vectors")
    candidate_sets: list[set[str]] = []
    per_attr_dist: dict[str, dict[str, float]] = {}
    candidate_counts: dict[str, int] = {}
    for attr, qvec in queries:
        if attr not in indexes:
            raise KeyError(f"no index for attribute {attr!r}")
        idx = indexes[attr]
        threshold = fuzz[attr]
        top = idx.search(qvec, k if k is not None else max(len(idx), 1)) if len(idx) else []
        hits = {rid: d for rid, d in top if d < threshold}
        per_attr_dist[attr] = hits
        candidate_counts[attr] = len(hits)
        candidate_sets.append(set(hits))

    matched_set = set.intersection(*candidate_sets) if candidate_sets else set()
    # deterministic order: ascending mean distance, then id
    matched = sorted(
        matched_set,
        key=lambda rid: (sum(per_attr_dist[a][rid] for a, _ in queries) / len(queries), rid),
    )
    distances = {
        rid: {attr: per_attr_dist[attr][rid] for attr, _ in queries} for rid in matched
    }
    return MatchResult(matched, distances, candidate_counts)
