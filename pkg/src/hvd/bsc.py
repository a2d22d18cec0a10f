"""Binary spatter-code algebra on packed bit hypervectors.

Vectors are fixed-width bit strings packed into little-endian uint64 words:
bit i of the vector is bit (i mod 64) of word (i // 64).  Binding is XOR,
bundling is a per-bit majority vote, similarity is normalized Hamming
distance.  Random vectors at these dimensions are near-orthogonal (pairwise
distance tightly concentrated around 0.5), which is what makes the algebra
usable as a symbol system.

All values are immutable after creation and every operation is pure; the
only randomness comes in through an explicit `Rng`.
"""

from __future__ import annotations

import hashlib
import sys
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "BitHypervector",
    "Rng",
    "ItemMemory",
    "random_hypervector",
    "hamming",
    "bind",
    "bundle",
    "cleanup",
]

WORD_BITS = 64


def _check_dim(dim: int) -> None:
    if dim <= 0 or dim % WORD_BITS != 0:
        raise ValueError(f"dim must be a positive multiple of {WORD_BITS}, got {dim}")


class Rng:
    """Deterministic random stream with derivable child streams.

    Same seed produces the identical stream on every platform (PCG64).
    Instances are stateful and must not be shared across tasks; derive an
    independent child with `child(...)` instead.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def child(self, *tags: str | int) -> "Rng":
        """Derive an independent Rng whose seed is a stable hash of (seed, tags)."""
        h = hashlib.blake2b(digest_size=8)
        h.update(str(self.seed).encode())
        for tag in tags:
            h.update(b"\x1f")
            h.update(str(tag).encode())
        return Rng(int.from_bytes(h.digest(), "little"))

    def words(self, n: int) -> np.ndarray:
        """Draw n uniform uint64 words."""
        return self._gen.integers(0, 2**64, size=n, dtype=np.uint64)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen


def _pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a 0/1 uint8 array (length multiple of 64) into uint64 words."""
    packed = np.packbits(bits.astype(np.uint8, copy=False), bitorder="little")
    words = packed.view(np.uint64)
    if sys.byteorder != "little":  # keep the logical bit layout on BE hosts
        words = words.byteswap()
    return words


def _unpack_bits(words: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of _pack_bits: uint64 words to a 0/1 uint8 array of length dim."""
    if sys.byteorder != "little":
        words = words.byteswap()
    return np.unpackbits(words.view(np.uint8), bitorder="little")[:dim]


class BitHypervector:
    """A fixed-width packed binary hypervector.

    The word array is read-only; all operations return new vectors.
    """

    __slots__ = ("words", "dim")

    def __init__(self, words: np.ndarray, dim: int):
        _check_dim(dim)
        if words.dtype != np.uint64 or words.shape != (dim // WORD_BITS,):
            raise ValueError(
                f"expected {dim // WORD_BITS} uint64 words, got {words.dtype} {words.shape}"
            )
        words = np.ascontiguousarray(words)
        words.flags.writeable = False
        object.__setattr__(self, "words", words)
        object.__setattr__(self, "dim", dim)

    def __setattr__(self, name, value):
        raise AttributeError("BitHypervector is immutable")

    @classmethod
    def zeros(cls, dim: int) -> "BitHypervector":
        _check_dim(dim)
        return cls(np.zeros(dim // WORD_BITS, dtype=np.uint64), dim)

    @classmethod
    def from_bits(cls, bits: Sequence[int] | np.ndarray) -> "BitHypervector":
        bits = np.asarray(bits, dtype=np.uint8)
        return cls(_pack_bits(bits), len(bits))

    @classmethod
    def from_bytes(cls, raw: bytes, dim: int) -> "BitHypervector":
        """Rebuild from the canonical little-endian byte serialization."""
        _check_dim(dim)
        if len(raw) != dim // 8:
            raise ValueError(f"expected {dim // 8} bytes for dim {dim}, got {len(raw)}")
        words = np.frombuffer(raw, dtype="<u8").astype(np.uint64)
        return cls(words, dim)

    def to_bits(self) -> np.ndarray:
        return _unpack_bits(self.words, self.dim)

    def to_bytes(self) -> bytes:
        """Canonical serialization: dim/64 little-endian uint64 words."""
        return self.words.astype("<u8").tobytes()

    def complement(self) -> "BitHypervector":
        return BitHypervector(~self.words, self.dim)

    def popcount(self) -> int:
        return int(np.bitwise_count(self.words).sum())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BitHypervector)
            and self.dim == other.dim
            and bool(np.array_equal(self.words, other.words))
        )

    def __hash__(self) -> int:
        return hash((self.dim, self.words.tobytes()))

    def __xor__(self, other: "BitHypervector") -> "BitHypervector":
        return bind(self, other)

    def __repr__(self) -> str:
        return f"BitHypervector(dim={self.dim}, popcount={self.popcount()})"


def _check_same_dim(a: BitHypervector, b: BitHypervector) -> None:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} != {b.dim}")


def random_hypervector(dim: int, rng: Rng) -> BitHypervector:
    """Draw a vector with each bit independently Bernoulli(0.5)."""
    _check_dim(dim)
    return BitHypervector(rng.words(dim // WORD_BITS), dim)


def hamming(a: BitHypervector, b: BitHypervector) -> float:
    """Normalized Hamming distance: popcount(a XOR b) / dim, in [0, 1]."""
    _check_same_dim(a, b)
    return int(np.bitwise_count(a.words ^ b.words).sum()) / a.dim


def bind(a: BitHypervector, b: BitHypervector) -> BitHypervector:
    """XOR binding: key-value assignment, self-inverse (bind(x, bind(x, a)) == a)."""
    _check_same_dim(a, b)
    return BitHypervector(a.words ^ b.words, a.dim)


def bundle(
    vectors: Sequence[BitHypervector],
    rng: Rng,
    weights: Sequence[int] | None = None,
) -> BitHypervector:
    """Per-bit majority vote over the vectors, weights counted as extra votes.

    Exact ties (possible only when the total vote count is even) are resolved
    by a fair coin drawn from `rng`; one full-width draw is consumed per call
    with an even total, so the result is a pure function of (inputs, seed).
    A weight of 0 excludes a vector entirely.
    """
    if len(vectors) == 0:
        raise ValueError("bundle of empty list")
    dim = vectors[0].dim
    if weights is None:
        weights = [1] * len(vectors)
    if len(weights) != len(vectors):
        raise ValueError(f"{len(weights)} weights for {len(vectors)} vectors")
    if any(w < 0 for w in weights):
        raise ValueError("weights must be non-negative")

    counts = np.zeros(dim, dtype=np.int64)
    total = 0
    for vec, w in zip(vectors, weights):
        if vec.dim != dim:
            raise ValueError(f"dimension mismatch: {vec.dim} != {dim}")
        if w == 0:
            continue
        counts += w * _unpack_bits(vec.words, dim).astype(np.int64)
        total += w
    if total == 0:
        raise ValueError("total vote weight is zero")

    doubled = 2 * counts
    bits = (doubled > total).astype(np.uint8)
    if total % 2 == 0:
        tie_bits = _unpack_bits(rng.words(dim // WORD_BITS), dim)
        ties = doubled == total
        bits[ties] = tie_bits[ties]
    return BitHypervector(_pack_bits(bits), dim)


class ItemMemory:
    """Ordered dictionary of clean hypervectors used to resolve noisy matches."""

    def __init__(self, dim: int):
        _check_dim(dim)
        self.dim = dim
        self._names: list[str] = []
        self._vectors: dict[str, BitHypervector] = {}
        self._matrix: np.ndarray | None = None

    def add(self, name: str, vector: BitHypervector) -> None:
        if name in self._vectors:
            raise ValueError(f"duplicate symbol name: {name!r}")
        if vector.dim != self.dim:
            raise ValueError(f"dimension mismatch: {vector.dim} != {self.dim}")
        self._names.append(name)
        self._vectors[name] = vector
        self._matrix = None

    def get(self, name: str) -> BitHypervector:
        try:
            return self._vectors[name]
        except KeyError:
            raise KeyError(f"symbol {name!r} not in memory") from None

    def names(self) -> list[str]:
        return list(self._names)

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, name: str) -> bool:
        return name in self._vectors

    def items(self) -> Iterable[tuple[str, BitHypervector]]:
        return ((n, self._vectors[n]) for n in self._names)

    def _stacked(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.stack([self._vectors[n].words for n in self._names])
        return self._matrix


def cleanup(noisy: BitHypervector, memory: ItemMemory) -> tuple[str, float]:
    """Return (name, distance) of the closest stored vector; first inserted wins ties."""
    if len(memory) == 0:
        raise ValueError("cleanup against empty memory")
    if noisy.dim != memory.dim:
        raise ValueError(f"dimension mismatch: {noisy.dim} != {memory.dim}")
    counts = np.bitwise_count(memory._stacked() ^ noisy.words).sum(axis=1)
    best = int(np.argmin(counts))  # argmin returns the first minimum
    return memory.names()[best], int(counts[best]) / memory.dim
