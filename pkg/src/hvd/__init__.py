"""Hyperdimensional data-discovery engine.

Encodes semi-structured records into compact binary hypervectors (binary
spatter codes plus projected semantic embeddings) and serves analyst
request-for-information queries by Hamming-distance matching with
per-attribute fuzziness thresholds.
"""

from hvd.bsc import (
    BitHypervector,
    ItemMemory,
    Rng,
    bind,
    bundle,
    cleanup,
    hamming,
    random_hypervector,
)

__version__ = "0.1.0"

__all__ = [
    "BitHypervector",
    "ItemMemory",
    "Rng",
    "bind",
    "bundle",
    "cleanup",
    "hamming",
    "random_hypervector",
    "__version__",
]
