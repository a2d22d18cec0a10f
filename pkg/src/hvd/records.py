"""Minimal metadata model and the two hypervector representations of a record.

A record encodes either as multiple vectors (MV: one per populated
attribute) or as a single compound vector (SV: each attribute filler bound
to its role vector, all bundled).  Roles come from per-attribute level
sequences spanning the full bit width, taking the middle element, which sits
at distance 0.5 from the sequence start; query weighting to zero is realized
by excluding an attribute from the query set entirely, so an N-attribute
query yields N standalone query vectors.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from hvd.bsc import BitHypervector, Rng, bind, bundle
from hvd.encoders import Encoders, format_utc, new_level_sequence, parse_utc

__all__ = [
    "Record",
    "RoleRegistry",
    "ATTRIBUTES",
    "encode_record_mv",
    "encode_record_sv",
    "encode_corpus_attributes",
    "encode_corpus_sv",
    "make_query_vectors_sv",
    "record_attribute_vectors",
]

# Canonical attribute order; time components are separate attributes so a
# compound can carry them individually when the config uses component mode.
ATTRIBUTES = (
    "text",
    "hashtags",
    "language",
    "location",
    "sentiment",
    "created_at",
    "year",
    "month",
    "day",
    "hour",
    "minute",
)


@dataclass
class Record:
    """One social-media record in the minimal metadata model."""

    id: str
    text: str
    created_at: datetime
    hashtags: list[str] = field(default_factory=list)
    language: str | None = None
    location: str | None = None
    sentiment: list[float] | None = None
    text_embedding: np.ndarray | None = None
    hashtag_embeddings: list[np.ndarray] | None = None
    unenriched: bool = False

    def to_json_dict(self, include_embeddings: bool = True) -> dict:
        out: dict = {
            "id": self.id,
            "text": self.text,
            "hashtags": list(self.hashtags),
            "created_at": format_utc(self.created_at),
        }
        if self.language is not None:
            out["language"] = self.language
        if self.location is not None:
            out["location"] = self.location
        if self.sentiment is not None:
            out["sentiment"] = [float(p) for p in self.sentiment]
        if include_embeddings and self.text_embedding is not None:
            out["text_embedding"] = [float(x) for x in self.text_embedding]
        if include_embeddings and self.hashtag_embeddings is not None:
            out["hashtag_embeddings"] = [[float(x) for x in e] for e in self.hashtag_embeddings]
        return out

    @classmethod
    def from_json_dict(cls, raw: dict) -> "Record":
        for key in ("id", "text", "created_at"):
            if key not in raw:
                raise ValueError(f"missing required field {key!r}")
        if not isinstance(raw["id"], str) or not raw["id"]:
            raise ValueError("id must be a non-empty string")
        text_embedding = raw.get("text_embedding")
        hashtag_embeddings = raw.get("hashtag_embeddings")
        return cls(
            id=raw["id"],
            text=raw["text"],
            created_at=parse_utc(raw["created_at"]),
            hashtags=list(raw.get("hashtags", [])),
            language=raw.get("language"),
            location=raw.get("location"),
            sentiment=list(raw["sentiment"]) if raw.get("sentiment") is not None else None,
            text_embedding=np.asarray(text_embedding, dtype=np.float64)
            if text_embedding is not None
            else None,
            hashtag_embeddings=[np.asarray(e, dtype=np.float64) for e in hashtag_embeddings]
            if hashtag_embeddings is not None
            else None,
        )


class RoleRegistry:
    """Per-attribute role vectors shared between encoding parties.

    Each attribute gets its own full-span level sequence; the role is the
    middle element.  The registry hash pins the convention: an index built
    with one registry cannot be queried with another.
    """

    def __init__(self, dim: int, seed: int, levels: int = 5, attributes: tuple[str, ...] = ATTRIBUTES):
        if levels < 3 or levels % 2 == 0:
            raise ValueError(f"role sequences need an odd level count >= 3, got {levels}")
        self.dim = dim
        self.seed = seed
        self.levels = levels
        self.attributes = tuple(attributes)
        base = Rng(seed)
        self.sequences = {
            attr: new_level_sequence(levels, dim, base.child("role", attr), span=1.0)
            for attr in self.attributes
        }

    def role(self, attribute: str) -> BitHypervector:
        try:
            return self.sequences[attribute].middle
        except KeyError:
            raise KeyError(f"attribute {attribute!r} unknown to role registry") from None

    def version_hash(self) -> str:
        payload = json.dumps(
            {"dim": self.dim, "seed": self.seed, "levels": self.levels, "attributes": self.attributes},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    @classmethod
    def from_encoders(cls, enc: Encoders) -> "RoleRegistry":
        return cls(enc.config.dim, enc.config.seeds["roles"], enc.config.role_levels)


def record_attribute_vectors(rec: Record, enc: Encoders) -> dict[str, BitHypervector]:
    """Per-attribute filler vectors for every populated attribute of a record.

    The attribute set exactly mirrors the populated fields: optional fields
    that are absent produce no key.  Time contributes either one `created_at`
    level vector or one vector per configured component.
    """
    vectors: dict[str, BitHypervector] = {}
    if rec.text_embedding is None:
        raise ValueError(f"record {rec.id}: text embedding required for encoding")
    vectors["text"] = enc.text(rec.text_embedding)

    if rec.hashtags:
        if rec.hashtag_embeddings is None or len(rec.hashtag_embeddings) != len(rec.hashtags):
            raise ValueError(f"record {rec.id}: hashtag embeddings missing or mismatched")
        vectors["hashtags"] = enc.hashtags(rec.hashtag_embeddings, rec.id)

    if rec.language is not None:
        vectors["language"] = enc.lexical(rec.language)
    if rec.location is not None:
        vectors["location"] = enc.lexical(rec.location)
    if rec.sentiment is not None:
        vectors["sentiment"] = enc.sentiment(np.asarray(rec.sentiment))

    if enc.config.time.mode == "level":
        vectors["created_at"] = enc.timestamp_level(rec.created_at)
    else:
        vectors.update(enc.timestamp_components(rec.created_at))
    return vectors


def encode_record_mv(rec: Record, enc: Encoders) -> dict[str, BitHypervector]:
    """Multiple-vector form: one hypervector per populated attribute."""
    return record_attribute_vectors(rec, enc)


def encode_record_sv(
    rec: Record, enc: Encoders, roles: RoleRegistry, rng: Rng | None = None
) -> BitHypervector:
    """Single-vector form: bundle of bind(role, filler) over populated attributes.

    The bundle tie-break stream defaults to one derived from the record id,
    so re-encoding reproduces the compound bit-exactly in any order.
    """
    fillers = record_attribute_vectors(rec, enc)
    if rng is None:
        rng = enc.tiebreak_rng("sv", rec.id)
    bound = [bind(roles.role(attr), filler) for attr, filler in fillers.items()]
    return bundle(bound, rng)


def make_query_vectors_sv(
    query_attributes: dict[str, BitHypervector], roles: RoleRegistry
) -> list[tuple[str, BitHypervector]]:
    """One query vector per constrained attribute: bind(role_k, filler_k).

    Unconstrained attributes are weighted to zero by exclusion, so N
    constrained attributes produce exactly N query vectors.
    """
    if not query_attributes:
        raise ValueError("query needs at least one attribute")
    return [(attr, bind(roles.role(attr), filler)) for attr, filler in query_attributes.items()]


def encode_corpus_attributes(
    records: list[Record], enc: Encoders
) -> list[dict[str, BitHypervector]]:
    """Per-record attribute vectors with projections batched across the corpus.

    Produces exactly what `record_attribute_vectors` would per record (the
    fixed-point projection is batch-shape independent), just in bulk.
    """
    from hvd.encoders import project_many

    out: list[dict[str, BitHypervector]] = [{} for _ in records]

    text_rows = []
    for rec in records:
        if rec.text_embedding is None:
            raise ValueError(f"record {rec.id}: text embedding required for encoding")
        text_rows.append(rec.text_embedding)
    for vecs, vec in zip(out, project_many(np.stack(text_rows), enc.text_projection)):
        vecs["text"] = vec

    tagged = [(i, rec) for i, rec in enumerate(records) if rec.hashtags]
    if tagged:
        flat: list[np.ndarray] = []
        spans: list[tuple[int, int, int]] = []
        for i, rec in tagged:
            if rec.hashtag_embeddings is None or len(rec.hashtag_embeddings) != len(rec.hashtags):
                raise ValueError(f"record {rec.id}: hashtag embeddings missing or mismatched")
            spans.append((i, len(flat), len(flat) + len(rec.hashtag_embeddings)))
            flat.extend(rec.hashtag_embeddings)
        projected = project_many(np.stack(flat), enc.hashtag_projection)
        for i, lo, hi in spans:
            rng = enc.tiebreak_rng("hashtags", records[i].id)
            out[i]["hashtags"] = bundle(projected[lo:hi], rng)

    with_sentiment = [(i, rec) for i, rec in enumerate(records) if rec.sentiment is not None]
    if with_sentiment:
        probs = np.stack([np.asarray(rec.sentiment, dtype=np.float64) for _, rec in with_sentiment])
        if probs.shape[1] != 3 or np.any(probs < 0) or np.any(np.abs(probs.sum(axis=1) - 1) > 1e-6):
            bad = next(
                rec.id
                for _, rec in with_sentiment
                if len(rec.sentiment) != 3
                or any(p < 0 for p in rec.sentiment)
                or abs(sum(rec.sentiment) - 1) > 1e-6
            )
            raise ValueError(f"record {bad}: invalid sentiment probabilities")
        for (i, _), vec in zip(with_sentiment, project_many(probs, enc.sentiment_projection)):
            out[i]["sentiment"] = vec

    for i, rec in enumerate(records):
        if rec.language is not None:
            out[i]["language"] = enc.lexical(rec.language)
        if rec.location is not None:
            out[i]["location"] = enc.lexical(rec.location)
        if enc.config.time.mode == "level":
            out[i]["created_at"] = enc.timestamp_level(rec.created_at)
        else:
            out[i].update(enc.timestamp_components(rec.created_at))
    return out


def encode_corpus_sv(
    records: list[Record],
    enc: Encoders,
    roles: RoleRegistry,
    attribute_vectors: list[dict[str, BitHypervector]] | None = None,
) -> list[BitHypervector]:
    """Bulk single-vector encoding; same output as `encode_record_sv` per record."""
    if attribute_vectors is None:
        attribute_vectors = encode_corpus_attributes(records, enc)
    compounds = []
    for rec, fillers in zip(records, attribute_vectors):
        bound = [bind(roles.role(attr), filler) for attr, filler in fillers.items()]
        compounds.append(bundle(bound, enc.tiebreak_rng("sv", rec.id)))
    return compounds
