"""Persistent hypervector store: encoder config, records, and indexes.

A store directory is the shared artifact between parties: an encoder
configuration (seeds), the ingested records, and the per-attribute (MV)
and/or compound (SV) indexes.  Ingest validates and encodes a whole batch
before anything is committed, writes indexes to temp files with atomic
renames, and swaps the in-memory snapshot under a writer lock, so readers
always observe either the pre-ingest or post-ingest store.

Request-for-information (RFI) constraints are turned into attribute query
vectors here; matching itself lives in hvd.index.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from hvd.bsc import BitHypervector, bundle
from hvd.encoders import EncoderConfig, Encoders, parse_utc, project_many
from hvd.index import Fuzziness, HammingIndex, MatchResult, match
from hvd.ingest import EnrichmentClient
from hvd.records import (
    Record,
    RoleRegistry,
    encode_corpus_attributes,
    encode_corpus_sv,
    make_query_vectors_sv,
)

__all__ = ["Store", "StoreMismatch", "Rfi", "IngestReport", "DEFAULT_FUZZINESS_MV", "DEFAULT_FUZZINESS_SV"]

MANIFEST_NAME = "manifest.json"
CONFIG_NAME = "encoder_config.json"
RECORDS_NAME = "records.jsonl"
LABELS_NAME = "labels.json"
TAGS_NAME = "tag_embeddings.json"

# Per-attribute fuzziness applied when a query omits thresholds, calibrated
# on the synthetic corpus at 10240 bits.  SV distances are compressed toward
# 0.5 by bundling, so the single-vector defaults sit in a narrower band.
DEFAULT_FUZZINESS_MV = {
    "text": 0.47,
    "hashtags": 0.47,
    "language": 0.05,
    "location": 0.10,
    "sentiment": 0.45,
    "created_at": 0.05,
    "year": 0.05,
    "month": 0.05,
    "day": 0.05,
    "hour": 0.05,
    "minute": 0.05,
}
DEFAULT_FUZZINESS_SV = {
    "text": 0.45,
    "hashtags": 0.45,
    "language": 0.42,
    "location": 0.42,
    "sentiment": 0.40,
    "created_at": 0.40,
    "year": 0.40,
    "month": 0.40,
    "day": 0.40,
    "hour": 0.40,
    "minute": 0.40,
}

# user-supplied fuzziness of exactly 0 means "exact match only"; realized as
# a threshold below the smallest representable nonzero distance
def _effective_threshold(value: float, dim: int) -> float:
    return 0.5 / dim if value == 0.0 else value


class StoreMismatch(RuntimeError):
    """Encoder config / registry disagrees with what the store was built with."""


@dataclass
class Rfi:
    """An analyst request-for-information: constraints plus match tuning."""

    constraints: dict
    fuzziness: dict[str, float] = field(default_factory=dict)
    mode: str = "mv"
    k: int | None = None

    def __post_init__(self):
        if not self.constraints:
            raise ValueError("RFI needs at least one constraint")
        if self.mode not in ("mv", "sv"):
            raise ValueError(f"mode must be 'mv' or 'sv', got {self.mode!r}")
        known = {"text", "hashtags", "language", "location", "sentiment_class", "time_range"}
        unknown = set(self.constraints) - known
        if unknown:
            raise ValueError(f"unknown constraint(s): {sorted(unknown)}")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class IngestReport:
    accepted: int
    duplicates: int
    rejected: int
    errors: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "duplicates": self.duplicates,
            "rejected": self.rejected,
            "errors": self.errors,
        }


class _Snapshot:
    """Immutable view of the store contents; swapped wholesale on ingest."""

    def __init__(
        self,
        records: dict[str, Record],
        mv_indexes: dict[str, HammingIndex],
        sv_index: HammingIndex | None,
        tag_embeddings: dict[str, list[float]],
    ):
        self.records = records
        self.mv_indexes = mv_indexes
        self.sv_index = sv_index
        self.tag_embeddings = tag_embeddings

    @property
    def size(self) -> int:
        return len(self.records)


class Store:
    """A store directory opened for queries and (serialized) ingest."""

    def __init__(self, path: str | Path, config: EncoderConfig, modes: Sequence[str]):
        self.path = Path(path)
        self.config = config
        self.modes = tuple(modes)
        self.encoders = Encoders(config)
        self.roles = RoleRegistry.from_encoders(self.encoders)
        self._write_lock = threading.Lock()
        self._snapshot = _Snapshot({}, {}, None, {})

    # -- lifecycle -------------------------------------------------------

    @classmethod
    def create(
        cls, path: str | Path, config: EncoderConfig, modes: Sequence[str] = ("mv", "sv")
    ) -> "Store":
        path = Path(path)
        if (path / MANIFEST_NAME).exists():
            raise StoreMismatch(f"store already exists at {path}")
        for mode in modes:
            if mode not in ("mv", "sv"):
                raise ValueError(f"unknown mode {mode!r}")
        path.mkdir(parents=True, exist_ok=True)
        (path / "indexes").mkdir(exist_ok=True)
        store = cls(path, config, modes)
        config.save(path / CONFIG_NAME)
        store._write_manifest()
        (path / RECORDS_NAME).touch()
        return store

    @classmethod
    def open(cls, path: str | Path) -> "Store":
        path = Path(path)
        manifest_path = path / MANIFEST_NAME
        if not manifest_path.exists():
            raise StoreMismatch(f"no store at {path}")
        manifest = json.loads(manifest_path.read_text())
        config = EncoderConfig.load(path / CONFIG_NAME)
        store = cls(path, config, tuple(manifest["modes"]))
        if manifest["registry_hash"] != store.roles.version_hash():
            raise StoreMismatch("role registry hash mismatch: store built with a different registry")
        if manifest["dim"] != config.dim:
            raise StoreMismatch("manifest dim disagrees with encoder config")
        store._load_snapshot()
        return store

    def _write_manifest(self) -> None:
        manifest = {
            "format": 1,
            "dim": self.config.dim,
            "modes": list(self.modes),
            "registry_hash": self.roles.version_hash(),
            "records": self._snapshot.size,
        }
        _atomic_write_text(self.path / MANIFEST_NAME, json.dumps(manifest, indent=2))

    def _load_snapshot(self) -> None:
        records: dict[str, Record] = {}
        records_path = self.path / RECORDS_NAME
        if records_path.exists():
            with open(records_path, "r", encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        rec = Record.from_json_dict(json.loads(line))
                        records[rec.id] = rec
        mv_indexes: dict[str, HammingIndex] = {}
        mv_dir = self.path / "indexes" / "mv"
        if mv_dir.exists():
            for file in sorted(mv_dir.glob("*.hvix")):
                idx = HammingIndex.load(file)
                mv_indexes[idx.attribute] = idx
        sv_index = None
        sv_path = self.path / "indexes" / "sv" / "compound.hvix"
        if sv_path.exists():
            sv_index = HammingIndex.load(sv_path)
        tags_path = self.path / TAGS_NAME
        tags = json.loads(tags_path.read_text()) if tags_path.exists() else {}
        self._snapshot = _Snapshot(records, mv_indexes, sv_index, tags)

    @property
    def snapshot(self) -> _Snapshot:
        return self._snapshot

    @property
    def size(self) -> int:
        return self._snapshot.size

    def record(self, record_id: str) -> Record:
        try:
            return self._snapshot.records[record_id]
        except KeyError:
            raise KeyError(f"record {record_id!r} not in store") from None

    def labels(self) -> dict | None:
        labels_path = self.path / LABELS_NAME
        return json.loads(labels_path.read_text()) if labels_path.exists() else None

    def save_labels(self, labels: dict) -> None:
        _atomic_write_text(self.path / LABELS_NAME, json.dumps(labels, indent=2, sort_keys=True))

    # -- ingest ----------------------------------------------------------

    def ingest(self, records: Sequence[Record]) -> IngestReport:
        """Encode and append a batch atomically; duplicates by id are skipped.

        If any record in the batch fails validation or encoding, the whole
        batch is rejected and the store is unchanged.
        """
        with self._write_lock:
            snap = self._snapshot
            fresh = [r for r in records if r.id not in snap.records]
            duplicates = len(records) - len(fresh)
            seen_batch = set()
            for rec in fresh:
                if rec.id in seen_batch:
                    return IngestReport(0, duplicates, len(fresh), [f"duplicate id in batch: {rec.id}"])
                seen_batch.add(rec.id)
            if not fresh:
                return IngestReport(0, duplicates, 0)

            try:
                attr_vectors = encode_corpus_attributes(fresh, self.encoders)
                compounds = (
                    encode_corpus_sv(fresh, self.encoders, self.roles, attr_vectors)
                    if "sv" in self.modes
                    else None
                )
            except ValueError as exc:
                return IngestReport(0, duplicates, len(fresh), [str(exc)])

            new_records = dict(snap.records)
            for rec in fresh:
                new_records[rec.id] = rec

            new_mv = {}
            if "mv" in self.modes:
                added: dict[str, list[tuple[str, BitHypervector]]] = {}
                for rec, vecs in zip(fresh, attr_vectors):
                    for attr, vec in vecs.items():
                        added.setdefault(attr, []).append((rec.id, vec))
                for attr in set(snap.mv_indexes) | set(added):
                    base = snap.mv_indexes.get(attr) or HammingIndex(self.config.dim, attr)
                    new_mv[attr] = base.extended(added.get(attr, []))

            new_sv = None
            if "sv" in self.modes:
                base = snap.sv_index or HammingIndex(self.config.dim, "compound")
                new_sv = base.extended(list(zip([r.id for r in fresh], compounds)))

            new_tags = dict(snap.tag_embeddings)
            for rec in fresh:
                if rec.hashtags and rec.hashtag_embeddings is not None:
                    for tag, emb in zip(rec.hashtags, rec.hashtag_embeddings):
                        new_tags.setdefault(tag, [float(x) for x in emb])

            self._persist(new_records, new_mv, new_sv, new_tags)
            self._snapshot = _Snapshot(new_records, new_mv, new_sv, new_tags)
            self._write_manifest()
            return IngestReport(len(fresh), duplicates, 0)

    def _persist(
        self,
        records: dict[str, Record],
        mv_indexes: dict[str, HammingIndex],
        sv_index: HammingIndex | None,
        tags: dict[str, list[float]],
    ) -> None:
        lines = "".join(json.dumps(rec.to_json_dict()) + "\n" for rec in records.values())
        _atomic_write_text(self.path / RECORDS_NAME, lines)
        if mv_indexes:
            mv_dir = self.path / "indexes" / "mv"
            mv_dir.mkdir(parents=True, exist_ok=True)
            for attr, idx in mv_indexes.items():
                _atomic_write_bytes(mv_dir / f"{attr}.hvix", idx.to_bytes())
        if sv_index is not None:
            sv_dir = self.path / "indexes" / "sv"
            sv_dir.mkdir(parents=True, exist_ok=True)
            _atomic_write_bytes(sv_dir / "compound.hvix", sv_index.to_bytes())
        _atomic_write_text(self.path / TAGS_NAME, json.dumps(tags, sort_keys=True))

    # -- queries ---------------------------------------------------------

    def build_rfi_queries(
        self, rfi: Rfi, client: EnrichmentClient | None = None
    ) -> list[tuple[str, BitHypervector]]:
        """Turn RFI constraints into (attribute, filler) pairs for this store."""
        snap = self._snapshot
        enc = self.encoders
        fillers: list[tuple[str, BitHypervector]] = []
        cons = rfi.constraints

        if "text" in cons:
            value = cons["text"]
            if value in snap.records:  # query-by-example
                example = snap.records[value]
                if example.text_embedding is None:
                    raise ValueError(f"example record {value!r} has no stored embedding")
                fillers.append(("text", enc.text(example.text_embedding)))
            else:
                if client is None:
                    raise ValueError(
                        "free-text query needs an enrichment client (or use a record id for query-by-example)"
                    )
                fillers.append(("text", enc.text(client.embed(value))))

        if "hashtags" in cons:
            tags = cons["hashtags"]
            if not isinstance(tags, (list, tuple)) or not tags:
                raise ValueError("hashtags constraint must be a non-empty list")
            embeddings = []
            for tag in tags:
                stored = snap.tag_embeddings.get(tag)
                if stored is not None:
                    embeddings.append(np.asarray(stored, dtype=np.float64))
                elif client is not None:
                    embeddings.append(np.asarray(client.embed(tag), dtype=np.float64))
                else:
                    raise ValueError(f"hashtag {tag!r} unknown to store and no enrichment client")
            projected = project_many(np.stack(embeddings), enc.hashtag_projection)
            key = "|".join(sorted(str(t) for t in tags))
            fillers.append(("hashtags", bundle(projected, enc.tiebreak_rng("query-hashtags", key))))

        if "language" in cons:
            fillers.append(("language", enc.lexical(cons["language"])))
        if "location" in cons:
            fillers.append(("location", enc.lexical(cons["location"])))

        if "sentiment_class" in cons:
            classes = ("negative", "neutral", "positive")
            if cons["sentiment_class"] not in classes:
                raise ValueError(f"sentiment_class must be one of {classes}")
            onehot = np.zeros(3)
            onehot[classes.index(cons["sentiment_class"])] = 1.0
            fillers.append(("sentiment", enc.sentiment(onehot)))

        if "time_range" in cons:
            fillers.extend(self._time_range_queries(cons["time_range"], rfi))

        if not fillers:
            raise ValueError("RFI produced no query vectors")
        return fillers

    def _time_range_queries(self, time_range, rfi: Rfi) -> list[tuple[str, BitHypervector]]:
        if not isinstance(time_range, (list, tuple)) or len(time_range) != 2:
            raise ValueError("time_range must be [start, end]")
        start = parse_utc(time_range[0]) if isinstance(time_range[0], str) else time_range[0]
        end = parse_utc(time_range[1]) if isinstance(time_range[1], str) else time_range[1]
        if start >= end:
            raise ValueError("time_range start must precede end")
        tc = self.config.time
        if tc.mode == "level":
            # query at the range start; fuzziness derived from the range width
            # unless the caller provided one
            filler = self.encoders.timestamp_level(start)
            if "created_at" not in rfi.fuzziness:
                w_start = tc.window_of(start)
                w_end = tc.window_of(end)
                seq_step = 0.5 / (tc.levels - 1)
                rfi.fuzziness["created_at"] = min(1.0, (w_end - w_start + 1) * seq_step)
            return [("created_at", filler)]
        # component mode: constrain the components that are constant across the range
        from hvd.encoders import timestamp_components

        cs, ce = timestamp_components(start), timestamp_components(end)
        out = []
        for comp in tc.components:
            if cs[comp] == ce[comp]:
                out.append((comp, self.encoders.component_memories[comp].get(str(cs[comp]))))
            else:
                break  # coarser components differ; finer ones are unconstrained
        if not out:
            raise ValueError(
                "time_range spans every configured component; widen fuzziness or use level mode"
            )
        return out

    def match_rfi(self, rfi: Rfi, client: EnrichmentClient | None = None) -> tuple[MatchResult, dict]:
        """Run an RFI against the snapshot; returns the result and timing info."""
        t0 = time.perf_counter()
        snap = self._snapshot
        if rfi.mode not in self.modes:
            raise StoreMismatch(f"store has no {rfi.mode} indexes")
        fillers = self.build_rfi_queries(rfi, client)

        defaults = DEFAULT_FUZZINESS_MV if rfi.mode == "mv" else DEFAULT_FUZZINESS_SV
        thresholds = {}
        for attr, _ in fillers:
            raw = rfi.fuzziness.get(attr, defaults[attr])
            thresholds[attr] = _effective_threshold(float(raw), self.config.dim)
        fuzz = Fuzziness(thresholds)

        if rfi.mode == "mv":
            queries = fillers
            indexes = snap.mv_indexes
            for attr, _ in queries:
                if attr not in indexes:
                    raise KeyError(f"no records carry attribute {attr!r}")
        else:
            queries = make_query_vectors_sv(dict(fillers), self.roles)
            if snap.sv_index is None:
                raise StoreMismatch("store has no sv index")
            indexes = {attr: snap.sv_index for attr, _ in queries}

        k = rfi.k if rfi.k is not None else max(snap.size, 1)
        result = match(queries, indexes, fuzz, k)
        timing = {
            "elapsed_ms": (time.perf_counter() - t0) * 1000.0,
            "k": k,
            "store_size": snap.size,
            "thresholds": thresholds,
        }
        return result, timing


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
