"""Matching-accuracy experiments over a labeled corpus.

Four methodologies, each scoring how well Hamming-space matching recovers
ground truth that the matcher never sees:

* semantic: per topic, query with an exemplar record's text vector and
  measure the fraction of the top-N matches sharing the topic label,
* lexical: for each language/location value with x true records, rank all
  records and classify the first x as positive, reporting recall,
* sentiment: same first-x rule with one-hot class queries, per argmax class,
* timestamp: query the earliest representable time and check that retrieval
  order respects time windows (level encoding), or query each calendar
  window's component vectors and check membership (component encoding).

Ground-truth labels are used for scoring only, never during matching.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy import stats

from hvd.bsc import BitHypervector, bind
from hvd.encoders import EncoderConfig, Encoders, TimeConfig
from hvd.index import HammingIndex, index_build
from hvd.records import (
    Record,
    RoleRegistry,
    encode_corpus_attributes,
    encode_corpus_sv,
)

__all__ = ["EncodedCorpus", "EvalReport", "eval_semantic", "eval_lexical", "eval_sentiment", "eval_timestamp", "run_all"]


class EncodedCorpus:
    """Records encoded under one (config, mode) pair with searchable indexes."""

    def __init__(self, records: Sequence[Record], config: EncoderConfig, mode: str):
        if mode not in ("mv", "sv"):
            raise ValueError(f"mode must be 'mv' or 'sv', got {mode!r}")
        self.records = list(records)
        self.config = config
        self.mode = mode
        self.encoders = Encoders(config)
        self.roles = RoleRegistry.from_encoders(self.encoders)
        self.ids = [r.id for r in self.records]

        attribute_vectors = encode_corpus_attributes(self.records, self.encoders)
        if mode == "mv":
            per_attr: dict[str, list[tuple[str, BitHypervector]]] = {}
            for rec, vecs in zip(self.records, attribute_vectors):
                for attr, vec in vecs.items():
                    per_attr.setdefault(attr, []).append((rec.id, vec))
            self.indexes = {
                attr: index_build(vectors, attr, dim=config.dim)
                for attr, vectors in per_attr.items()
            }
        else:
            compounds = encode_corpus_sv(self.records, self.encoders, self.roles, attribute_vectors)
            self.indexes = {
                "__sv__": index_build(list(zip(self.ids, compounds)), "__sv__", dim=config.dim)
            }

    def attribute_query(self, attr: str, filler: BitHypervector) -> tuple[HammingIndex, BitHypervector]:
        """Index and query vector realizing an attribute constraint in this mode."""
        if self.mode == "mv":
            if attr not in self.indexes:
                raise KeyError(f"no records carry attribute {attr!r}")
            return self.indexes[attr], filler
        return self.indexes["__sv__"], bind(self.roles.role(attr), filler)

    def ranked_ids(self, attr: str, filler: BitHypervector) -> list[str]:
        """All record ids ordered by ascending distance (stable ties)."""
        idx, query = self.attribute_query(attr, filler)
        return [rid for rid, _ in idx.search(query, len(idx))]

    def attribute_distances(self, attr: str, filler: BitHypervector) -> np.ndarray:
        """Normalized distances aligned with this corpus' record order."""
        idx, query = self.attribute_query(attr, filler)
        if idx.ids != self.ids:
            raise RuntimeError(f"attribute {attr!r} index does not cover every record")
        return idx.raw_distances(query) / idx.dim


def _topic_exemplar(corpus: EncodedCorpus, labels: dict, topic: str) -> Record:
    """The record whose embedding lies closest to its topic's mean embedding."""
    members = [r for r in corpus.records if labels["records"][r.id]["topic"] == topic]
    stack = np.stack([r.text_embedding for r in members])
    mean = stack.mean(axis=0)
    mean /= np.linalg.norm(mean)
    sims = stack @ mean
    return members[int(np.argmax(sims))]


def eval_semantic(corpus: EncodedCorpus, labels: dict, n: int = 300) -> dict[str, float]:
    """precision@n per topic for exemplar-record text queries."""
    if n > len(corpus.records):
        raise ValueError(f"n={n} exceeds corpus size {len(corpus.records)}")
    out: dict[str, float] = {}
    for topic in labels["meta"]["topics"]:
        seed = _topic_exemplar(corpus, labels, topic)
        filler = corpus.encoders.text(seed.text_embedding)
        top = corpus.ranked_ids("text", filler)[:n]
        on_topic = sum(1 for rid in top if labels["records"][rid]["topic"] == topic)
        out[topic] = on_topic / n
    return out


def _first_x_recall(ranked: list[str], true_ids: set[str]) -> float:
    x = len(true_ids)
    return len(set(ranked[:x]) & true_ids) / x


def eval_lexical(corpus: EncodedCorpus, labels: dict, attribute: str) -> dict[str, float]:
    """Recall per distinct value of a lexically encoded attribute."""
    if attribute not in ("language", "location"):
        raise ValueError(f"lexical evaluation covers language/location, got {attribute!r}")
    by_value: dict[str, set[str]] = {}
    for rid, lab in labels["records"].items():
        value = lab.get(attribute)
        if value is not None:
            by_value.setdefault(value, set()).add(rid)
    if not by_value:
        raise ValueError(f"no ground truth for attribute {attribute!r}")
    out: dict[str, float] = {}
    for value, true_ids in sorted(by_value.items()):
        filler = corpus.encoders.lexical(value)
        ranked = corpus.ranked_ids(attribute, filler)
        out[value] = _first_x_recall(ranked, true_ids)
    return out


SENTIMENT_CLASSES = ("negative", "neutral", "positive")


def eval_sentiment(corpus: EncodedCorpus, labels: dict) -> dict[str, float]:
    """Recall per sentiment class for one-hot class queries; argmax is the class."""
    by_class: dict[str, set[str]] = {c: set() for c in SENTIMENT_CLASSES}
    for rid, lab in labels["records"].items():
        by_class[lab["sentiment_class"]].add(rid)
    out: dict[str, float] = {}
    for i, cls in enumerate(SENTIMENT_CLASSES):
        true_ids = by_class[cls]
        if not true_ids:
            raise ValueError(f"sentiment class {cls!r} absent from corpus")
        onehot = np.zeros(3)
        onehot[i] = 1.0
        filler = corpus.encoders.sentiment(onehot)
        ranked = corpus.ranked_ids("sentiment", filler)
        out[cls] = _first_x_recall(ranked, true_ids)
    out["mean"] = float(np.mean([out[c] for c in SENTIMENT_CLASSES]))
    return out


def _window_order_accuracy(ranked: list[str], true_window: dict[str, int]) -> float:
    """Fraction of records whose rank falls inside their window's rank interval."""
    counts: dict[int, int] = {}
    for w in true_window.values():
        counts[w] = counts.get(w, 0) + 1
    start = 0
    intervals: dict[int, tuple[int, int]] = {}
    for w in sorted(counts):
        intervals[w] = (start, start + counts[w])
        start += counts[w]
    correct = 0
    for pos, rid in enumerate(ranked):
        lo, hi = intervals[true_window[rid]]
        if lo <= pos < hi:
            correct += 1
    return correct / len(ranked)


def eval_timestamp_level(corpus: EncodedCorpus) -> dict[str, float]:
    """Earliest-time query: window ordering accuracy and rank/time correlation."""
    cfg = corpus.config.time
    if cfg.mode != "level":
        raise ValueError("corpus is not level-encoded")
    filler = corpus.encoders.timestamp_level(cfg.range_start)
    ranked = corpus.ranked_ids("created_at", filler)
    true_window = {r.id: cfg.window_of(r.created_at) for r in corpus.records}
    accuracy = _window_order_accuracy(ranked, true_window)

    position = {rid: pos for pos, rid in enumerate(ranked)}
    ranks = [position[r.id] for r in corpus.records]
    times = [r.created_at.timestamp() for r in corpus.records]
    rho = float(stats.spearmanr(ranks, times).statistic)
    return {"accuracy": accuracy, "spearman": rho}


def eval_timestamp_components(corpus: EncodedCorpus) -> dict[str, float]:
    """Per calendar-window component queries; membership of the top-x matches."""
    cfg = corpus.config.time
    if cfg.mode != "components":
        raise ValueError("corpus is not component-encoded")
    components = cfg.components

    def key_of(rec: Record):
        from hvd.encoders import timestamp_components

        values = timestamp_components(rec.created_at)
        return tuple(values[c] for c in components)

    windows: dict[tuple, set[str]] = {}
    for rec in corpus.records:
        windows.setdefault(key_of(rec), set()).add(rec.id)

    correct = 0
    for key in sorted(windows):
        true_ids = windows[key]
        dist = np.zeros(len(corpus.records))
        for comp, value in zip(components, key):
            filler = corpus.encoders.component_memories[comp].get(str(value))
            dist += corpus.attribute_distances(comp, filler)
        order = np.argsort(dist, kind="stable")
        top = {corpus.ids[i] for i in order[: len(true_ids)]}
        correct += len(top & true_ids)
    return {"accuracy": correct / len(corpus.records), "windows": float(len(windows))}


def eval_timestamp(
    records: Sequence[Record], config: EncoderConfig, mode: str, encoding: str
) -> dict[str, float]:
    """Build the right time encoding for `encoding` and run its metric."""
    if encoding == "level":
        cfg = config if config.time.mode == "level" else _with_time_mode(config, "level")
        return eval_timestamp_level(EncodedCorpus(records, cfg, mode))
    if encoding == "components":
        cfg = config if config.time.mode == "components" else _with_time_mode(config, "components")
        return eval_timestamp_components(EncodedCorpus(records, cfg, mode))
    raise ValueError(f"unknown time encoding {encoding!r}")


def _with_time_mode(config: EncoderConfig, mode: str) -> EncoderConfig:
    time = TimeConfig(
        range_start=config.time.range_start,
        range_end=config.time.range_end,
        levels=config.time.levels,
        mode=mode,
        components=config.time.components,
    )
    return replace(config, time=time)


@dataclass
class EvalReport:
    """Serializable result bundle for one (dim, mode) evaluation run."""

    config: dict
    semantic: dict[str, float] | None = None
    lexical: dict[str, dict[str, float]] | None = None
    sentiment: dict[str, float] | None = None
    timestamp: dict[str, dict[str, float]] | None = None

    def to_dict(self) -> dict:
        out: dict = {"config": self.config}
        for key in ("semantic", "lexical", "sentiment", "timestamp"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out


def run_all(
    records: Sequence[Record],
    labels: dict,
    config: EncoderConfig,
    mode: str,
    n: int = 300,
    experiments: Sequence[str] = ("semantic", "lexical", "sentiment", "timestamp"),
) -> EvalReport:
    report = EvalReport(
        config={
            "dim": config.dim,
            "mode": mode,
            "corpus_seed": labels["meta"].get("seed"),
            "encoder_seeds": config.seeds,
            "n": n,
        }
    )
    corpus = EncodedCorpus(records, config, mode) if set(experiments) - {"timestamp"} else None
    if "semantic" in experiments:
        report.semantic = eval_semantic(corpus, labels, n=n)
    if "lexical" in experiments:
        report.lexical = {
            attr: eval_lexical(corpus, labels, attr) for attr in ("language", "location")
        }
    if "sentiment" in experiments:
        report.sentiment = eval_sentiment(corpus, labels)
    if "timestamp" in experiments:
        report.timestamp = {
            "level": eval_timestamp(records, config, mode, "level"),
            "components": eval_timestamp(records, config, mode, "components"),
        }
    return report
