"""Monte Carlo oracles backing thresholds frozen in the test fixtures.

Runs the independent oracles (cosine-vs-hamming projection fidelity, lexical
locality, fuzziness F1 sweep, nearest-centroid topic recovery) and writes
their measurements to tests/fixtures/oracles.json.  The test suite asserts
against both the required thresholds and these recorded values, so a regression
that shifts the underlying distributions is caught even while thresholds
still pass.

Usage: python scripts/calibrate.py [--quick]
"""

from __future__ import annotations

import argparse
import json
import time
from pathlib import Path

import numpy as np
from scipy import stats

from hvd.bsc import Rng, hamming
from hvd.encoders import EncoderConfig, Encoders, ProjectionMatrix, project
from hvd.evaluation import EncodedCorpus
from hvd.ingest import SyntheticCorpusConfig, synth_corpus

FIXTURE_PATH = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "oracles.json"


def unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def pair_with_cosine(gen: np.random.Generator, dim: int, target: float) -> tuple[np.ndarray, np.ndarray]:
    u = unit(gen.normal(size=dim))
    w = gen.normal(size=dim)
    w = unit(w - (w @ u) * u)
    v = target * u + np.sqrt(max(0.0, 1 - target * target)) * w
    return u, unit(v)


def projection_monotonicity(pairs: int) -> dict:
    """Mean projected distance per cosine level; must decrease with similarity."""
    gen = np.random.default_rng(101)
    out = {}
    for dim in (1024, 10240):
        P = ProjectionMatrix(768, dim, seed=55)
        means = {}
        for s in (0.0, 0.5, 0.9):
            dists = []
            for _ in range(pairs):
                u, v = pair_with_cosine(gen, 768, s)
                dists.append(hamming(project(u, P), project(v, P)))
            means[str(s)] = float(np.mean(dists))
        out[str(dim)] = means
    return out


def projection_spearman(pairs: int) -> dict:
    """Rank correlation between cosine distance and projected Hamming distance."""
    out = {}
    for dim in (1024, 10240):
        gen = np.random.default_rng(202)  # fresh stream per dim, matching the tests
        P = ProjectionMatrix(768, dim, seed=55)
        cos_d, ham_d = [], []
        for _ in range(pairs):
            s = float(gen.uniform(-0.2, 0.98))
            u, v = pair_with_cosine(gen, 768, s)
            cos_d.append(1.0 - s)
            ham_d.append(hamming(project(u, P), project(v, P)))
        out[str(dim)] = float(stats.spearmanr(cos_d, ham_d).statistic)
    return out


def lexical_locality(pairs: int) -> float:
    """Spearman between character-multiset difference and lexical distance."""
    from collections import Counter

    enc = Encoders(EncoderConfig.create(dim=10240, seed=77))
    gen = np.random.default_rng(303)
    alphabet = "abcdefghijklmnopqrstuvwxyz"
    multiset_d, ham_d = [], []
    for _ in range(pairs):
        n1, n2 = int(gen.integers(3, 17)), int(gen.integers(3, 17))
        s1 = "".join(gen.choice(list(alphabet), size=n1))
        s2 = "".join(gen.choice(list(alphabet), size=n2))
        c1, c2 = Counter(s1), Counter(s2)
        sym_diff = sum((c1 - c2).values()) + sum((c2 - c1).values())
        multiset_d.append(sym_diff / (n1 + n2))
        ham_d.append(hamming(enc.lexical(s1), enc.lexical(s2)))
    return float(stats.spearmanr(multiset_d, ham_d).statistic)


def fuzziness_f1_sweep(per_topic: int) -> dict:
    """Best-F1 thresholds per attribute on the synthetic corpus, both modes."""
    records, labels = synth_corpus(SyntheticCorpusConfig(per_topic=per_topic, seed=0))
    config = EncoderConfig.create(dim=10240, seed=0)
    out = {}
    for mode in ("mv", "sv"):
        corpus = EncodedCorpus(records, config, mode)
        sweep = {}

        def best_threshold(attr: str, filler, true_ids: set) -> tuple[float, float]:
            dists = corpus.attribute_distances(attr, filler)
            truth = np.array([rid in true_ids for rid in corpus.ids])
            grid = np.arange(0.01, 0.51, 0.005)
            best = (0.0, 0.0)
            for t in grid:
                pred = dists < t
                tp = int((pred & truth).sum())
                if tp == 0:
                    continue
                precision = tp / int(pred.sum())
                recall = tp / int(truth.sum())
                f1 = 2 * precision * recall / (precision + recall)
                if f1 > best[1]:
                    best = (float(t), float(f1))
            return best

        lab = labels["records"]
        # language: one representative value
        lang = records[0].language
        t, f1 = best_threshold(
            "language", corpus.encoders.lexical(lang), {r for r, v in lab.items() if v["language"] == lang}
        )
        sweep["language"] = {"threshold": t, "f1": f1}
        loc = records[0].location
        t, f1 = best_threshold(
            "location", corpus.encoders.lexical(loc), {r for r, v in lab.items() if v["location"] == loc}
        )
        sweep["location"] = {"threshold": t, "f1": f1}
        onehot = np.array([1.0, 0.0, 0.0])
        t, f1 = best_threshold(
            "sentiment",
            corpus.encoders.sentiment(onehot),
            {r for r, v in lab.items() if v["sentiment_class"] == "negative"},
        )
        sweep["sentiment"] = {"threshold": t, "f1": f1}
        # text: exemplar query, on-topic set
        topic = labels["meta"]["topics"][0]
        seed_rec = max(
            (r for r in records if lab[r.id]["topic"] == topic),
            key=lambda r: float(
                r.text_embedding
                @ unit(np.mean([x.text_embedding for x in records if lab[x.id]["topic"] == topic], axis=0))
            ),
        )
        t, f1 = best_threshold(
            "text",
            corpus.encoders.text(seed_rec.text_embedding),
            {r for r, v in lab.items() if v["topic"] == topic},
        )
        sweep["text"] = {"threshold": t, "f1": f1}
        out[mode] = sweep
    return out


def nearest_centroid_oracle() -> float:
    """Topic recovery by brute-force nearest centroid on the clean geometry."""
    cfg = SyntheticCorpusConfig(
        topics=3, per_topic=500, separation=0.9, spread=0.05, blend_fraction=0.0, seed=13
    )
    records, labels = synth_corpus(cfg)
    from hvd.ingest import _topic_centroids

    centroids = _topic_centroids(cfg, Rng(cfg.seed).child("centroids"))
    names = labels["meta"]["topics"]
    correct = 0
    for rec in records:
        sims = centroids @ rec.text_embedding
        predicted = names[int(np.argmax(sims))]
        correct += predicted == labels["records"][rec.id]["topic"]
    return correct / len(records)


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="smaller sample sizes")
    args = parser.parse_args()
    pairs = 120 if args.quick else 500
    t0 = time.time()
    fixture = {
        "projection_monotonicity": projection_monotonicity(pairs),
        "projection_spearman": projection_spearman(pairs),
        "lexical_locality_spearman": lexical_locality(250 if args.quick else 1000),
        "fuzziness_f1": fuzziness_f1_sweep(per_topic=300 if args.quick else 1000),
        "nearest_centroid_accuracy": nearest_centroid_oracle(),
        "samples": {"projection_pairs": pairs},
    }
    FIXTURE_PATH.parent.mkdir(parents=True, exist_ok=True)
    FIXTURE_PATH.write_text(json.dumps(fixture, indent=2, sort_keys=True))
    print(json.dumps(fixture, indent=2, sort_keys=True))
    print(f"\nwrote {FIXTURE_PATH} in {time.time() - t0:.1f}s")


if __name__ == "__main__":
    main()
