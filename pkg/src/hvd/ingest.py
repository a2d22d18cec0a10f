"""Record loading, enrichment boundary, and synthetic corpus generation.

Records arrive as JSON lines.  Embeddings arrive inline, via a binary
sidecar file keyed by record id (hashtag vectors under "#tag" keys), or from
an enrichment service over HTTP; precedence is inline > sidecar > client.
Model execution stays outside the process.

The synthetic corpus generator replaces the unavailable tweet collection: it
plants unit-norm topic centroids at a configured pairwise cosine separation,
scatters per-record embeddings around them, and emits ground-truth labels
for every record so the evaluation harness can score matching accuracy
without human labelling.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Iterator, Protocol

import numpy as np

import httpx

from hvd.bsc import Rng
from hvd.encoders import format_utc
from hvd.records import Record

__all__ = [
    "LineError",
    "load_records",
    "write_records",
    "read_sidecar",
    "write_sidecar",
    "attach_embeddings",
    "EnrichmentClient",
    "EnrichmentError",
    "HttpEnrichmentClient",
    "enrich",
    "SyntheticCorpusConfig",
    "synth_corpus",
    "save_corpus",
    "load_labels",
]

SIDECAR_MAGIC = b"EMBF"


@dataclass
class LineError:
    line: int
    message: str


def load_records(path: str | Path, errors: list[LineError] | None = None) -> Iterator[Record]:
    """Stream records from a JSON-lines file with bounded memory.

    Malformed lines are reported into `errors` with their line number and
    skipped; the stream continues.
    """
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                yield Record.from_json_dict(raw)
            except (ValueError, TypeError, KeyError) as exc:
                if errors is not None:
                    errors.append(LineError(lineno, str(exc)))


def write_records(path: str | Path, records: Iterable[Record], include_embeddings: bool = True) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json_dict(include_embeddings=include_embeddings)))
            fh.write("\n")
            n += 1
    return n


def write_sidecar(path: str | Path, embeddings: dict[str, np.ndarray], dim: int) -> None:
    """Binary sidecar: magic, u32 dim, then (u16-prefixed id, dim LE f32) entries."""
    with open(path, "wb") as fh:
        fh.write(SIDECAR_MAGIC)
        fh.write(struct.pack("<I", dim))
        for key, vec in embeddings.items():
            vec = np.asarray(vec, dtype="<f4")
            if vec.shape != (dim,):
                raise ValueError(f"embedding for {key!r} has shape {vec.shape}, expected ({dim},)")
            raw = key.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(vec.tobytes())


def read_sidecar(path: str | Path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:4] != SIDECAR_MAGIC:
        raise ValueError("not an EMBF sidecar file")
    (dim,) = struct.unpack_from("<I", data, 4)
    pos = 8
    out: dict[str, np.ndarray] = {}
    while pos < len(data):
        (klen,) = struct.unpack_from("<H", data, pos)
        pos += 2
        key = data[pos : pos + klen].decode("utf-8")
        pos += klen
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=pos).astype(np.float64)
        pos += dim * 4
        out[key] = vec
    return out


def attach_embeddings(records: Iterable[Record], sidecar: dict[str, np.ndarray]) -> Iterator[Record]:
    """Join sidecar embeddings onto records by id; hashtag vectors by "#tag" key.

    Inline embeddings take precedence and are never overwritten.
    """
    for rec in records:
        if rec.text_embedding is None and rec.id in sidecar:
            rec.text_embedding = sidecar[rec.id]
        if rec.hashtags and rec.hashtag_embeddings is None:
            tags = [sidecar.get(f"#{t}") for t in rec.hashtags]
            if all(t is not None for t in tags):
                rec.hashtag_embeddings = tags  # type: ignore[assignment]
        yield rec


class EnrichmentError(RuntimeError):
    """The enrichment service is unreachable or timed out."""


class EnrichmentClient(Protocol):
    def embed(self, text: str) -> np.ndarray: ...

    def sentiment(self, text: str) -> list[float]: ...

    def locate(self, text: str) -> str | None: ...


class HttpEnrichmentClient:
    """HTTP boundary to the external embedding/sentiment/NER models."""

    def __init__(self, base_url: str, timeout: float = 10.0, transport=None):
        self._client = httpx.Client(base_url=base_url, timeout=timeout, transport=transport)

    def _post(self, endpoint: str, text: str) -> dict:
        try:
            resp = self._client.post(endpoint, json={"text": text})
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise EnrichmentError(f"enrichment call {endpoint} failed: {exc}") from exc
        return resp.json()

    def embed(self, text: str) -> np.ndarray:
        payload = self._post("/embed", text)
        vector = payload.get("vector")
        if not isinstance(vector, list) or not vector:
            raise ValueError(f"embed returned invalid vector: {payload!r}")
        return np.asarray(vector, dtype=np.float64)

    def sentiment(self, text: str) -> list[float]:
        payload = self._post("/sentiment", text)
        probs = payload.get("probs")
        if not isinstance(probs, list) or len(probs) != 3:
            raise ValueError(f"sentiment returned invalid probs: {payload!r}")
        return [float(p) for p in probs]

    def locate(self, text: str) -> str | None:
        payload = self._post("/ner-location", text)
        location = payload.get("location")
        if location is not None and not isinstance(location, str):
            raise ValueError(f"ner-location returned invalid location: {payload!r}")
        return location

    def close(self) -> None:
        self._client.close()


def enrich(rec: Record, client: EnrichmentClient) -> Record:
    """Fill missing ML-derived fields; supplied values are never overwritten.

    An unavailable client flags the record `unenriched` and passes it
    through; a client returning malformed shapes raises.
    """
    if not rec.text:
        raise ValueError(f"record {rec.id}: cannot enrich empty text")
    try:
        if rec.text_embedding is None:
            vec = client.embed(rec.text)
            if np.asarray(vec).ndim != 1 or len(vec) == 0:
                raise ValueError(f"record {rec.id}: embed returned invalid shape")
            rec.text_embedding = np.asarray(vec, dtype=np.float64)
        if rec.hashtags and rec.hashtag_embeddings is None:
            rec.hashtag_embeddings = [
                np.asarray(client.embed(tag), dtype=np.float64) for tag in rec.hashtags
            ]
        if rec.sentiment is None:
            probs = client.sentiment(rec.text)
            if len(probs) != 3:
                raise ValueError(f"record {rec.id}: sentiment must have 3 probabilities")
            rec.sentiment = probs
        if rec.location is None:
            rec.location = client.locate(rec.text)
    except EnrichmentError:
        rec.unenriched = True
    return rec


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------

DEFAULT_TOPICS = {
    "russia-ukraine": {
        "tags": ["standwithukraine", "kherson", "donetsk", "stoprussia", "zaporizhzhia"],
        "words": [
            "ukraine", "russia", "frontline", "sanctions", "kyiv", "convoy",
            "offensive", "ceasefire", "artillery", "refugees", "donbas", "nato",
        ],
    },
    "stocks": {
        "tags": ["stocks", "jobs", "earnings", "investing", "markets"],
        "words": [
            "stocks", "market", "earnings", "rally", "inflation", "shares",
            "portfolio", "dividend", "futures", "selloff", "nasdaq", "bonds",
        ],
    },
    "warthunder": {
        "tags": ["warthunder", "gaming", "dcsworld", "acecombat", "tanks"],
        "words": [
            "warthunder", "dogfight", "tank", "squadron", "update", "grind",
            "stream", "cockpit", "mission", "loadout", "hangar", "replay",
        ],
    },
}

# Pairwise-distant lexical values: chosen so the bundled character vectors of
# any two values stay far apart, which the recall experiments rely on.
DEFAULT_LANGUAGES = ["en", "fr", "pl", "cs"]
DEFAULT_LOCATIONS = ["kyiv", "london", "warsaw", "texas", "geneva"]

FILLER_WORDS = ["today", "breaking", "watch", "live", "thread", "update", "news", "report"]


@dataclass
class SyntheticCorpusConfig:
    """Deterministic labeled corpus: clustered embeddings plus metadata."""

    topics: int = 3
    per_topic: int = 3000
    embedding_dim: int = 768
    separation: float = 0.55  # pairwise cosine distance between centroids
    spread: float = 0.35  # norm of the embedding noise around a centroid
    blend_fraction: float = 0.12  # share of records leaning toward a partner topic;
    blend_lo: float = 0.58  # mixing weight range: blended records keep their source-topic
    blend_hi: float = 0.76  # label but sit semantically nearer the partner topic
    languages: list[str] = field(default_factory=lambda: list(DEFAULT_LANGUAGES))
    locations: list[str] = field(default_factory=lambda: list(DEFAULT_LOCATIONS))
    time_start: datetime = datetime(2022, 3, 1, tzinfo=timezone.utc)
    time_end: datetime = datetime(2022, 5, 30, tzinfo=timezone.utc)
    seed: int = 0
    sentiment_on: float = 6.0  # Dirichlet weight of the intended class
    sentiment_off: float = 1.0  # Dirichlet weight of the other classes

    def __post_init__(self):
        if self.topics < 1 or self.per_topic < 1:
            raise ValueError("need at least one topic and one record per topic")
        if not 0.0 < self.separation <= 1.0:
            raise ValueError(f"separation must be in (0, 1], got {self.separation}")
        if self.spread <= 0:
            raise ValueError("spread must be positive")
        if self.separation <= self.spread:
            raise ValueError("separation must exceed spread")
        if not 0.0 <= self.blend_fraction < 0.5:
            raise ValueError("blend_fraction must be in [0, 0.5)")
        if not 0.0 <= self.blend_lo <= self.blend_hi < 1.0:
            raise ValueError("need 0 <= blend_lo <= blend_hi < 1")
        if self.topics + 1 > self.embedding_dim:
            raise ValueError(
                f"{self.topics} topics need embedding dimension > {self.topics}, got {self.embedding_dim}"
            )
        if self.time_start >= self.time_end:
            raise ValueError("time_start must precede time_end")


def _topic_centroids(cfg: SyntheticCorpusConfig, rng: Rng) -> np.ndarray:
    """Unit centroids with pairwise cosine similarity 1 - separation."""
    gen = rng.generator
    basis = np.linalg.qr(gen.normal(size=(cfg.embedding_dim, cfg.topics + 1)))[0].T
    shared = basis[cfg.topics]
    rho = 1.0 - cfg.separation
    return np.sqrt(1.0 - rho) * basis[: cfg.topics] + np.sqrt(rho) * shared


def _unit_noise(gen: np.random.Generator, dim: int) -> np.ndarray:
    g = gen.normal(size=dim)
    return g / np.linalg.norm(g)


def _jitter(centroid: np.ndarray, scale: float, gen: np.random.Generator) -> np.ndarray:
    x = centroid + scale * _unit_noise(gen, centroid.shape[0])
    return x / np.linalg.norm(x)


def synth_corpus(cfg: SyntheticCorpusConfig) -> tuple[list[Record], dict]:
    """Generate (records, labels); identical output for identical config."""
    rng = Rng(cfg.seed)
    centroids = _topic_centroids(cfg, rng.child("centroids"))
    topic_names = list(DEFAULT_TOPICS)[: cfg.topics]
    topic_names += [f"topic-{i}" for i in range(len(topic_names), cfg.topics)]

    tag_table: dict[str, np.ndarray] = {}
    topic_tags: list[list[str]] = []
    topic_words: list[list[str]] = []
    tag_gen = rng.child("tags").generator
    for t, name in enumerate(topic_names):
        spec = DEFAULT_TOPICS.get(name)
        tags = spec["tags"] if spec else [f"{name}tag{j}" for j in range(5)]
        words = spec["words"] if spec else [f"{name}word{j}" for j in range(12)]
        topic_tags.append(tags)
        topic_words.append(words)
        for tag in tags:
            tag_table[tag] = _jitter(centroids[t], cfg.spread, tag_gen)

    gen = rng.child("records").generator
    span = (cfg.time_end - cfg.time_start).total_seconds()
    records: list[Record] = []
    labels: dict[str, dict] = {}
    counter = 0
    for t in range(cfg.topics):
        partner = (t + 1) % cfg.topics
        for _ in range(cfg.per_topic):
            rid = f"t{counter:06d}"
            counter += 1
            # a small slice of each topic leans toward its partner topic,
            # mirroring the cross-topic content overlap of real feeds
            if cfg.topics > 1 and gen.uniform() < cfg.blend_fraction:
                lam = gen.uniform(cfg.blend_lo, cfg.blend_hi)
                base = (1.0 - lam) * centroids[t] + lam * centroids[partner]
                embedding = _jitter(base / np.linalg.norm(base), cfg.spread, gen)
            else:
                embedding = _jitter(centroids[t], cfg.spread, gen)
            n_tags = int(gen.integers(1, 4))
            tags = [topic_tags[t][i] for i in sorted(gen.choice(len(topic_tags[t]), size=n_tags, replace=False))]
            words = list(gen.choice(topic_words[t], size=int(gen.integers(5, 10))))
            words += list(gen.choice(FILLER_WORDS, size=int(gen.integers(1, 4))))
            text = " ".join(words) + " " + " ".join(f"#{tag}" for tag in tags)
            language = cfg.languages[int(gen.integers(len(cfg.languages)))]
            location = cfg.locations[int(gen.integers(len(cfg.locations)))]
            alpha = np.full(3, cfg.sentiment_off)
            alpha[int(gen.integers(3))] = cfg.sentiment_on
            probs = gen.dirichlet(alpha)
            sentiment_class = ("negative", "neutral", "positive")[int(np.argmax(probs))]
            created = cfg.time_start + timedelta(seconds=float(gen.uniform(0, span)))
            records.append(
                Record(
                    id=rid,
                    text=text,
                    created_at=created,
                    hashtags=tags,
                    language=language,
                    location=location,
                    sentiment=[float(p) for p in probs],
                    text_embedding=embedding,
                    hashtag_embeddings=[tag_table[tag] for tag in tags],
                )
            )
            window64 = min(63, int((created - cfg.time_start).total_seconds() / span * 64))
            labels[rid] = {
                "topic": topic_names[t],
                "language": language,
                "location": location,
                "sentiment_class": sentiment_class,
                "window64": window64,
            }

    meta = {
        "topics": topic_names,
        "separation": cfg.separation,
        "spread": cfg.spread,
        "seed": cfg.seed,
        "embedding_dim": cfg.embedding_dim,
        "time_start": format_utc(cfg.time_start),
        "time_end": format_utc(cfg.time_end),
    }
    return records, {"meta": meta, "records": labels}


def save_corpus(records: list[Record], labels: dict, out_path: str | Path) -> None:
    """Write corpus JSONL plus a parallel <out>.labels.json ground-truth file."""
    out_path = Path(out_path)
    write_records(out_path, records)
    labels_path = out_path.with_suffix(out_path.suffix + ".labels.json")
    labels_path.write_text(json.dumps(labels, indent=2, sort_keys=True))


def load_labels(corpus_path: str | Path) -> dict:
    corpus_path = Path(corpus_path)
    labels_path = corpus_path.with_suffix(corpus_path.suffix + ".labels.json")
    return json.loads(labels_path.read_text())
