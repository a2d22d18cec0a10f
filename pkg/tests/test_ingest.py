"""Ingest: JSONL streaming, sidecars, enrichment boundary, synthetic corpus."""

import json

import httpx
import numpy as np
import pytest

from hvd.bsc import Rng
from hvd.ingest import (
    DEFAULT_LANGUAGES,
    DEFAULT_LOCATIONS,
    EnrichmentError,
    HttpEnrichmentClient,
    LineError,
    SyntheticCorpusConfig,
    _topic_centroids,
    attach_embeddings,
    enrich,
    load_labels,
    load_records,
    read_sidecar,
    save_corpus,
    synth_corpus,
    write_records,
    write_sidecar,
)
from hvd.records import Record


class TestLoadRecords:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        errors: list[LineError] = []
        assert list(load_records(path, errors)) == []
        assert errors == []

    def test_malformed_lines_reported_with_numbers(self, tmp_path):
        path = tmp_path / "mixed.jsonl"
        path.write_text(
            json.dumps({"id": "a", "text": "hi", "created_at": "2022-01-01T00:00:00Z"})
            + "\n"
            + json.dumps({"text": "missing id", "created_at": "2022-01-01T00:00:00Z"})
            + "\n"
            + "{not json\n"
            + json.dumps({"id": "b", "text": "ok", "created_at": "2022-01-02T00:00:00Z"})
            + "\n"
        )
        errors: list[LineError] = []
        records = list(load_records(path, errors))
        assert [r.id for r in records] == ["a", "b"]
        assert [e.line for e in errors] == [2, 3]
        assert "id" in errors[0].message

    def test_malformed_timestamp_reported(self, tmp_path):
        path = tmp_path / "ts.jsonl"
        path.write_text(json.dumps({"id": "a", "text": "x", "created_at": "not-a-time"}) + "\n")
        errors: list[LineError] = []
        assert list(load_records(path, errors)) == []
        assert len(errors) == 1

    def test_write_read_roundtrip(self, tmp_path, small_corpus):
        records, _ = small_corpus
        path = tmp_path / "c.jsonl"
        write_records(path, records[:20])
        again = list(load_records(path))
        assert [r.id for r in again] == [r.id for r in records[:20]]
        assert np.allclose(again[0].text_embedding, records[0].text_embedding)


class TestSidecar:
    def test_roundtrip(self, tmp_path):
        gen = np.random.default_rng(0)
        table = {"a": gen.normal(size=16), "#tag": gen.normal(size=16)}
        path = tmp_path / "emb.bin"
        write_sidecar(path, table, 16)
        assert path.read_bytes()[:4] == b"EMBF"
        loaded = read_sidecar(path)
        assert set(loaded) == {"a", "#tag"}
        assert np.allclose(loaded["a"], table["a"], atol=1e-6)

    def test_attach_by_id_and_tag(self, tmp_path):
        gen = np.random.default_rng(1)
        sidecar = {
            "r1": gen.normal(size=8),
            "#news": gen.normal(size=8),
            "#war": gen.normal(size=8),
        }
        rec = Record.from_json_dict(
            {"id": "r1", "text": "x", "created_at": "2022-01-01T00:00:00Z", "hashtags": ["news", "war"]}
        )
        out = list(attach_embeddings([rec], sidecar))[0]
        assert np.allclose(out.text_embedding, sidecar["r1"])
        assert len(out.hashtag_embeddings) == 2

    def test_inline_precedence(self):
        inline = np.ones(4)
        rec = Record.from_json_dict(
            {
                "id": "r1",
                "text": "x",
                "created_at": "2022-01-01T00:00:00Z",
                "text_embedding": inline.tolist(),
            }
        )
        out = list(attach_embeddings([rec], {"r1": np.zeros(4)}))[0]
        assert np.allclose(out.text_embedding, inline)


class FakeClient:
    def __init__(self, dim=16):
        self.dim = dim

    def embed(self, text):
        gen = np.random.default_rng(abs(hash(text)) % 2**32)
        v = gen.normal(size=self.dim)
        return v / np.linalg.norm(v)

    def sentiment(self, text):
        return [0.2, 0.3, 0.5]

    def locate(self, text):
        return "kyiv" if "kyiv" in text else None


class TestEnrich:
    def base_record(self, **overrides):
        fields = dict(id="r1", text="report from kyiv", created_at="2022-01-01T00:00:00Z")
        fields.update(overrides)
        return Record.from_json_dict(fields)

    def test_fills_missing_fields(self):
        rec = enrich(self.base_record(hashtags=["war"]), FakeClient())
        assert rec.text_embedding is not None
        assert len(rec.hashtag_embeddings) == 1
        assert rec.sentiment == [0.2, 0.3, 0.5]
        assert rec.location == "kyiv"
        assert not rec.unenriched

    def test_never_overwrites(self):
        rec = self.base_record(sentiment=[1.0, 0.0, 0.0], location="london")
        out = enrich(rec, FakeClient())
        assert out.sentiment == [1.0, 0.0, 0.0]
        assert out.location == "london"

    def test_no_location_found_stays_absent(self):
        out = enrich(self.base_record(text="nothing here"), FakeClient())
        assert out.location is None

    def test_bad_sentiment_shape_raises(self):
        class BadClient(FakeClient):
            def sentiment(self, text):
                return [0.5, 0.5]

        with pytest.raises(ValueError, match="3 probabilities"):
            enrich(self.base_record(), BadClient())

    def test_unavailable_client_flags_record(self):
        class DownClient(FakeClient):
            def embed(self, text):
                raise EnrichmentError("connection refused")

        out = enrich(self.base_record(), DownClient())
        assert out.unenriched
        assert out.text_embedding is None


class TestHttpClient:
    def make_client(self, handler):
        return HttpEnrichmentClient("http://enrich.test", transport=httpx.MockTransport(handler))

    def test_contract(self):
        def handler(request: httpx.Request) -> httpx.Response:
            body = json.loads(request.content)
            assert "text" in body
            if request.url.path == "/embed":
                return httpx.Response(200, json={"vector": [0.1] * 8})
            if request.url.path == "/sentiment":
                return httpx.Response(200, json={"probs": [0.1, 0.2, 0.7]})
            if request.url.path == "/ner-location":
                return httpx.Response(200, json={"location": None})
            return httpx.Response(404)

        client = self.make_client(handler)
        assert client.embed("hello").shape == (8,)
        assert client.sentiment("hello") == [0.1, 0.2, 0.7]
        assert client.locate("hello") is None

    def test_http_error_raises_enrichment_error(self):
        client = self.make_client(lambda request: httpx.Response(503))
        with pytest.raises(EnrichmentError):
            client.embed("hello")

    def test_invalid_shapes_raise_value_error(self):
        client = self.make_client(
            lambda request: httpx.Response(200, json={"vector": "not-a-list", "probs": [1], "location": 5})
        )
        with pytest.raises(ValueError):
            client.embed("x")
        with pytest.raises(ValueError):
            client.sentiment("x")
        with pytest.raises(ValueError):
            client.locate("x")


class TestSynthCorpus:
    def test_deterministic(self):
        cfg = SyntheticCorpusConfig(per_topic=30, seed=5)
        r1, l1 = synth_corpus(cfg)
        r2, l2 = synth_corpus(cfg)
        assert [x.id for x in r1] == [x.id for x in r2]
        assert np.array_equal(r1[7].text_embedding, r2[7].text_embedding)
        assert l1 == l2

    def test_single_topic_uniform_labels(self):
        records, labels = synth_corpus(SyntheticCorpusConfig(topics=1, per_topic=20, seed=1))
        assert {labels["records"][r.id]["topic"] for r in records} == {"russia-ukraine"}

    def test_labels_cover_required_fields(self, small_corpus):
        records, labels = small_corpus
        lab = labels["records"][records[0].id]
        assert {"topic", "language", "location", "sentiment_class", "window64"} <= set(lab)
        assert labels["records"].keys() == {r.id for r in records}

    def test_sentiment_class_is_argmax(self, small_corpus):
        records, labels = small_corpus
        classes = ("negative", "neutral", "positive")
        for rec in records[:50]:
            assert labels["records"][rec.id]["sentiment_class"] == classes[
                int(np.argmax(rec.sentiment))
            ]

    def test_nearest_centroid_oracle(self, oracles):
        # clean geometry (no blends): brute-force nearest centroid recovers topics
        assert oracles["nearest_centroid_accuracy"] >= 0.99
        cfg = SyntheticCorpusConfig(
            topics=3, per_topic=50, separation=0.9, spread=0.05, blend_fraction=0.0, seed=13
        )
        records, labels = synth_corpus(cfg)
        centroids = _topic_centroids(cfg, Rng(cfg.seed).child("centroids"))
        names = labels["meta"]["topics"]
        hits = sum(
            names[int(np.argmax(centroids @ r.text_embedding))]
            == labels["records"][r.id]["topic"]
            for r in records
        )
        assert hits / len(records) >= 0.99

    def test_centroid_separation_honored(self):
        cfg = SyntheticCorpusConfig(per_topic=10, separation=0.7, spread=0.2, seed=3)
        centroids = _topic_centroids(cfg, Rng(cfg.seed).child("centroids"))
        for i in range(3):
            assert abs(np.linalg.norm(centroids[i]) - 1.0) < 1e-9
            for j in range(i + 1, 3):
                assert abs((1.0 - centroids[i] @ centroids[j]) - 0.7) < 1e-9

    def test_infeasible_geometry_rejected(self):
        with pytest.raises(ValueError):
            SyntheticCorpusConfig(topics=20, per_topic=5, embedding_dim=16)
        with pytest.raises(ValueError):
            SyntheticCorpusConfig(separation=0.2, spread=0.3)

    def test_default_value_sets(self, small_corpus):
        records, _ = small_corpus
        assert {r.language for r in records} <= set(DEFAULT_LANGUAGES)
        assert {r.location for r in records} <= set(DEFAULT_LOCATIONS)

    def test_save_and_load_labels(self, tmp_path, small_corpus):
        records, labels = small_corpus
        out = tmp_path / "corpus.jsonl"
        save_corpus(records[:10], labels, out)
        assert load_labels(out)["meta"]["topics"] == labels["meta"]["topics"]
        assert len(list(load_records(out))) == 10
