"""HTTP service contract via the ASGI test client."""

import pytest
from fastapi.testclient import TestClient

from hvd.encoders import EncoderConfig
from hvd.service import create_app, parse_bucket, word_frequencies
from hvd.store import Store


@pytest.fixture(scope="module")
def service(tmp_path_factory, small_corpus):
    records, labels = small_corpus
    store = Store.create(
        tmp_path_factory.mktemp("svc") / "store", EncoderConfig.create(dim=1024, seed=5)
    )
    store.ingest(records)
    store.save_labels(labels)
    app = create_app(store)
    with TestClient(app) as client:
        yield client, records


class TestHealthAndConfig:
    def test_health(self, service):
        client, records = service
        body = client.get("/api/health").json()
        assert body["status"] == "ok"
        assert body["records"] == len(records)

    def test_config_shape(self, service):
        client, _ = service
        cfg = client.get("/api/config").json()
        assert cfg["dim"] == 1024
        assert set(cfg["modes"]) == {"mv", "sv"}
        assert "text" in cfg["default_fuzziness"]["mv"]
        assert "text" in cfg["default_fuzziness"]["sv"]
        assert cfg["time"]["mode"] == "level"
        assert cfg["registry_hash"]


class TestRecords:
    def test_get_record(self, service):
        client, records = service
        body = client.get(f"/api/records/{records[0].id}").json()
        assert body["id"] == records[0].id
        assert "text_embedding" not in body

    def test_missing_record_404(self, service):
        client, _ = service
        resp = client.get("/api/records/nope")
        assert resp.status_code == 404
        assert resp.json()["code"] == "not_found"


class TestRfi:
    def test_query_by_example_self_match(self, service):
        client, records = service
        resp = client.post(
            "/api/rfi",
            json={"constraints": {"text": records[7].id}, "fuzziness": {"text": 0.0}, "mode": "mv"},
        )
        assert resp.status_code == 200
        body = resp.json()
        ids = [m["id"] for m in body["matched"]]
        assert records[7].id in ids
        assert body["total_matched"] == len(ids)
        assert body["token"]

    def test_widening_fuzziness_never_shrinks(self, service):
        client, records = service
        sizes = []
        for fuzz in (0.1, 0.25, 0.4):
            body = client.post(
                "/api/rfi",
                json={
                    "constraints": {"text": records[7].id},
                    "fuzziness": {"text": fuzz},
                    "mode": "mv",
                },
            ).json()
            sizes.append(body["total_matched"])
        assert sizes == sorted(sizes)

    def test_added_constraint_never_grows(self, service):
        client, records = service
        base = client.post(
            "/api/rfi",
            json={"constraints": {"text": records[7].id}, "fuzziness": {"text": 0.3}, "mode": "mv"},
        ).json()
        narrowed = client.post(
            "/api/rfi",
            json={
                "constraints": {"text": records[7].id, "language": records[7].language},
                "fuzziness": {"text": 0.3},
                "mode": "mv",
            },
        ).json()
        assert narrowed["total_matched"] <= base["total_matched"]

    def test_all_vacuous_returns_store_size(self, service):
        client, records = service
        body = client.post(
            "/api/rfi",
            json={
                "constraints": {"language": records[0].language},
                "fuzziness": {"language": 1.0},
                "mode": "mv",
            },
        ).json()
        assert body["total_matched"] == len(records)

    def test_empty_constraints_rejected(self, service):
        client, _ = service
        resp = client.post("/api/rfi", json={"constraints": {}})
        assert resp.status_code == 400
        assert resp.json()["code"] == "invalid_rfi"

    def test_free_text_without_embedder_rejected(self, service):
        client, _ = service
        resp = client.post("/api/rfi", json={"constraints": {"text": "free text query"}})
        assert resp.status_code == 400
        assert "enrichment" in resp.json()["message"]

    def test_sv_mode(self, service):
        client, records = service
        body = client.post(
            "/api/rfi", json={"constraints": {"text": records[7].id}, "mode": "sv"}
        ).json()
        ids = [m["id"] for m in body["matched"]]
        assert records[7].id in ids


class TestAggregations:
    def run_rfi(self, client, records):
        return client.post(
            "/api/rfi",
            json={
                "constraints": {"language": records[0].language},
                "fuzziness": {"language": 0.0},
                "mode": "mv",
            },
        ).json()

    def test_volume_partition(self, service):
        client, records = service
        body = self.run_rfi(client, records)
        agg = client.get(
            "/api/aggregations", params={"token": body["token"], "kind": "volume", "bucket": "1w"}
        ).json()
        assert sum(p["count"] for p in agg["series"]) == body["total_matched"]

    def test_sentiment_series_probabilities(self, service):
        client, records = service
        body = self.run_rfi(client, records)
        agg = client.get(
            "/api/aggregations",
            params={"token": body["token"], "kind": "sentiment_over_time", "bucket": "1w"},
        ).json()
        assert agg["series"]
        for point in agg["series"]:
            total = point["negative"] + point["neutral"] + point["positive"]
            assert abs(total - 1.0) < 1e-6

    def test_word_frequencies_single_record(self, service):
        client, records = service
        from collections import Counter

        from hvd.service import TOKEN_RE, STOP_WORDS

        agg = client.get(
            "/api/aggregations",
            params={"ids": records[0].id, "kind": "word_frequencies"},
        ).json()
        expected = Counter(
            t
            for t in TOKEN_RE.findall(records[0].text.lower())
            if t not in STOP_WORDS and len(t) > 1
        )
        assert {e["token"]: e["count"] for e in agg["table"]} == dict(expected)

    def test_empty_match_empty_series(self, service):
        client, _ = service
        agg = client.get("/api/aggregations", params={"ids": "", "kind": "volume"}).json()
        assert agg["series"] == []

    def test_unknown_token_404(self, service):
        client, _ = service
        resp = client.get("/api/aggregations", params={"token": "mXXXX", "kind": "volume"})
        assert resp.status_code == 404

    def test_bad_bucket_rejected(self, service):
        client, records = service
        body = self.run_rfi(client, records)
        resp = client.get(
            "/api/aggregations",
            params={"token": body["token"], "kind": "volume", "bucket": "0d"},
        )
        assert resp.status_code == 400


class TestIngestEndpoint:
    def test_inline_ingest_and_idempotence(self, service):
        client, records = service
        payload = {
            "records": [
                {
                    "id": "http-new-1",
                    "text": "added over http",
                    "created_at": "2022-04-01T00:00:00Z",
                    "language": "en",
                    "text_embedding": list(records[0].text_embedding),
                }
            ]
        }
        first = client.post("/api/ingest", json=payload)
        assert first.status_code == 200
        assert first.json()["accepted"] == 1
        second = client.post("/api/ingest", json=payload)
        assert second.json()["accepted"] == 0
        assert second.json()["duplicates"] == 1

    def test_batch_atomicity_on_dimension_mismatch(self, service):
        client, records = service
        size_before = client.get("/api/health").json()["records"]
        payload = {
            "records": [
                {
                    "id": "atomic-good",
                    "text": "fine",
                    "created_at": "2022-04-01T00:00:00Z",
                    "text_embedding": list(records[0].text_embedding),
                },
                {
                    "id": "atomic-bad",
                    "text": "mismatched",
                    "created_at": "2022-04-01T00:00:00Z",
                    "text_embedding": [0.1, 0.2, 0.3],
                },
            ]
        }
        resp = client.post("/api/ingest", json=payload)
        assert resp.status_code == 422
        assert resp.json()["accepted"] == 0
        assert client.get("/api/health").json()["records"] == size_before
        assert client.get("/api/records/atomic-good").status_code == 404

    def test_malformed_record_reported(self, service):
        client, _ = service
        resp = client.post("/api/ingest", json={"records": [{"text": "no id"}]})
        assert resp.json()["parse_errors"]

    def test_requires_exactly_one_source(self, service):
        client, _ = service
        assert client.post("/api/ingest", json={}).status_code == 400


class TestApiKey:
    def test_ingest_guarded(self, tmp_path, small_corpus):
        records, _ = small_corpus
        store = Store.create(tmp_path / "guarded", EncoderConfig.create(dim=1024, seed=5))
        store.ingest(records[:5])
        app = create_app(store, api_key="sekrit")
        with TestClient(app) as client:
            resp = client.post("/api/ingest", json={"records": []})
            assert resp.status_code == 401
            ok = client.post("/api/ingest", json={"records": []}, headers={"x-api-key": "sekrit"})
            assert ok.status_code == 200
            # queries stay open
            assert client.get("/api/health").status_code == 200


class TestHelpers:
    def test_parse_bucket(self):
        assert parse_bucket("1d").total_seconds() == 86400
        assert parse_bucket("30m").total_seconds() == 1800
        with pytest.raises(ValueError):
            parse_bucket("0h")
        with pytest.raises(ValueError):
            parse_bucket("fortnight")

    def test_word_frequencies_top_limit(self, small_corpus):
        records, _ = small_corpus
        table = word_frequencies(records, top=5)
        assert len(table) == 5
        counts = [e["count"] for e in table]
        assert counts == sorted(counts, reverse=True)
