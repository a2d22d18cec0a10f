"""HTTP service for RFI queries, record retrieval, ingest, and aggregations.

JSON API consumed by the analyst portal:

    POST /api/rfi            run a request-for-information, returns matches + token
    GET  /api/records/{id}   stored record (metadata, no embeddings)
    POST /api/ingest         append records (path or inline payload)
    GET  /api/aggregations   word frequencies / volume / sentiment over time
    GET  /api/config         encoding and matching configuration
    GET  /api/health         liveness

Errors are {code, message, detail} with conventional 4xx/5xx mapping.  An
optional static API key guards mutating endpoints.  Aggregations are
computed from stored record fields, not decoded from hypervectors: decoding
is lossy by design, the raw records are available.
"""

from __future__ import annotations

import re
from collections import Counter, OrderedDict
from datetime import datetime, timedelta, timezone
from typing import Sequence

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from hvd.encoders import format_utc
from hvd.ingest import EnrichmentClient, LineError, load_records
from hvd.records import Record
from hvd.store import DEFAULT_FUZZINESS_MV, DEFAULT_FUZZINESS_SV, Rfi, Store, StoreMismatch

__all__ = ["create_app", "STOP_WORDS"]

STOP_WORDS = frozenset(
    """a an and are as at be but by for from has have if in into is it its no not
    of on or such that the their then there these they this to was were will with
    you your we our i me my so do does did just very too about over under after
    before while than can could should would""".split()
)

TOKEN_RE = re.compile(r"[#@]?[\w'-]+")

SENTIMENT_KEYS = ("negative", "neutral", "positive")


class _TokenTable:
    """Bounded token -> matched-ids map so aggregations can reference a match."""

    def __init__(self, capacity: int = 256):
        self.capacity = capacity
        self._entries: OrderedDict[str, list[str]] = OrderedDict()
        self._counter = 0

    def put(self, ids: list[str]) -> str:
        self._counter += 1
        token = f"m{self._counter:08d}"
        self._entries[token] = ids
        while len(self._entries) > self.capacity:
            self._entries.popitem(last=False)
        return token

    def get(self, token: str) -> list[str]:
        try:
            return self._entries[token]
        except KeyError:
            raise KeyError(f"unknown match token {token!r}") from None


def parse_bucket(value: str) -> timedelta:
    """Bucket sizes like '1d', '6h', '30m', '45s', '1w'."""
    m = re.fullmatch(r"(\d+)([smhdw])", value.strip())
    if not m:
        raise ValueError(f"cannot parse bucket {value!r} (use e.g. 1d, 6h, 30m)")
    n = int(m.group(1))
    if n == 0:
        raise ValueError("zero-width bucket")
    unit = {"s": 1, "m": 60, "h": 3600, "d": 86400, "w": 604800}[m.group(2)]
    return timedelta(seconds=n * unit)


def word_frequencies(records: Sequence[Record], top: int = 100) -> list[dict]:
    """Case-folded, stop-word-filtered token counts over the records' texts."""
    counts: Counter[str] = Counter()
    for rec in records:
        for token in TOKEN_RE.findall(rec.text.lower()):
            if token not in STOP_WORDS and len(token) > 1:
                counts[token] += 1
    return [{"token": t, "count": c} for t, c in counts.most_common(top)]


def _bucket_floor(ts: datetime, bucket: timedelta) -> datetime:
    epoch = datetime(1970, 1, 1, tzinfo=timezone.utc)
    steps = int((ts - epoch).total_seconds() // bucket.total_seconds())
    return epoch + steps * bucket


def volume_series(records: Sequence[Record], bucket: timedelta) -> list[dict]:
    counts: Counter[datetime] = Counter()
    for rec in records:
        counts[_bucket_floor(rec.created_at, bucket)] += 1
    return [
        {"bucket": format_utc(b), "count": counts[b]} for b in sorted(counts)
    ]


def sentiment_series(records: Sequence[Record], bucket: timedelta) -> list[dict]:
    """Mean stored sentiment probabilities per time bucket."""
    sums: dict[datetime, list[float]] = {}
    counts: Counter[datetime] = Counter()
    for rec in records:
        if rec.sentiment is None:
            continue
        b = _bucket_floor(rec.created_at, bucket)
        acc = sums.setdefault(b, [0.0, 0.0, 0.0])
        for i, p in enumerate(rec.sentiment):
            acc[i] += p
        counts[b] += 1
    out = []
    for b in sorted(sums):
        n = counts[b]
        out.append(
            {
                "bucket": format_utc(b),
                "count": n,
                **{key: sums[b][i] / n for i, key in enumerate(SENTIMENT_KEYS)},
            }
        )
    return out


def create_app(
    store: Store,
    enrichment: EnrichmentClient | None = None,
    api_key: str | None = None,
    ui_dir: str | None = None,
) -> FastAPI:
    app = FastAPI(title="hvd", docs_url=None, redoc_url=None)
    tokens = _TokenTable()

    def error(status: int, code: str, message: str, detail: str = "") -> HTTPException:
        return HTTPException(status, {"code": code, "message": message, "detail": detail})

    @app.exception_handler(HTTPException)
    async def _on_http_error(request: Request, exc: HTTPException):
        body = exc.detail if isinstance(exc.detail, dict) else {
            "code": "error", "message": str(exc.detail), "detail": "",
        }
        return JSONResponse(status_code=exc.status_code, content=body)

    def check_key(request: Request) -> None:
        if api_key is not None and request.headers.get("x-api-key") != api_key:
            raise error(401, "unauthorized", "missing or invalid API key")

    @app.get("/api/health")
    def health():
        return {"status": "ok", "records": store.size}

    @app.get("/api/config")
    def config():
        return {
            "dim": store.config.dim,
            "embed_dim": store.config.embed_dim,
            "modes": list(store.modes),
            "records": store.size,
            "attributes": sorted(
                set(store.snapshot.mv_indexes) | set(DEFAULT_FUZZINESS_MV)
                if "mv" in store.modes
                else set(DEFAULT_FUZZINESS_MV)
            ),
            "default_fuzziness": {"mv": DEFAULT_FUZZINESS_MV, "sv": DEFAULT_FUZZINESS_SV},
            "time": {
                "mode": store.config.time.mode,
                "range_start": format_utc(store.config.time.range_start),
                "range_end": format_utc(store.config.time.range_end),
                "levels": store.config.time.levels,
                "components": list(store.config.time.components),
            },
            "registry_hash": store.roles.version_hash(),
        }

    @app.get("/api/records/{record_id}")
    def get_record(record_id: str):
        try:
            rec = store.record(record_id)
        except KeyError as exc:
            raise error(404, "not_found", str(exc))
        return rec.to_json_dict(include_embeddings=False)

    @app.post("/api/rfi")
    def post_rfi(payload: dict):
        try:
            rfi = Rfi(
                constraints=payload.get("constraints") or {},
                fuzziness=dict(payload.get("fuzziness") or {}),
                mode=payload.get("mode", store.modes[0]),
                k=payload.get("k"),
            )
        except (ValueError, TypeError) as exc:
            raise error(400, "invalid_rfi", str(exc))
        try:
            result, timing = store.match_rfi(rfi, enrichment)
        except (ValueError, KeyError) as exc:
            raise error(400, "query_failed", str(exc))
        except StoreMismatch as exc:
            raise error(409, "store_mismatch", str(exc))
        token = tokens.put(result.matched)
        return {
            "token": token,
            "mode": rfi.mode,
            "total_matched": len(result.matched),
            "matched": [
                {"id": rid, "distances": result.distances[rid]} for rid in result.matched
            ],
            "candidates_per_attribute": result.candidates_per_attribute,
            "timing": timing,
        }

    @app.post("/api/ingest")
    def post_ingest(payload: dict, request: Request):
        check_key(request)
        raw_records = payload.get("records")
        path = payload.get("path")
        if (raw_records is None) == (path is None):
            raise error(400, "invalid_ingest", "provide exactly one of 'records' or 'path'")
        parse_errors: list[str] = []
        records: list[Record] = []
        if path is not None:
            line_errors: list[LineError] = []
            try:
                records = list(load_records(path, line_errors))
            except OSError as exc:
                raise error(400, "invalid_ingest", f"cannot read {path!r}", str(exc))
            parse_errors = [f"line {e.line}: {e.message}" for e in line_errors]
        else:
            for i, raw in enumerate(raw_records):
                try:
                    records.append(Record.from_json_dict(raw))
                except (ValueError, TypeError, KeyError) as exc:
                    parse_errors.append(f"record {i}: {exc}")
        report = store.ingest(records)
        body = report.to_dict()
        body["parse_errors"] = parse_errors
        status = 200 if report.rejected == 0 else 422
        return JSONResponse(status_code=status, content=body)

    @app.get("/api/aggregations")
    def aggregations(kind: str, token: str | None = None, ids: str | None = None, bucket: str = "1d"):
        if (token is None) == (ids is None):
            raise error(400, "invalid_aggregation", "provide exactly one of 'token' or 'ids'")
        if token is not None:
            try:
                matched_ids = tokens.get(token)
            except KeyError as exc:
                raise error(404, "unknown_token", str(exc))
        else:
            matched_ids = [i for i in ids.split(",") if i]
        try:
            records = [store.record(rid) for rid in matched_ids]
        except KeyError as exc:
            raise error(404, "not_found", str(exc))
        if kind == "word_frequencies":
            return {"kind": kind, "table": word_frequencies(records)}
        try:
            width = parse_bucket(bucket)
        except ValueError as exc:
            raise error(400, "invalid_bucket", str(exc))
        if kind == "volume":
            return {"kind": kind, "bucket": bucket, "series": volume_series(records, width)}
        if kind == "sentiment_over_time":
            return {"kind": kind, "bucket": bucket, "series": sentiment_series(records, width)}
        raise error(400, "invalid_aggregation", f"unknown kind {kind!r}")

    if ui_dir is not None:
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
