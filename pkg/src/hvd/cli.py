"""Command-line front door: synth, ingest, index, query, serve, eval.

Typical pipeline:

    hvd synth --topics 3 --per-topic 3000 --seed 11 --out corpus.jsonl
    hvd ingest --input corpus.jsonl --store ./store
    hvd index --dim 10240 --mode mv --seed 7 --store ./store
    hvd index --dim 10240 --mode sv --seed 7 --store ./store
    hvd query --store ./store --example t000005 --fuzz text=0.3
    hvd serve --store ./store --addr 127.0.0.1:8080
    hvd eval all --store ./store --report report.json

Exit codes: 0 ok, 1 usage, 2 data error, 3 store/config mismatch.
HVD_STORE provides the default --store path.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from hvd.encoders import EncoderConfig, TimeConfig, parse_utc
from hvd.evaluation import run_all
from hvd.ingest import (
    HttpEnrichmentClient,
    LineError,
    SyntheticCorpusConfig,
    attach_embeddings,
    load_labels,
    load_records,
    read_sidecar,
    save_corpus,
    synth_corpus,
)
from hvd.store import LABELS_NAME, MANIFEST_NAME, RECORDS_NAME, Rfi, Store, StoreMismatch

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_MISMATCH = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; usage errors are 1 here
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hvd", description="hyperdimensional data-discovery engine")
    sub = p.add_subparsers(dest="command", required=True)
    store_default = os.environ.get("HVD_STORE")

    sp = sub.add_parser("synth", help="generate a labeled synthetic corpus")
    sp.add_argument("--topics", type=int, default=3)
    sp.add_argument("--per-topic", type=int, default=3000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--embedding-dim", type=int, default=768)
    sp.add_argument("--out", required=True)

    ip = sub.add_parser("ingest", help="append records to a store directory")
    ip.add_argument("--input", required=True)
    ip.add_argument("--embeddings", help="EMBF sidecar file with embeddings by id")
    ip.add_argument("--store", default=store_default, required=store_default is None)

    xp = sub.add_parser("index", help="create the encoder config and build indexes")
    xp.add_argument("--dim", type=int, choices=(1024, 10240), default=10240)
    xp.add_argument("--mode", choices=("mv", "sv"), required=True)
    xp.add_argument("--seed", type=int, default=0)
    xp.add_argument("--store", default=store_default, required=store_default is None)
    xp.add_argument("--time-start", help="level-encoding range start (ISO-8601)")
    xp.add_argument("--time-end", help="level-encoding range end (ISO-8601)")
    xp.add_argument("--time-mode", choices=("level", "components"), default="level")

    qp = sub.add_parser("query", help="run an RFI against a store")
    qp.add_argument("--store", default=store_default, required=store_default is None)
    qp.add_argument("--text", help="free text (needs --enrich-url) or example record id")
    qp.add_argument("--example", help="query-by-example record id")
    qp.add_argument("--language")
    qp.add_argument("--location")
    qp.add_argument("--hashtag", action="append", default=[])
    qp.add_argument("--sentiment", choices=("negative", "neutral", "positive"))
    qp.add_argument("--time-range", help="START,END ISO-8601 pair")
    qp.add_argument("--fuzz", action="append", default=[], metavar="ATTR=X")
    qp.add_argument("--k", type=int)
    qp.add_argument("--mode", choices=("mv", "sv"))
    qp.add_argument("--json", action="store_true", help="machine-readable output")
    qp.add_argument("--enrich-url")
    qp.add_argument("--limit", type=int, default=20, help="rows to print (table output)")

    vp = sub.add_parser("serve", help="run the HTTP service")
    vp.add_argument("--store", default=store_default, required=store_default is None)
    vp.add_argument("--addr", default="127.0.0.1:8080")
    vp.add_argument("--enrich-url")
    vp.add_argument("--api-key")
    vp.add_argument("--ui", help="directory of built UI assets to serve at /ui")

    ep = sub.add_parser("eval", help="matching-accuracy experiments on a labeled store")
    ep.add_argument("experiment", choices=("semantic", "lexical", "sentiment", "timestamp", "all"))
    ep.add_argument("--store", default=store_default, required=store_default is None)
    ep.add_argument("--report", help="write the JSON report here")
    ep.add_argument("--n", type=int, default=300, help="matches per semantic query")
    ep.add_argument("--mode", choices=("mv", "sv"), action="append",
                    help="restrict to a mode (default: every indexed mode)")
    return p


def cmd_synth(args) -> int:
    cfg = SyntheticCorpusConfig(
        topics=args.topics,
        per_topic=args.per_topic,
        seed=args.seed,
        embedding_dim=args.embedding_dim,
    )
    records, labels = synth_corpus(cfg)
    save_corpus(records, labels, args.out)
    print(f"wrote {len(records)} records to {args.out} (+ labels)")
    return EXIT_OK


def cmd_ingest(args) -> int:
    path = Path(args.input)
    if not path.exists():
        print(f"error: no such file: {path}", file=sys.stderr)
        return EXIT_DATA
    store_dir = Path(args.store)
    store_dir.mkdir(parents=True, exist_ok=True)

    errors: list[LineError] = []
    records = load_records(path, errors)
    if args.embeddings:
        records = attach_embeddings(records, read_sidecar(args.embeddings))

    out_path = store_dir / RECORDS_NAME
    existing = set()
    if out_path.exists():
        with open(out_path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    existing.add(json.loads(line)["id"])
    added = duplicates = 0
    with open(out_path, "a", encoding="utf-8") as fh:
        for rec in records:
            if rec.id in existing:
                duplicates += 1
                continue
            existing.add(rec.id)
            fh.write(json.dumps(rec.to_json_dict()) + "\n")
            added += 1
    for err in errors:
        print(f"line {err.line}: {err.message}", file=sys.stderr)
    try:
        labels = load_labels(path)
        (store_dir / LABELS_NAME).write_text(json.dumps(labels, indent=2, sort_keys=True))
        print("copied ground-truth labels into the store")
    except FileNotFoundError:
        pass
    print(f"ingested {added} records ({duplicates} duplicates, {len(errors)} malformed lines)")
    if (store_dir / MANIFEST_NAME).exists():
        print("note: store has indexes; re-run `hvd index` to include the new records")
    return EXIT_OK if not errors else EXIT_DATA


def cmd_index(args) -> int:
    store_dir = Path(args.store)
    records_path = store_dir / RECORDS_NAME
    if not records_path.exists():
        print(f"error: no records at {records_path}; run `hvd ingest` first", file=sys.stderr)
        return EXIT_DATA

    time_kwargs = {}
    if args.time_start or args.time_end or args.time_mode != "level":
        time_kwargs["time"] = TimeConfig(
            range_start=parse_utc(args.time_start) if args.time_start else parse_utc("1970-01-01T00:00:00Z"),
            range_end=parse_utc(args.time_end) if args.time_end else parse_utc("2100-01-01T00:00:00Z"),
            levels=min(1024, args.dim // 2),
            mode=args.time_mode,
        )
    config = EncoderConfig.create(dim=args.dim, seed=args.seed, **time_kwargs)

    if (store_dir / MANIFEST_NAME).exists():
        try:
            store = Store.open(store_dir)
        except StoreMismatch as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_MISMATCH
        if store.config.to_json() != config.to_json():
            print(
                "error: store was indexed with a different encoder config "
                f"(dim {store.config.dim}, seeds differ?); use matching --dim/--seed",
                file=sys.stderr,
            )
            return EXIT_MISMATCH
        if args.mode in store.modes:
            print(f"mode {args.mode} already indexed; rebuilding")
        store = _reindex(store_dir, config, tuple(sorted(set(store.modes) | {args.mode})))
    else:
        store = _reindex(store_dir, config, (args.mode,))
    print(f"indexed {store.size} records at dim {config.dim}, modes {','.join(store.modes)}")
    return EXIT_OK


def _reindex(store_dir: Path, config: EncoderConfig, modes: tuple[str, ...]) -> Store:
    errors: list[LineError] = []
    records = list(load_records(store_dir / RECORDS_NAME, errors))
    for err in errors:
        print(f"line {err.line}: {err.message}", file=sys.stderr)
    manifest = store_dir / MANIFEST_NAME
    if manifest.exists():
        manifest.unlink()
    store = Store.create(store_dir, config, modes)
    report = store.ingest(records)
    if report.rejected:
        for msg in report.errors:
            print(f"error: {msg}", file=sys.stderr)
        raise SystemExit(EXIT_DATA)
    return store


def _parse_fuzz(pairs: list[str]) -> dict[str, float]:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"--fuzz expects ATTR=X, got {pair!r}")
        attr, _, raw = pair.partition("=")
        out[attr.strip()] = float(raw)
    return out


def cmd_query(args) -> int:
    try:
        store = Store.open(args.store)
    except StoreMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH

    constraints: dict = {}
    if args.example:
        constraints["text"] = args.example
    elif args.text:
        constraints["text"] = args.text
    if args.language:
        constraints["language"] = args.language
    if args.location:
        constraints["location"] = args.location
    if args.hashtag:
        constraints["hashtags"] = args.hashtag
    if args.sentiment:
        constraints["sentiment_class"] = args.sentiment
    if args.time_range:
        parts = args.time_range.split(",")
        if len(parts) != 2:
            print("error: --time-range expects START,END", file=sys.stderr)
            return EXIT_USAGE
        constraints["time_range"] = parts

    client = HttpEnrichmentClient(args.enrich_url) if args.enrich_url else None
    try:
        rfi = Rfi(
            constraints=constraints,
            fuzziness=_parse_fuzz(args.fuzz),
            mode=args.mode or store.modes[0],
            k=args.k,
        )
        result, timing = store.match_rfi(rfi, client)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except StoreMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH

    if args.json:
        print(
            json.dumps(
                {
                    "total_matched": len(result.matched),
                    "matched": [
                        {"id": rid, "distances": result.distances[rid]} for rid in result.matched
                    ],
                    "candidates_per_attribute": result.candidates_per_attribute,
                    "timing": timing,
                }
            )
        )
    else:
        print(f"{len(result.matched)} matched of {timing['store_size']} in {timing['elapsed_ms']:.1f} ms")
        for rid in result.matched[: args.limit]:
            dists = " ".join(f"{a}={d:.3f}" for a, d in result.distances[rid].items())
            text = store.record(rid).text
            snippet = text if len(text) <= 60 else text[:57] + "..."
            print(f"  {rid}  {dists}  {snippet}")
        if len(result.matched) > args.limit:
            print(f"  ... {len(result.matched) - args.limit} more")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from hvd.service import create_app

    try:
        store = Store.open(args.store)
    except StoreMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    client = HttpEnrichmentClient(args.enrich_url) if args.enrich_url else None
    app = create_app(store, client, api_key=args.api_key, ui_dir=args.ui)
    host, _, port = args.addr.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        store = Store.open(args.store)
    except StoreMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    labels = store.labels()
    if labels is None:
        print("error: store has no ground-truth labels (ingest a synth corpus)", file=sys.stderr)
        return EXIT_DATA

    experiments = (
        ("semantic", "lexical", "sentiment", "timestamp")
        if args.experiment == "all"
        else (args.experiment,)
    )
    modes = tuple(args.mode) if args.mode else store.modes
    records = list(store.snapshot.records.values())
    reports = {}
    for mode in modes:
        report = run_all(records, labels, store.config, mode, n=args.n, experiments=experiments)
        reports[mode] = report.to_dict()
        _print_report(mode, report)
    if args.report:
        Path(args.report).write_text(json.dumps(reports, indent=2, sort_keys=True))
        print(f"report written to {args.report}")
    return EXIT_OK


def _print_report(mode: str, report) -> None:
    print(f"== mode {mode} (dim {report.config['dim']}) ==")
    if report.semantic is not None:
        for topic, p in report.semantic.items():
            print(f"  semantic precision@{report.config['n']}  {topic:20s} {p:.4f}")
    if report.lexical is not None:
        for attr, values in report.lexical.items():
            for value, recall in values.items():
                print(f"  lexical recall           {attr}={value:<14s} {recall:.4f}")
    if report.sentiment is not None:
        for cls, recall in report.sentiment.items():
            print(f"  sentiment recall         {cls:20s} {recall:.4f}")
    if report.timestamp is not None:
        for encoding, metrics in report.timestamp.items():
            line = " ".join(f"{k}={v:.4f}" for k, v in metrics.items())
            print(f"  timestamp {encoding:14s} {line}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "synth": cmd_synth,
        "ingest": cmd_ingest,
        "index": cmd_index,
        "query": cmd_query,
        "serve": cmd_serve,
        "eval": cmd_eval,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
