"""Command line front end.

Subcommands cover the full loop: ``snapshot`` pulls or normalizes catalog
statistics, ``enumerate`` dumps or counts a plan space, ``transform``
turns EXPLAIN JSON into hint text, ``candidates`` builds a candidate set
for one query, ``collect`` labels query files, ``dataset`` compiles
fine-tuning records, ``select`` scores selection strategies against
labels, and ``bench`` runs a pipeline end to end and reports latency
totals.

Exit codes: 0 success, 1 usage or configuration error, 2 data error
(malformed plans, hints, snapshots, fixtures, SQL), 3 generation backend
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .candidate_search import CandidateSet, generate_by_llm, search_by_arms
from .catalog_stats import export_snapshot, ingest_snapshot, obtain_statistics
from .config import RunConfig, load_config
from .dataset_builder import (
    build_generative_record,
    build_selective_record,
    split_records,
    write_records,
)
from .dbms import parse_explain_json
from .errors import ConfigError, GenerationBackendError, HintOptError
from .hint_codec import render_hints, transform_plan
from .label_harness import (
    AllCandidatesTimedOutError,
    append_labels,
    collect_labels,
    read_labels,
)
from .plan_model import ScanType, JoinType, simplify
from .plan_space import (
    DEFAULT_TABLE_CAP,
    ShapePolicy,
    SpaceSpec,
    count_plans,
    enumerate_plans,
)
from .selector import (
    planner_cost_fn,
    run_combined_pipeline,
    run_generative_pipeline,
    run_selective_pipeline,
    select_by_cost,
    select_listwise_llm,
    select_majority,
    select_oracle,
    selection_accuracy,
)

log = logging.getLogger(__name__)

_USAGE_EXIT = 1
_DATA_EXIT = 2
_BACKEND_EXIT = 3


def _read_queries(path: str) -> list[str]:
    """One query per line; blank lines and # comments are skipped."""
    queries = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            queries.append(line)
    if not queries:
        raise ConfigError(f"no queries found in {path}")
    return queries


def _write_text(out: str | None, text: str) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        Path(out).write_text(text)


def _hint_line(plan) -> str:
    return " ".join(render_hints(transform_plan(plan)).splitlines())


def _parse_scan_types(text: str) -> tuple[ScanType, ...]:
    if text == "all":
        return tuple(ScanType)
    try:
        return tuple(ScanType(token.strip()) for token in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"unknown scan type in {text!r}") from exc


def _parse_join_types(text: str) -> tuple[JoinType, ...]:
    if text == "all":
        return tuple(JoinType)
    try:
        return tuple(JoinType(token.strip()) for token in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"unknown join type in {text!r}") from exc


def cmd_snapshot(args: argparse.Namespace) -> int:
    if args.input:
        snapshot = ingest_snapshot(args.input)
    else:
        config = load_config(args.config)
        if not config.dsn:
            raise ConfigError("snapshot without --in needs a live dsn in the config")
        try:
            import psycopg
        except ImportError as exc:
            raise ConfigError("live snapshot needs the 'postgres' extra installed") from exc
        with psycopg.connect(config.dsn) as conn:
            snapshot = ingest_snapshot(conn)
    export_snapshot(snapshot, args.out)
    print(f"snapshot: {len(snapshot.tables)} tables -> {args.out}")
    return 0


def cmd_enumerate(args: argparse.Namespace) -> int:
    aliases = tuple(t.strip() for t in args.tables.split(",") if t.strip())
    if not aliases:
        raise ConfigError("--tables must name at least one alias")
    policy = ShapePolicy.LEFT_DEEP_ONLY if args.left_deep else ShapePolicy.ALL_SHAPES
    spec = SpaceSpec(
        n_tables=len(aliases),
        scan_types=_parse_scan_types(args.scans),
        join_types=_parse_join_types(args.joins),
        shape_policy=policy,
    )
    total = count_plans(spec)
    if args.count_only:
        # counting is closed-form, so the cap only guards the listing path
        print(total)
        return 0
    lines = [_hint_line(plan) for plan in enumerate_plans(spec, aliases, cap=args.cap)]
    _write_text(args.out, "\n".join(lines) + "\n")
    if args.out and args.out != "-":
        print(f"enumerated {total} plans -> {args.out}")
    return 0


def cmd_transform(args: argparse.Namespace) -> int:
    raw = Path(args.explain_json).read_text()
    plan = parse_explain_json(raw)
    text = render_hints(transform_plan(simplify(plan)), wrap=args.wrap)
    _write_text(args.out, text)
    return 0


def _candidates_for(
    sql: str, config: RunConfig, db, gen, snapshot, *, mode: str
) -> CandidateSet:
    if mode == "arms":
        return search_by_arms(sql, config.arms(), db)
    default_plan = db.explain(sql)
    stats = obtain_statistics(sql, snapshot, default_plan)
    return generate_by_llm(
        sql,
        stats,
        gen,
        config.sampling_policy(),
        default_hints=transform_plan(simplify(default_plan)),
    )


def _load_snapshot_arg(args: argparse.Namespace, *, needed: bool):
    if getattr(args, "snapshot", None):
        return ingest_snapshot(args.snapshot)
    if needed:
        raise ConfigError("this invocation needs --snapshot")
    return None


def cmd_candidates(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    sql = args.query if args.query else Path(args.query_file).read_text().strip()
    db = config.make_db_client()
    gen = config.make_gen_client() if args.mode == "generate" else None
    snapshot = _load_snapshot_arg(args, needed=args.mode == "generate")
    candidates = _candidates_for(sql, config, db, gen, snapshot, mode=args.mode)
    payload = {
        "query": candidates.query,
        "entries": [
            {
                "hints": render_hints(entry.hints),
                "provenance": entry.provenance.render(),
                "duplicate_of": entry.duplicate_of,
            }
            for entry in candidates.entries
        ],
        "skipped": [list(item) for item in candidates.skipped],
        "invalid_rate": candidates.invalid_rate,
    }
    _write_text(args.out, json.dumps(payload, indent=2) + "\n")
    return 0


def cmd_collect(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    queries = _read_queries(args.queries)
    db = config.make_db_client()
    gen = config.make_gen_client() if args.mode == "generate" else None
    snapshot = _load_snapshot_arg(args, needed=args.mode == "generate")
    collected = 0
    discarded = 0
    labeled = []
    for sql in queries:
        candidates = _candidates_for(sql, config, db, gen, snapshot, mode=args.mode)
        try:
            result = collect_labels(
                sql,
                candidates,
                db,
                global_timeout_ms=config.global_timeout_ms,
                adaptive=not args.no_adaptive,
            )
        except AllCandidatesTimedOutError:
            log.warning("every candidate timed out, dropping query: %s", sql)
            discarded += 1
            continue
        labeled.append(result)
        collected += 1
    append_labels(args.out, labeled)
    print(f"labeled {collected} queries ({discarded} discarded) -> {args.out}")
    return 0


def cmd_dataset(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    labeled = read_labels(args.labels)
    snapshot = ingest_snapshot(args.snapshot)
    db = config.make_db_client()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    records = []
    for i, item in enumerate(labeled):
        stats = obtain_statistics(item.query, snapshot, db.explain(item.query))
        query_id = f"q{i:05d}"
        if args.kind in ("generative", "both"):
            records.append(
                build_generative_record(
                    item, stats, query_id=query_id, benchmark=args.benchmark
                )
            )
        if args.kind in ("selective", "both"):
            records.append(
                build_selective_record(
                    item, stats, query_id=query_id, benchmark=args.benchmark
                )
            )

    splits = split_records(
        records, seed=config.seed, n_validation=args.validation, n_test=args.test
    )
    for name in ("train", "validation", "test"):
        path = out_dir / f"{name}.jsonl"
        write_records(path, splits[name])
        print(f"{name}: {len(splits[name])} records -> {path}")
    return 0


def cmd_select(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    labeled = read_labels(args.labels)
    db = config.make_db_client()
    strategy = args.strategy

    gen = config.make_gen_client() if strategy == "listwise" else None
    snapshot = _load_snapshot_arg(args, needed=strategy == "listwise")

    outcomes = []
    fallbacks = 0
    for item in labeled:
        if strategy == "oracle":
            outcome = select_oracle(item)
        elif strategy == "cost":
            outcome = select_by_cost(item.candidates, planner_cost_fn(db, item.query))
        elif strategy == "majority":
            outcome = select_majority(item.candidates)
        else:
            stats = obtain_statistics(item.query, snapshot, db.explain(item.query))
            outcome = select_listwise_llm(item.query, stats, item.candidates, gen)
        fallbacks += outcome.fallback_used
        outcomes.append(outcome)

    accuracy = selection_accuracy(outcomes, labeled)
    report = {
        "strategy": strategy,
        "queries": len(labeled),
        "accuracy_pct": accuracy,
        "fallbacks": fallbacks,
        "chosen": [outcome.chosen_index for outcome in outcomes],
    }
    if args.out:
        _write_text(args.out, json.dumps(report, indent=2) + "\n")
    print(f"{strategy}: {accuracy:.2f}% optimal over {len(labeled)} queries")
    return 0


_PIPELINES = {
    "generative": run_generative_pipeline,
    "selective": run_selective_pipeline,
    "combined": run_combined_pipeline,
}


def cmd_bench(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    queries = _read_queries(args.queries)
    snapshot = ingest_snapshot(args.snapshot)
    db = config.make_db_client()
    gen = config.make_gen_client()
    run = _PIPELINES[args.pipeline]

    rows = []
    exec_total = 0.0
    for sql in queries:
        if args.pipeline == "selective":
            result = run(sql, snapshot, db, gen, arms=config.arms())
        else:
            result = run(sql, snapshot, db, gen, policy=config.sampling_policy())
        execution = db.execute(
            sql, hints=result.chosen_hint_text, timeout_ms=config.global_timeout_ms
        )
        exec_total += execution.latency_ms
        row = {
            "query": sql,
            "chosen_hints": result.chosen_hint_text,
            "exec_ms": execution.latency_ms,
            "timed_out": execution.timed_out,
        }
        if args.timings:
            row["overhead_ms"] = result.timings_ms
        rows.append(row)

    report = {"pipeline": args.pipeline, "exec_total_ms": exec_total, "queries": rows}
    if args.out:
        _write_text(args.out, json.dumps(report, indent=2) + "\n")
    print(f"{args.pipeline}: {len(rows)} queries, Exec {exec_total:.1f} ms total")
    if args.timings:
        overhead = {"statistics": 0.0, "planning": 0.0, "inference": 0.0, "selection": 0.0}
        for row in rows:
            for phase, ms in row["overhead_ms"].items():
                overhead[phase] += ms
        e2e = exec_total + sum(overhead.values())
        detail = ", ".join(f"{phase} {ms:.1f}" for phase, ms in overhead.items())
        print(f"E2E {e2e:.1f} ms total ({detail})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hintopt", description="Hint-based query plan optimization toolkit."
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("snapshot", help="ingest catalog statistics to a snapshot file")
    p.add_argument("--config", help="run config (needed for live ingestion)")
    p.add_argument("--in", dest="input", help="existing snapshot JSON to normalize")
    p.add_argument("--out", required=True, help="snapshot JSON destination")
    p.set_defaults(func=cmd_snapshot)

    p = sub.add_parser("enumerate", help="list or count every plan in a space")
    p.add_argument("--tables", required=True, help="comma separated aliases")
    p.add_argument("--scans", default="all", help="scan types, e.g. SeqScan,IndexScan")
    p.add_argument("--joins", default="all", help="join types, e.g. HashJoin")
    p.add_argument("--left-deep", action="store_true", help="left-deep shapes only")
    p.add_argument("--count-only", action="store_true", help="print the count, skip listing")
    p.add_argument("--cap", type=int, default=DEFAULT_TABLE_CAP, help="table cap")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("transform", help="EXPLAIN JSON to hint text")
    p.add_argument("--explain-json", required=True, help="EXPLAIN (FORMAT JSON) file")
    p.add_argument("--wrap", action="store_true", help="wrap in comment markers")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("candidates", help="build a candidate set for one query")
    p.add_argument("--config", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--query", help="SQL text")
    group.add_argument("--query-file", help="file holding the SQL text")
    p.add_argument("--mode", choices=("arms", "generate"), default="arms")
    p.add_argument("--snapshot", help="statistics snapshot (generate mode)")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_candidates)

    p = sub.add_parser("collect", help="execute candidates and label queries")
    p.add_argument("--config", required=True)
    p.add_argument("--queries", required=True, help="query file, one per line")
    p.add_argument("--mode", choices=("arms", "generate"), default="arms")
    p.add_argument("--snapshot", help="statistics snapshot (generate mode)")
    p.add_argument("--no-adaptive", action="store_true", help="fixed per-query timeout")
    p.add_argument("--out", required=True, help="labels JSONL destination")
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("dataset", help="compile fine-tuning records from labels")
    p.add_argument("--config", required=True)
    p.add_argument("--labels", required=True, help="labels JSONL from collect")
    p.add_argument("--snapshot", required=True, help="statistics snapshot")
    p.add_argument("--kind", choices=("generative", "selective", "both"), default="both")
    p.add_argument("--benchmark", default="", help="benchmark tag stored in metadata")
    p.add_argument("--validation", type=int, default=0, help="queries held out for validation")
    p.add_argument("--test", type=int, default=0, help="queries held out for test")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("select", help="score a selection strategy against labels")
    p.add_argument("--config", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument(
        "--strategy", choices=("oracle", "cost", "majority", "listwise"), default="oracle"
    )
    p.add_argument("--snapshot", help="statistics snapshot (listwise)")
    p.add_argument("--out", help="report JSON destination")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("bench", help="run a pipeline end to end over a query file")
    p.add_argument("--config", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--snapshot", required=True)
    p.add_argument(
        "--pipeline", choices=("generative", "selective", "combined"), default="selective"
    )
    p.add_argument(
        "--timings",
        action="store_true",
        help="include wall-clock phase overhead (non-reproducible) in the report",
    )
    p.add_argument("--out", help="report JSON destination")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else _USAGE_EXIT
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_EXIT
    except GenerationBackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return _BACKEND_EXIT
    except HintOptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _DATA_EXIT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
