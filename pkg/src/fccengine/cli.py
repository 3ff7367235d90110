"""Operator command line: generate, ingest, run, serve, calibrate, report,
audit-verify, cost-report, metrics.

Thin wrappers over module operations. Exit codes: 0 success, 1 domain
error (e.g. a chain violation), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from decimal import Decimal
from pathlib import Path

from .audit import verify_file
from .canonical import format_decimal
from .config import CONFIG_ENV_VAR, load_config
from .ingest import GeneratorConfig, read_stream, generate_synthetic, write_labels, write_stream
from .orchestrate import Orchestrator
from .service import CostModelParams, compute_cost_report


def _emit(payload: dict, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable))
    else:
        for key, value in payload.items():
            print(f"{key}: {value}")


def _jsonable(obj):
    if isinstance(obj, Decimal):
        return format_decimal(obj)
    return str(obj)


def _engine(args) -> Orchestrator:
    config = load_config(args.config)
    return Orchestrator.open(config)


def _now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


def cmd_generate(args) -> int:
    config = GeneratorConfig(
        seed=args.seed,
        n_wallets=args.wallets,
        n_collections=args.collections,
        n_transactions=args.n,
        target_suspicious_fraction=args.suspicious,
        time_span_days=args.span_days,
    )
    events, labels = generate_synthetic(config)
    write_stream(events, Path(args.out))
    if args.labels:
        write_labels(labels, Path(args.labels))
    _emit(
        {
            "events": len(events),
            "suspicious": sum(1 for l in labels if l.suspicious),
            "out": args.out,
            "labels": args.labels or "",
        },
        args.format,
    )
    return 0


def cmd_ingest(args) -> int:
    engine = _engine(args)
    summary = engine.ingest_only(read_stream(Path(args.input)))
    _emit(
        {
            "accepted": summary.accepted,
            "rejected": summary.rejected,
            "first_seen_wallets": summary.first_seen_wallets,
        },
        args.format,
    )
    engine.close()
    return 0


def cmd_run(args) -> int:
    engine = _engine(args)
    summary = engine.run_pipeline(read_stream(Path(args.input)))
    _emit(summary.to_dict(), args.format)
    engine.close()
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    serve(config_path=args.config)
    return 0


def cmd_calibrate(args) -> int:
    engine = _engine(args)
    result = engine.run_optimizer_now(at=_now())
    _emit(result, args.format)
    engine.close()
    return 0


def cmd_report(args) -> int:
    engine = _engine(args)
    report = engine.reports.get(args.report_id)
    if report is None:
        for case in engine.cases.values():
            if case.case_id == args.report_id and case.report_id:
                report = engine.reports.get(case.report_id)
                break
    if report is None:
        print(f"no report found for id {args.report_id}", file=sys.stderr)
        engine.close()
        return 1
    if args.format == "text":
        print(report.narrative)
    else:
        from .report import serialize_report

        print(json.dumps(json.loads(serialize_report(report)), indent=2, sort_keys=True))
    engine.close()
    return 0


def cmd_audit_verify(args) -> int:
    config = load_config(args.config)
    if config.data_dir is None:
        print("no data_dir configured; nothing to verify", file=sys.stderr)
        return 1
    path = Path(config.data_dir) / "audit.jsonl"
    violation = verify_file(path)
    if violation is None:
        _emit({"ok": True, "path": str(path)}, args.format)
        return 0
    _emit({"ok": False, "seq": violation.seq, "kind": violation.kind.value}, args.format)
    return 1


def cmd_cost_report(args) -> int:
    params = CostModelParams(
        users=Decimal(str(args.users)),
        tx_per_user=Decimal(str(args.tx_per_user)),
        suspicion_rate=Decimal(str(args.suspicion_rate)),
        manual_hours_per_alert=Decimal(str(args.hours_per_alert)),
        fte_hours_per_year=Decimal(str(args.fte_hours_per_year)),
        api_calls_per_alert=Decimal(str(args.calls_per_alert)),
        usd_per_call=Decimal(str(args.usd_per_call)) if args.usd_per_call else Decimal(1) / Decimal(1666),
        automated_seconds_per_case=Decimal(str(args.automated_seconds)),
    )
    report = compute_cost_report(params)
    _emit({k: format_decimal(v) for k, v in report.to_dict().items()}, args.format)
    return 0


def cmd_metrics(args) -> int:
    engine = _engine(args)
    _emit(engine.metrics_view(), args.format)
    engine.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fcc-engine",
        description="Deterministic financial-crime-compliance engine for NFT trade flows",
    )
    parser.add_argument(
        "--config",
        default=None,
        help=f"path to the YAML config (falls back to ${CONFIG_ENV_VAR})",
    )
    parser.add_argument("--format", choices=("json", "text"), default="text")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a seeded synthetic stream with ground-truth labels")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--wallets", type=int, default=2000)
    p.add_argument("--collections", type=int, default=40)
    p.add_argument("--suspicious", type=float, default=0.045)
    p.add_argument("--span-days", type=int, default=90)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--labels", default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("ingest", help="validate and archive a stream without monitoring")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("run", help="run the full pipeline over a stream file")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("calibrate", help="re-run the escalation-threshold optimizer")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("report", help="print a drafted STR by report or case id")
    p.add_argument("report_id")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("audit-verify", help="verify the persisted audit chain")
    p.set_defaults(func=cmd_audit_verify)

    p = sub.add_parser("cost-report", help="compute the compliance cost model")
    p.add_argument("--users", type=float, default=100_000)
    p.add_argument("--tx-per-user", type=float, default=100)
    p.add_argument("--suspicion-rate", type=float, default=0.045)
    p.add_argument("--hours-per-alert", type=float, default=2)
    p.add_argument("--fte-hours-per-year", type=float, default=1875)
    p.add_argument("--calls-per-alert", type=float, default=2.22)
    p.add_argument("--usd-per-call", type=float, default=None)
    p.add_argument("--automated-seconds", type=float, default=60)
    p.set_defaults(func=cmd_cost_report)

    p = sub.add_parser("metrics", help="print engine metrics from persisted state")
    p.set_defaults(func=cmd_metrics)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
