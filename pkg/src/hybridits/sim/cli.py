"""Command-line entry point: ``hybridits run|list|audit|verify``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..errors import HybridItsError
from ..privacy.linkability import IdentifierEquality, SpatioTemporal, adversary_by_name
from .builtins import builtin_names, builtin_scenario
from .engine import run_scenario
from .scenario import Scenario, load_scenario
from .trace import read_trace
from .verify import audit_trace, verify_trace


def _scenario(ref: str) -> Scenario:
    if ref in builtin_names():
        return builtin_scenario(ref)
    if not Path(ref).exists():
        raise SystemExit(f"error: {ref!r} is neither a built-in scenario nor a file (try `list`)")
    return load_scenario(ref)


def cmd_run(args) -> int:
    result = run_scenario(_scenario(args.scenario), args.seed)
    metrics = json.dumps(result.metrics.to_dict(), indent=2, sort_keys=True)
    if args.trace:
        Path(args.trace).write_text(result.trace_text)
    if args.metrics:
        Path(args.metrics).write_text(metrics + "\n")
    else:
        print(metrics)
    print(f"trace sha256 {result.digest}", file=sys.stderr)
    return 0


def cmd_list(args) -> int:
    for name in builtin_names():
        scenario = builtin_scenario(name)
        print(f"{name:45} {scenario.description}")
    return 0


def cmd_audit(args) -> int:
    adversary = adversary_by_name(args.adversary)
    report = audit_trace(read_trace(args.trace), adversary, args.cross_service)
    body = report.to_dict()
    if not args.links:
        del body["candidate_links"]
    print(json.dumps(body, indent=2))
    return 0


def cmd_verify(args) -> int:
    results = verify_trace(read_trace(args.trace))
    for r in results:
        print(f"{'ok  ' if r.ok else 'FAIL'} {r.name}{': ' + r.detail if r.detail else ''}")
    failed = next((r for r in results if not r.ok), None)
    if failed:
        print(f"verification failed at {failed.name}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridits", description="Hybrid C-ITS communication simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file or built-in")
    run.add_argument("scenario")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--trace", help="write the JSONL trace here")
    run.add_argument("--metrics", help="write metrics JSON here instead of stdout")
    run.set_defaults(func=cmd_run)

    sub.add_parser("list", help="list built-in scenarios").set_defaults(func=cmd_list)

    audit = sub.add_parser("audit", help="linkability analysis of a trace")
    audit.add_argument("trace")
    audit.add_argument("--adversary", required=True, choices=[IdentifierEquality.name, SpatioTemporal.name])
    audit.add_argument("--cross-service", action="store_true", help="score only links across services")
    audit.add_argument("--links", action="store_true", help="include the candidate links")
    audit.set_defaults(func=cmd_audit)

    verify = sub.add_parser("verify", help="recompute log chains and metrics from a trace")
    verify.add_argument("trace")
    verify.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except HybridItsError as exc:
        print(f"error: {exc.reason}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
