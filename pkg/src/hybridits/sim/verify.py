"""Offline checks over a recorded trace."""

from __future__ import annotations

from dataclasses import dataclass

from ..core_model import GeoPosition
from ..errors import MalformedTrace
from ..privacy.linkability import Adversary, LinkabilityReport, Observation, analyze_linkability
from ..privacy.translog import TransparencyLogEntry, verify_entries
from .metrics import Metrics, recompute_metrics
from .trace import check_well_formed

LOG_FIELDS = ("seq", "actor", "subject", "operation", "purpose", "at", "chain_hash")


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str = ""


def log_entries_by_owner(records: list[dict]) -> dict[str, list[TransparencyLogEntry]]:
    logs: dict[str, list[TransparencyLogEntry]] = {}
    for r in records:
        if r["type"] == "log":
            d = r["data"]
            logs.setdefault(d["owner"], []).append(TransparencyLogEntry(**{k: d[k] for k in LOG_FIELDS}))
    return logs


def verify_trace(records: list[dict]) -> list[CheckResult]:
    """Run every check; the first failing one is what callers report."""
    try:
        check_well_formed(records)
    except MalformedTrace as exc:
        return [CheckResult("well-formed", False, str(exc))]
    results = [CheckResult("well-formed", True)]

    for owner, entries in sorted(log_entries_by_owner(records).items()):
        ok = verify_entries(entries)
        results.append(CheckResult(f"chain:{owner}", ok, "" if ok else "hash chain does not recompute"))

    emitted = [r for r in records if r["type"] == "metrics"]
    if not emitted:
        results.append(CheckResult("metrics", False, "no metrics record"))
        return results
    try:
        recomputed = recompute_metrics(records)
    except MalformedTrace as exc:
        results.append(CheckResult("metrics", False, str(exc)))
        return results
    expected = Metrics.from_dict(emitted[-1]["data"])
    diff = [k for k in Metrics.__dataclass_fields__ if getattr(expected, k) != getattr(recomputed, k)]
    results.append(CheckResult("metrics", not diff, f"differs in {', '.join(diff)}" if diff else ""))
    return results


def observations_from_trace(records: list[dict]) -> tuple[list[Observation], dict[str, str]]:
    observations, truth = [], {}
    for r in records:
        if r["type"] == "send":
            d = r["data"]
            observations.append(Observation(d["pseudonym"], d["service"], GeoPosition(d["x"], d["y"]), r["t"]))
            truth[d["pseudonym"]] = d["sender"]
    return observations, truth


def audit_trace(records: list[dict], adversary: Adversary, cross_service_only: bool = False) -> LinkabilityReport:
    observations, truth = observations_from_trace(records)
    return analyze_linkability(observations, adversary, truth, cross_service_only)
