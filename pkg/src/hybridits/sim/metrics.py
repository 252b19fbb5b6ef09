"""Run metrics, collected live and recomputed from a trace.

The engine feeds :class:`MetricsCollector` from its own objects while the run
is in progress. :func:`recompute_metrics` rebuilds the same numbers from the
trace records alone. The two must agree field for field.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping

from ..channels import ChannelKind
from ..core_model import GeoPosition
from ..errors import MalformedTrace
from ..privacy.linkability import IdentifierEquality, Observation, SpatioTemporal, analyze_linkability
from ..privacy.model import ProtectionGoal
from .trace import check_well_formed

CHANNELS = [c.value for c in ChannelKind]
ADVERSARIES = (IdentifierEquality(), SpatioTemporal())


@dataclass
class Metrics:
    messages_sent: int = 0
    send_failures: dict[str, int] = field(default_factory=dict)
    channels: dict[str, dict] = field(default_factory=dict)
    minimization_violations: list[dict] = field(default_factory=list)
    linkability: dict[str, dict] = field(default_factory=dict)
    protection_goals: dict[str, bool] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "Metrics":
        return cls(**{k: data[k] for k in cls.__dataclass_fields__})

    def delivered(self, channel: ChannelKind) -> int:
        return self.channels[channel.value]["delivered"]


def _channel_table(delivered: Counter, dropped: Counter, latency_sum: Counter) -> dict[str, dict]:
    table = {}
    for ch in CHANNELS:
        n = delivered[ch]
        table[ch] = {
            "delivered": n,
            "dropped": dropped[ch],
            "mean_latency_ms": latency_sum[ch] / n if n else None,
        }
    return table


def _linkability(observations: list[Observation], truth: Mapping[str, str]) -> dict[str, dict]:
    out = {}
    for adversary in ADVERSARIES:
        if not observations:
            out[adversary.name] = {"precision": 0.0, "recall": 0.0, "cross_service_recall": 0.0}
            continue
        overall = analyze_linkability(observations, adversary, truth)
        cross = analyze_linkability(observations, adversary, truth, cross_service_only=True)
        out[adversary.name] = {
            "precision": overall.precision,
            "recall": overall.recall,
            "cross_service_recall": cross.recall,
        }
    return out


def _goals(
    confidentiality: bool,
    integrity: bool,
    availability: bool,
    unlinkability: bool,
    transparency: bool,
    intervenability: bool,
) -> dict[str, bool]:
    return {
        ProtectionGoal.CONFIDENTIALITY.value: confidentiality,
        ProtectionGoal.INTEGRITY.value: integrity,
        ProtectionGoal.AVAILABILITY.value: availability,
        ProtectionGoal.UNLINKABILITY.value: unlinkability,
        ProtectionGoal.TRANSPARENCY.value: transparency,
        ProtectionGoal.INTERVENABILITY.value: intervenability,
    }


class MetricsCollector:
    def __init__(self):
        self.sent = 0
        self.failures: Counter = Counter()
        self.delivered: Counter = Counter()
        self.dropped: Counter = Counter()
        self.latency: Counter = Counter()
        self.violations: list[dict] = []
        self.observations: list[Observation] = []
        self.truth: dict[str, str] = {}
        self.unprotected_personal = 0
        self.tampered: set[str] = set()
        self.tampered_accepted = 0
        self.subject_failures = 0

    def on_send(self, message: str, sender: str, pseudonym: str, service: str, position: GeoPosition, at: int,
                personal: bool, unicast: bool, encrypted: bool, tampered: bool) -> None:
        self.sent += 1
        self.observations.append(Observation(pseudonym, service, position, at))
        self.truth[pseudonym] = sender
        if personal and unicast and not encrypted:
            self.unprotected_personal += 1
        if tampered:
            self.tampered.add(message)

    def on_send_failure(self, reason: str) -> None:
        self.failures[reason] += 1

    def on_delivery(self, message: str, channel: ChannelKind, latency: int) -> None:
        self.delivered[channel.value] += 1
        self.latency[channel.value] += latency
        if message in self.tampered:
            self.tampered_accepted += 1

    def on_drop(self, channel: ChannelKind) -> None:
        self.dropped[channel.value] += 1

    def on_violation(self, service: str, record: str, fields: Iterable[str]) -> None:
        self.violations.append({"service": service, "record": record, "fields": sorted(fields)})

    def on_subject_outcome(self, ok: bool) -> None:
        if not ok:
            self.subject_failures += 1

    def finish(self, logs_ok: bool, audit_complete: bool) -> Metrics:
        links = _linkability(self.observations, self.truth)
        goals = _goals(
            confidentiality=self.unprotected_personal == 0,
            integrity=logs_ok and self.tampered_accepted == 0,
            availability=sum(self.failures.values()) == 0,
            unlinkability=links[IdentifierEquality.name]["cross_service_recall"] == 0.0,
            transparency=logs_ok and audit_complete,
            intervenability=self.subject_failures == 0,
        )
        return Metrics(
            self.sent,
            dict(sorted(self.failures.items())),
            _channel_table(self.delivered, self.dropped, self.latency),
            list(self.violations),
            links,
            goals,
        )


def recompute_metrics(records: list[dict]) -> Metrics:
    """Aggregate a trace into :class:`Metrics` without consulting the run."""
    try:
        check_well_formed(records)
        return _recompute(records)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedTrace(f"cannot aggregate trace: {exc!r}") from None


def _recompute(records: list[dict]) -> Metrics:
    sends: dict[str, dict] = {}
    failures: Counter = Counter()
    delivered: Counter = Counter()
    dropped: Counter = Counter()
    latency: Counter = Counter()
    violations = []
    subject_failures = 0
    log_entries: dict[str, set[tuple]] = {}
    verified: list[bool] = []
    accepted = []

    for r in records:
        kind, d = r["type"], r["data"]
        if kind == "send":
            sends[d["message"]] = {**d, "t": r["t"]}
        elif kind == "send_failed":
            failures[d["reason"]] += 1
        elif kind == "deliver":
            delivered[d["channel"]] += 1
            latency[d["channel"]] += r["t"] - d["sent_at"]
            accepted.append((d["message"], d["recipient"], r["t"]))
        elif kind == "drop":
            dropped[d["channel"]] += 1
        elif kind == "violation":
            violations.append({"service": d["service"], "record": d["record"], "fields": sorted(d["fields"])})
        elif kind == "subject_response":
            subject_failures += 0 if d["ok"] else 1
        elif kind == "log":
            log_entries.setdefault(d["owner"], set()).add((d["operation"], d["subject"], d["purpose"], d["at"]))
        elif kind == "log_verified":
            verified.append(bool(d["ok"]))

    observations = [
        Observation(s["pseudonym"], s["service"], GeoPosition(s["x"], s["y"]), s["t"]) for s in sends.values()
    ]
    truth = {s["pseudonym"]: s["sender"] for s in sends.values()}
    links = _linkability(observations, truth)

    audit_complete = True
    for message, recipient, arrived in accepted:
        s = sends[message]
        sender_side = ("send", s["pseudonym"], s["purpose"], s["t"])
        recipient_side = ("receive", s["pseudonym"], s["purpose"], arrived)
        if sender_side not in log_entries.get(s["sender"], ()) or recipient_side not in log_entries.get(recipient, ()):
            audit_complete = False

    logs_ok = all(verified)
    tampered_accepted = sum(1 for m, _, _ in accepted if sends[m]["fault"] == "bitflip")
    unprotected = sum(
        1 for s in sends.values() if s["personal"] and s["address_mode"] == "unicast" and not s["encrypted"]
    )
    goals = _goals(
        confidentiality=unprotected == 0,
        integrity=logs_ok and tampered_accepted == 0,
        availability=sum(failures.values()) == 0,
        unlinkability=links[IdentifierEquality.name]["cross_service_recall"] == 0.0,
        transparency=logs_ok and audit_complete,
        intervenability=subject_failures == 0,
    )
    return Metrics(
        len(sends),
        dict(sorted(failures.items())),
        _channel_table(delivered, dropped, latency),
        violations,
        links,
        goals,
    )
