"""Line-delimited JSON trace.

One record per line: ``{"data": {...}, "seq": n, "t": ms, "type": "<event>"}``
with keys sorted at every level and no whitespace, so the trace bytes (and
their SHA-256) are a pure function of the run.

Event types and their ``data`` keys:

=================  ============================================================
send               message, sender, pseudonym, service, class, purpose,
                   address_mode, personal, encrypted, x, y, fault
route              message, chosen, fallbacks, reason
send_failed        sender, service, reason
deliver            message, recipient, channel, sent_at
drop               message, recipient, channel, reason
violation          service, record, fields
log                owner, seq, actor, subject, operation, purpose, at,
                   chain_hash
crl                authority, version, revoked
subject_request    subject, services, kind
subject_response   service, ok, error, records, settings
auth               reader, holder, pseudonym, granted, reason
actuate            node, action
log_verified       owner, entries, ok
metrics            the emitted Metrics (last record)
=================  ============================================================

``sender``/``holder`` node ids are the simulator's ground truth; they exist
so linkability reports can be scored and never reach any in-system store.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable

from ..errors import MalformedTrace


def dumps(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


class TraceWriter:
    def __init__(self):
        self.records: list[dict] = []

    def emit(self, t: int, event: str, **data) -> dict:
        record = {"seq": len(self.records), "t": t, "type": event, "data": data}
        self.records.append(record)
        return record

    def lines(self) -> list[str]:
        return [dumps(r) for r in self.records]

    def text(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def digest(self) -> str:
        return hashlib.sha256(self.text().encode()).hexdigest()


def trace_digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def parse_trace(lines: Iterable[str]) -> list[dict]:
    records = []
    for n, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedTrace(f"line {n + 1}: {exc}") from None
        if not isinstance(record, dict) or set(record) != {"seq", "t", "type", "data"}:
            raise MalformedTrace(f"line {n + 1}: expected keys seq, t, type, data")
        records.append(record)
    check_well_formed(records)
    return records


def check_well_formed(records: list[dict]) -> None:
    last_t = 0
    for i, r in enumerate(records):
        if r.get("seq") != i:
            raise MalformedTrace(f"record {i}: sequence number {r.get('seq')} out of order")
        if not isinstance(r.get("t"), int) or r["t"] < last_t:
            raise MalformedTrace(f"record {i}: time {r.get('t')} goes backwards")
        if not isinstance(r.get("data"), dict):
            raise MalformedTrace(f"record {i}: data must be a mapping")
        last_t = r["t"]


def read_trace(path: str | Path) -> list[dict]:
    with open(path) as fh:
        return parse_trace(fh)
