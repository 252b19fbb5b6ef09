"""Append-only, hash-chained transparency log.

Each entry's content is serialized as compact JSON with sorted keys over
``actor, at, operation, purpose, seq, subject``. The chain hash is
``SHA-512(previous chain hash bytes || content)``, hex encoded, with 64 zero
bytes standing in for the hash before the first entry. SHA-512 is the hash
inside Ed25519, the signature scheme used elsewhere.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Iterator

GENESIS = bytes(64)


@dataclass(frozen=True)
class TransparencyLogEntry:
    seq: int
    actor: str
    subject: str
    operation: str
    purpose: str
    at: int
    chain_hash: str

    def content_bytes(self) -> bytes:
        return entry_content(self.seq, self.actor, self.subject, self.operation, self.purpose, self.at)

    def to_dict(self) -> dict:
        return asdict(self)


def entry_content(seq: int, actor: str, subject: str, operation: str, purpose: str, at: int) -> bytes:
    body = {"actor": actor, "at": at, "operation": operation, "purpose": purpose, "seq": seq, "subject": subject}
    return json.dumps(body, sort_keys=True, separators=(",", ":")).encode()


def chain(prev_hash: bytes, content: bytes) -> bytes:
    return hashlib.sha512(prev_hash + content).digest()


class TransparencyLog:
    def __init__(self, owner: str, on_append: Callable[["TransparencyLog", TransparencyLogEntry], None] | None = None):
        self.owner = owner
        self.on_append = on_append
        self._entries: list[TransparencyLogEntry] = []
        self._head = GENESIS

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[TransparencyLogEntry]:
        return iter(self._entries)

    @property
    def entries(self) -> tuple[TransparencyLogEntry, ...]:
        return tuple(self._entries)

    def append(self, actor: str, subject: str, operation: str, purpose: str, at: int) -> int:
        seq = len(self._entries)
        self._head = chain(self._head, entry_content(seq, actor, subject, operation, purpose, at))
        entry = TransparencyLogEntry(seq, actor, subject, operation, purpose, at, self._head.hex())
        self._entries.append(entry)
        if self.on_append is not None:
            self.on_append(self, entry)
        return seq

    def verify_chain(self) -> bool:
        return verify_entries(self._entries)

    def export_lines(self) -> list[str]:
        return [json.dumps(e.to_dict(), sort_keys=True, separators=(",", ":")) for e in self._entries]


def verify_entries(entries: Iterable[TransparencyLogEntry]) -> bool:
    head = GENESIS
    for expected_seq, entry in enumerate(entries):
        if entry.seq != expected_seq:
            return False
        head = chain(head, entry.content_bytes())
        if head.hex() != entry.chain_hash:
            return False
    return True


def parse_lines(lines: Iterable[str]) -> list[TransparencyLogEntry]:
    return [TransparencyLogEntry(**json.loads(line)) for line in lines if line.strip()]


def log_processing(log: TransparencyLog, actor: str, subject: str, operation: str, purpose: str, at: int) -> int:
    return log.append(actor, subject, operation, purpose, at)


def verify_chain(log: TransparencyLog) -> bool:
    return log.verify_chain()
