"""Enrollment and pseudonym certificate lifecycle.

The Enrollment Authority (EA) binds a node id to the node's long-term key.
The Pseudonym Authority (PA) checks an enrollment certificate and issues
short-lived pseudonym certificates carrying no node identity. The PA keeps
the pseudonym -> node mapping in a private escrow; nothing else in the
system stores both identifiers together.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

from .core_model import Node, SimTime, World
from .errors import (
    AlreadyRevoked,
    InvalidCredential,
    InvalidEnrollment,
    NodeUnknown,
    PoolExhausted,
    RevokedCredential,
    RevokedEnrollment,
)
from .security import KeyHandle, KeyPurpose, PublicKey, SecurePlatform, SignedBlob, verify

DAY_MS = 24 * 3600 * 1000
ANY_SERVICE_CLASS = "*"


def _pack(*parts: bytes) -> bytes:
    return b"".join(struct.pack(">I", len(p)) + p for p in parts)


def _unpack(data: bytes, count: int) -> list[bytes]:
    parts, offset = [], 0
    for _ in range(count):
        if offset + 4 > len(data):
            raise ValueError("truncated certificate")
        (n,) = struct.unpack_from(">I", data, offset)
        offset += 4
        if offset + n > len(data):
            raise ValueError("truncated certificate")
        parts.append(data[offset : offset + n])
        offset += n
    if offset != len(data):
        raise ValueError("trailing bytes after certificate")
    return parts


@dataclass(frozen=True)
class EnrollmentCertificate:
    cert_id: str
    node_id: str
    public_key: PublicKey
    not_before: SimTime
    not_after: SimTime
    issuer: str
    signature: bytes = b""

    def tbs_bytes(self) -> bytes:
        return _pack(
            b"enrollment/v1",
            self.cert_id.encode(),
            self.node_id.encode(),
            self.public_key.to_bytes(),
            str(self.not_before).encode(),
            str(self.not_after).encode(),
            self.issuer.encode(),
        )

    def to_bytes(self) -> bytes:
        return _pack(self.tbs_bytes(), self.signature)

    @classmethod
    def from_bytes(cls, data: bytes) -> "EnrollmentCertificate":
        tbs, signature = _unpack(data, 2)
        tag, cert_id, node_id, key, nb, na, issuer = _unpack(tbs, 7)
        if tag != b"enrollment/v1":
            raise ValueError("not an enrollment certificate")
        return cls(
            cert_id.decode(), node_id.decode(), PublicKey.from_bytes(key), int(nb), int(na), issuer.decode(), signature
        )

    def valid_at(self, t: SimTime) -> bool:
        return self.not_before <= t <= self.not_after

    def verify(self, issuer_key: PublicKey) -> bool:
        return verify(issuer_key, self.tbs_bytes(), SignedBlob(self.signature, issuer_key))


@dataclass(frozen=True)
class PseudonymCertificate:
    pseudonym_id: str
    public_key: PublicKey
    service_class: str
    not_before: SimTime
    not_after: SimTime
    issuer: str
    signature: bytes = b""

    @property
    def cert_id(self) -> str:
        return self.pseudonym_id

    def tbs_bytes(self) -> bytes:
        return _pack(
            b"pseudonym/v1",
            self.pseudonym_id.encode(),
            self.public_key.to_bytes(),
            self.service_class.encode(),
            str(self.not_before).encode(),
            str(self.not_after).encode(),
            self.issuer.encode(),
        )

    def to_bytes(self) -> bytes:
        return _pack(self.tbs_bytes(), self.signature)

    @classmethod
    def from_bytes(cls, data: bytes) -> "PseudonymCertificate":
        tbs, signature = _unpack(data, 2)
        tag, pid, key, service_class, nb, na, issuer = _unpack(tbs, 7)
        if tag != b"pseudonym/v1":
            raise ValueError("not a pseudonym certificate")
        return cls(
            pid.decode(), PublicKey.from_bytes(key), service_class.decode(), int(nb), int(na), issuer.decode(), signature
        )

    def valid_at(self, t: SimTime) -> bool:
        return self.not_before <= t <= self.not_after

    def permits(self, service_class: str) -> bool:
        return self.service_class in (ANY_SERVICE_CLASS, service_class)

    def verify(self, issuer_key: PublicKey) -> bool:
        return verify(issuer_key, self.tbs_bytes(), SignedBlob(self.signature, issuer_key))


class RevocationList:
    """Monotone set of revoked certificate ids with a change counter."""

    def __init__(self, authority: str = ""):
        self.authority = authority
        self._revoked: set[str] = set()
        self.version = 0

    def revoke(self, cert_id: str) -> "RevocationList":
        if cert_id not in self._revoked:
            self._revoked.add(cert_id)
            self.version += 1
        return self

    def is_revoked(self, cert_id: str) -> bool:
        return cert_id in self._revoked

    __contains__ = is_revoked

    def __len__(self) -> int:
        return len(self._revoked)

    def snapshot(self) -> dict:
        return {"authority": self.authority, "version": self.version, "revoked": sorted(self._revoked)}


def revoke(rl: RevocationList, cert_id: str) -> RevocationList:
    return rl.revoke(cert_id)


def is_revoked(rl: RevocationList, cert_id: str) -> bool:
    return rl.is_revoked(cert_id)


class _Authority:
    def __init__(self, name: str, platform: SecurePlatform):
        self.name = name
        self._platform = platform
        self._key = platform.generate_key(KeyPurpose.LONG_TERM_IDENTITY)
        self.public_key = platform.public_key(self._key)
        self.crl = RevocationList(name)

    def _sign(self, tbs: bytes) -> bytes:
        return self._platform.sign(self._key, tbs).signature


class EnrollmentAuthority(_Authority):
    def __init__(self, name: str, platform: SecurePlatform, world: World | None = None, validity_ms: int = 365 * DAY_MS):
        super().__init__(name, platform)
        self.world = world
        self.validity_ms = validity_ms
        self._revoked_nodes: set[str] = set()
        self._issued: dict[str, list[str]] = {}

    def revoke_node(self, node_id: str) -> None:
        self._revoked_nodes.add(node_id)
        for cert_id in self._issued.get(node_id, []):
            self.crl.revoke(cert_id)


class PseudonymAuthority(_Authority):
    def __init__(self, name: str, platform: SecurePlatform, ea: EnrollmentAuthority, lifetime_ms: int = 7 * DAY_MS):
        super().__init__(name, platform)
        self.ea_key = ea.public_key
        self.ea_crl = ea.crl
        self.lifetime_ms = lifetime_ms
        self._escrow: dict[str, str] = {}

    @property
    def issued_count(self) -> int:
        return len(self._escrow)


def enroll(ea: EnrollmentAuthority, node: Node, at: SimTime) -> EnrollmentCertificate:
    if ea.world is not None and node.id not in ea.world:
        raise NodeUnknown(node.id)
    if node.id in ea._revoked_nodes:
        raise AlreadyRevoked(node.id)
    unsigned = EnrollmentCertificate(
        cert_id=ea._platform.random_bytes(16).hex(),
        node_id=node.id,
        public_key=node.identity_public,
        not_before=at,
        not_after=at + ea.validity_ms,
        issuer=ea.name,
    )
    cert = replace(unsigned, signature=ea._sign(unsigned.tbs_bytes()))
    ea._issued.setdefault(node.id, []).append(cert.cert_id)
    return cert


def issue_pseudonyms(
    pa: PseudonymAuthority,
    ec: EnrollmentCertificate,
    count: int,
    service_class: str,
    at: SimTime,
    holder: Node,
) -> list[PseudonymCertificate]:
    """Issue ``count`` pseudonyms; key pairs and ids come from ``holder``'s platform.

    The holder proves possession of the enrolled long-term key by signing the
    request; the private halves of the pseudonym keys stay on its platform.
    """
    if count < 1:
        raise ValueError("count must be positive")
    if not ec.verify(pa.ea_key) or not ec.valid_at(at):
        raise InvalidEnrollment(ec.cert_id)
    if pa.ea_crl.is_revoked(ec.cert_id):
        raise RevokedEnrollment(ec.cert_id)
    request = _pack(b"pseudonym-request", ec.cert_id.encode(), str(count).encode(), str(at).encode())
    if not verify(ec.public_key, request, holder.platform.sign(holder.identity_key, request)):
        raise InvalidEnrollment("holder does not own the enrolled key")

    certs = []
    for _ in range(count):
        pid = holder.platform.random_bytes(16).hex()
        while pid in pa._escrow:
            pid = holder.platform.random_bytes(16).hex()
        handle = holder.platform.generate_key(KeyPurpose.SIGNING)
        unsigned = PseudonymCertificate(
            pseudonym_id=pid,
            public_key=holder.platform.public_key(handle),
            service_class=service_class,
            not_before=at,
            not_after=at + pa.lifetime_ms,
            issuer=pa.name,
        )
        cert = replace(unsigned, signature=pa._sign(unsigned.tbs_bytes()))
        pa._escrow[pid] = ec.node_id
        certs.append(cert)
    return certs


class Strategy(Enum):
    PER_SERVICE = "per_service"
    TIME_ROTATION = "time_rotation"
    PER_SERVICE_AND_TIME = "per_service_and_time"
    SINGLE_IDENTITY = "single_identity"


@dataclass(frozen=True)
class PseudonymPolicy:
    strategy: Strategy
    period_ms: int | None = None
    pool_size: int = 20

    def __post_init__(self):
        rotating = self.strategy in (Strategy.TIME_ROTATION, Strategy.PER_SERVICE_AND_TIME)
        if rotating and (self.period_ms is None or self.period_ms <= 0):
            raise ValueError(f"{self.strategy.value} needs a positive period")
        if self.pool_size < 1:
            raise ValueError("pool size must be at least 1")

    @classmethod
    def per_service(cls, pool_size: int = 20) -> "PseudonymPolicy":
        return cls(Strategy.PER_SERVICE, None, pool_size)

    @classmethod
    def time_rotation(cls, period_ms: int, pool_size: int = 20) -> "PseudonymPolicy":
        return cls(Strategy.TIME_ROTATION, period_ms, pool_size)

    @classmethod
    def per_service_and_time(cls, period_ms: int, pool_size: int = 20) -> "PseudonymPolicy":
        return cls(Strategy.PER_SERVICE_AND_TIME, period_ms, pool_size)

    @classmethod
    def single_identity(cls, pool_size: int = 20) -> "PseudonymPolicy":
        return cls(Strategy.SINGLE_IDENTITY, None, pool_size)

    def slot(self, service_id: str, at: SimTime) -> tuple:
        """Key under which one pseudonym stays in use."""
        if self.strategy is Strategy.PER_SERVICE:
            return ("service", service_id)
        if self.strategy is Strategy.TIME_ROTATION:
            return ("window", at // self.period_ms)
        if self.strategy is Strategy.PER_SERVICE_AND_TIME:
            return ("service-window", service_id, at // self.period_ms)
        return ("single",)

    def to_dict(self) -> dict:
        return {"strategy": self.strategy.value, "period_ms": self.period_ms, "pool_size": self.pool_size}


Issuer = Callable[[int, SimTime], list[PseudonymCertificate]]


@dataclass
class PseudonymWallet:
    """A node's own pseudonym pool plus the policy deciding which one to show."""

    holder: Node
    policy: PseudonymPolicy
    issuer: Issuer | None = None
    _pool: list[PseudonymCertificate] = field(default_factory=list)
    _assigned: dict[tuple, PseudonymCertificate] = field(default_factory=dict)

    @classmethod
    def provision(
        cls, holder: Node, policy: PseudonymPolicy, pa: PseudonymAuthority, ec: EnrollmentCertificate, at: SimTime = 0
    ) -> "PseudonymWallet":
        def issuer(count: int, t: SimTime) -> list[PseudonymCertificate]:
            return issue_pseudonyms(pa, ec, count, ANY_SERVICE_CLASS, t, holder)

        wallet = cls(holder, policy, issuer)
        wallet.add(issuer(policy.pool_size, at))
        return wallet

    def add(self, certs: list[PseudonymCertificate]) -> None:
        self._pool.extend(certs)

    @property
    def remaining(self) -> int:
        return len(self._pool)

    def current(self, service_id: str, at: SimTime) -> PseudonymCertificate:
        slot = self.policy.slot(service_id, at)
        cert = self._assigned.get(slot)
        if cert is None or not cert.valid_at(at):
            cert = self._take(at)
            self._assigned[slot] = cert
        return cert

    def _take(self, at: SimTime) -> PseudonymCertificate:
        if not self._pool:
            if self.issuer is None:
                raise PoolExhausted(self.holder.id)
            self._pool.extend(self.issuer(self.policy.pool_size, at))
        return self._pool.pop(0)

    def handle(self, cert: PseudonymCertificate) -> KeyHandle:
        handle = self.holder.platform.handle_for(cert.public_key)
        if handle is None:
            raise InvalidCredential("certificate key is not held by this wallet's platform")
        return handle


def current_pseudonym(wallet: PseudonymWallet, service_id: str, at: SimTime) -> PseudonymCertificate:
    return wallet.current(service_id, at)


@dataclass
class TrustAnchors:
    """What a relying party needs to check pseudonym credentials."""

    pa_key: PublicKey
    pseudonym_crl: RevocationList

    @classmethod
    def of(cls, pa: PseudonymAuthority) -> "TrustAnchors":
        return cls(pa.public_key, pa.crl)


def check_pseudonym(
    cert: PseudonymCertificate, anchors: TrustAnchors, at: SimTime, service_class: str | None = None
) -> None:
    if not cert.verify(anchors.pa_key):
        raise InvalidCredential(f"{cert.pseudonym_id}: bad issuer signature")
    if not cert.valid_at(at):
        raise InvalidCredential(f"{cert.pseudonym_id}: outside validity window")
    if service_class is not None and not cert.permits(service_class):
        raise InvalidCredential(f"{cert.pseudonym_id}: not permitted for {service_class}")
    if anchors.pseudonym_crl.is_revoked(cert.pseudonym_id):
        raise RevokedCredential(cert.pseudonym_id)
