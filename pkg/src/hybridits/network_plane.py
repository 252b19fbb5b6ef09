"""Car2X Systems Network: service registry, channel selection, secure dispatch.

A dispatch runs in two halves so a discrete-event engine can put channel
latency between them:

* :meth:`SystemsNetwork.send` picks the pseudonym, builds, encrypts and signs
  the envelope, selects a channel and computes the reachable recipients.
* :meth:`SystemsNetwork.receive` is what each recipient does on arrival:
  verify the signature, check the credential and its revocation state, check
  the purpose, decrypt, store personal data, and log.

:func:`dispatch` runs both halves back to back.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping

from .channels import (
    DEFAULT_PARAMS,
    ChannelKind,
    ChannelParams,
    CoverageModel,
    CoverageState,
    DeliveryReport,
    admits,
    reachable_recipients,
)
from .core_model import (
    Address,
    MessageClass,
    MessageEnvelope,
    SimTime,
    Unicast,
    World,
    signed_tuple_bytes,
)
from .credentials import EnrollmentCertificate, PseudonymWallet, RevocationList, TrustAnchors, check_pseudonym
from .errors import (
    AuthFailure,
    DuplicateServiceId,
    HybridItsError,
    InvalidCredential,
    InvalidProviderCertificate,
    NoViableChannel,
    UnknownService,
)
from .privacy.model import DataSchema, MinimizationViolation, PersonalDataRecord
from .privacy.rights import ProviderStore
from .privacy.translog import TransparencyLog
from .security import CipherBlob, PublicKey, verify

INTEGRITY_FAILURE = "IntegrityFailure"
PURPOSE_MISMATCH = "PurposeMismatch"

DEFAULT_PREFERENCES: dict[MessageClass, tuple[ChannelKind, ...]] = {
    MessageClass.TIME_CRITICAL_LOCAL: (ChannelKind.ITS_G5, ChannelKind.CELLULAR),
    MessageClass.WIDE_AREA_PUBLIC: (ChannelKind.DAB, ChannelKind.CELLULAR),
    MessageClass.USER_SPECIFIC: (ChannelKind.CELLULAR, ChannelKind.ITS_G5),
    MessageClass.PROXIMITY_AUTH: (ChannelKind.RFID,),
}


@dataclass(frozen=True)
class ChannelSelectionPolicy:
    preferences: Mapping[MessageClass, tuple[ChannelKind, ...]] = field(
        default_factory=lambda: MappingProxyType(dict(DEFAULT_PREFERENCES))
    )

    def __post_init__(self):
        prefs = {k: tuple(v) for k, v in self.preferences.items()}
        missing = set(MessageClass) - set(prefs)
        if missing:
            raise ValueError(f"no channel preference for {sorted(m.value for m in missing)}")
        if any(not v for v in prefs.values()):
            raise ValueError("channel preference lists must be non-empty")
        object.__setattr__(self, "preferences", MappingProxyType(prefs))


@dataclass(frozen=True)
class RoutingDecision:
    chosen: ChannelKind
    fallbacks: tuple[ChannelKind, ...]
    reason: str

    def to_dict(self) -> dict:
        return {"chosen": self.chosen.value, "fallbacks": [c.value for c in self.fallbacks], "reason": self.reason}


def select_channel(
    policy: ChannelSelectionPolicy, msg_class: MessageClass, address: Address, state: CoverageState, sender: str
) -> RoutingDecision:
    """First preferred channel that carries the address mode and admits the sender."""
    tried: list[ChannelKind] = []
    notes: list[str] = []
    for kind in policy.preferences[msg_class]:
        ok, why = admits(state, kind, address, sender)
        if ok:
            return RoutingDecision(kind, tuple(tried), "; ".join(notes + [f"{kind.value}:selected"]))
        tried.append(kind)
        notes.append(f"{kind.value}:{why}")
    raise NoViableChannel(f"{msg_class.value} to {address.mode}: " + "; ".join(notes))


@dataclass(frozen=True)
class ServiceDescriptor:
    service_id: str
    provider_id: str
    msg_class: MessageClass
    schema: DataSchema
    provider_cert: EnrollmentCertificate
    default_address: Address | None = None

    @property
    def purpose(self) -> str:
        return self.schema.purpose

    @property
    def personal(self) -> bool:
        return self.schema.personal


class ServiceRegistry:
    """Certification gate for services; copies made with :meth:`replicate` are interchangeable."""

    def __init__(self, ea_key: PublicKey, ea_crl: RevocationList):
        self.ea_key = ea_key
        self.ea_crl = ea_crl
        self._services: dict[str, ServiceDescriptor] = {}

    def __contains__(self, service_id: object) -> bool:
        return service_id in self._services

    def __iter__(self):
        return iter(self._services.values())

    def get(self, service_id: str) -> ServiceDescriptor:
        try:
            return self._services[service_id]
        except KeyError:
            raise UnknownService(service_id) from None

    def register(self, descriptor: ServiceDescriptor, at: SimTime) -> None:
        cert = descriptor.provider_cert
        if not cert.verify(self.ea_key):
            raise InvalidProviderCertificate(f"{descriptor.service_id}: signature does not verify")
        if not cert.valid_at(at):
            raise InvalidProviderCertificate(f"{descriptor.service_id}: certificate not valid at {at}")
        if self.ea_crl.is_revoked(cert.cert_id):
            raise InvalidProviderCertificate(f"{descriptor.service_id}: certificate revoked")
        if cert.node_id != descriptor.provider_id:
            raise InvalidProviderCertificate(f"{descriptor.service_id}: certificate belongs to {cert.node_id}")
        if descriptor.service_id in self._services:
            raise DuplicateServiceId(descriptor.service_id)
        self._services[descriptor.service_id] = descriptor

    def replicate(self) -> "ServiceRegistry":
        twin = ServiceRegistry(self.ea_key, self.ea_crl)
        twin._services = dict(self._services)
        return twin


def register_service(registry: ServiceRegistry, descriptor: ServiceDescriptor, at: SimTime = 0) -> None:
    registry.register(descriptor, at)


def encode_fields(fields: Mapping[str, str]) -> bytes:
    return json.dumps({k: str(v) for k, v in fields.items()}, sort_keys=True, separators=(",", ":")).encode()


def decode_fields(payload: bytes) -> dict[str, str]:
    data = json.loads(payload.decode())
    if not isinstance(data, dict):
        raise ValueError("personal payload must be a JSON object")
    return {str(k): str(v) for k, v in data.items()}


@dataclass(frozen=True)
class Fault:
    """Fault injected into one dispatch.

    ``bitflip`` flips bit ``bit`` of the payload in transit (of the signature
    when the payload is empty); ``wrong_purpose`` makes the sender declare
    ``purpose`` instead of the service's own.
    """

    kind: str
    bit: int = 0
    purpose: str = "undeclared-purpose"

    def __post_init__(self):
        if self.kind not in ("bitflip", "wrong_purpose"):
            raise ValueError(f"unknown fault {self.kind!r}")


def flip_bit(data: bytes, bit: int) -> bytes:
    buf = bytearray(data)
    bit %= len(buf) * 8
    buf[bit // 8] ^= 1 << (bit % 8)
    return bytes(buf)


def tamper(envelope: MessageEnvelope, bit: int) -> MessageEnvelope:
    if envelope.payload:
        return replace(envelope, payload=flip_bit(envelope.payload, bit))
    signature = replace(envelope.signature, signature=flip_bit(envelope.signature.signature, bit))
    return replace(envelope, signature=signature)


@dataclass(frozen=True)
class Transmission:
    envelope: MessageEnvelope
    service_id: str
    sender: str
    decision: RoutingDecision
    report: DeliveryReport
    personal: bool


@dataclass(frozen=True)
class Reception:
    recipient: str
    accepted: bool
    reason: str
    plaintext: bytes | None = None
    record: PersonalDataRecord | None = None
    violation: MinimizationViolation | None = None


class SystemsNetwork:
    """Everything a dispatch touches, wired together for one world."""

    def __init__(
        self,
        world: World,
        coverage: CoverageModel,
        registry: ServiceRegistry,
        anchors: TrustAnchors,
        wallets: Mapping[str, PseudonymWallet],
        policy: ChannelSelectionPolicy | None = None,
        params: ChannelParams = DEFAULT_PARAMS,
        stores: Mapping[str, ProviderStore] | None = None,
        logs: dict[str, TransparencyLog] | None = None,
        on_log=None,
    ):
        self.world = world
        self.coverage = coverage
        self.registry = registry
        self.anchors = anchors
        self.wallets = wallets
        self.policy = policy or ChannelSelectionPolicy()
        self.params = params
        self.stores = dict(stores or {})
        self.logs = logs if logs is not None else {}
        self.on_log = on_log
        self._messages = 0

    def log_for(self, node_id: str) -> TransparencyLog:
        log = self.logs.get(node_id)
        if log is None:
            log = self.logs[node_id] = TransparencyLog(node_id, self.on_log)
        return log

    def wallet(self, node_id: str) -> PseudonymWallet:
        try:
            return self.wallets[node_id]
        except KeyError:
            raise InvalidCredential(f"{node_id} holds no pseudonym credentials") from None

    def coverage_state(self, at: SimTime) -> CoverageState:
        return CoverageState.snapshot(self.world, self.coverage, at, self.params)

    def next_message_id(self) -> str:
        self._messages += 1
        return f"m{self._messages:06d}"

    def send(
        self,
        sender: str,
        service_id: str,
        payload: bytes,
        at: SimTime,
        address: Address | None = None,
        fault: Fault | None = None,
    ) -> Transmission:
        service = self.registry.get(service_id)
        self.world.node(sender)
        address = address or service.default_address or Unicast(service.provider_id)

        wallet = self.wallet(sender)
        cert = wallet.current(service_id, at)
        purpose = fault.purpose if fault and fault.kind == "wrong_purpose" else service.purpose

        encrypted = isinstance(address, Unicast) and service.personal
        body = bytes(payload)
        if encrypted:
            target = self.world.node(address.node_id)
            body = self.world.node(sender).platform.encrypt_for(target.encryption_public, body).to_bytes()

        message_id = self.next_message_id()
        tbs = signed_tuple_bytes(message_id, address, service.msg_class, purpose, body, at)
        signature = self.world.node(sender).platform.sign(wallet.handle(cert), tbs)
        envelope = MessageEnvelope(
            message_id, cert.pseudonym_id, address, service.msg_class, purpose, body, signature, cert, encrypted, at
        )

        state = self.coverage_state(at)
        decision = select_channel(self.policy, service.msg_class, address, state, sender)
        recipients = reachable_recipients(state, decision.chosen, address, sender)
        arrival = at + self.params.latency_ms[decision.chosen]
        report = DeliveryReport(decision.chosen, at, tuple((r, arrival) for r in recipients))
        self.log_for(sender).append(cert.pseudonym_id, cert.pseudonym_id, "send", purpose, at)
        if fault and fault.kind == "bitflip":
            envelope = tamper(envelope, fault.bit)
        return Transmission(envelope, service_id, sender, decision, report, service.personal)

    def receive(self, envelope: MessageEnvelope, recipient: str, service_id: str, at: SimTime) -> Reception:
        service = self.registry.get(service_id)
        node = self.world.node(recipient)
        log = self.log_for(recipient)

        def drop(reason: str) -> Reception:
            log.append(recipient, envelope.sender_pseudonym, f"drop:{reason}", envelope.purpose, at)
            return Reception(recipient, False, reason)

        if not verify(envelope.cert.public_key, envelope.signed_bytes(), envelope.signature):
            return drop(INTEGRITY_FAILURE)
        try:
            check_pseudonym(envelope.cert, self.anchors, at, service.msg_class.value)
        except HybridItsError as exc:
            return drop(exc.reason)
        if envelope.purpose != service.purpose:
            return drop(PURPOSE_MISMATCH)

        plaintext = envelope.payload
        if envelope.encrypted:
            try:
                plaintext = node.platform.decrypt(node.encryption_key, CipherBlob.from_bytes(envelope.payload))
            except AuthFailure:
                return drop(INTEGRITY_FAILURE)

        record = violation = None
        store = self.stores.get(service_id)
        if store is not None and recipient == service.provider_id and service.personal:
            try:
                fields = decode_fields(plaintext)
            except ValueError:
                return drop("MalformedPayload")
            record, violation = store.collect(envelope.sender_pseudonym, fields, at)
        log.append(recipient, envelope.sender_pseudonym, "receive", envelope.purpose, at)
        return Reception(recipient, True, "accepted", plaintext, record, violation)


def dispatch(
    network: SystemsNetwork,
    sender: str,
    service_id: str,
    payload: bytes,
    at: SimTime,
    address: Address | None = None,
    fault: Fault | None = None,
) -> DeliveryReport:
    """Send and let every reachable recipient process the envelope on arrival."""
    tx = network.send(sender, service_id, payload, at, address, fault)
    accepted, dropped = [], []
    for recipient, arrival in tx.report.recipients:
        rx = network.receive(tx.envelope, recipient, service_id, arrival)
        if rx.accepted:
            accepted.append((recipient, arrival))
        else:
            dropped.append((recipient, rx.reason))
    return DeliveryReport(tx.report.channel, at, tuple(accepted), tuple(dropped))
