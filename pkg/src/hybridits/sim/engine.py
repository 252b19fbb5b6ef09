"""Deterministic discrete-event engine.

Events run in ``(time, insertion order)`` order. The seed only feeds the
per-node secure platforms (keys, pseudonym ids, nonces); geometry and the
action script are explicit in the scenario.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Any, Callable

from ..channels import rfid_proximity_auth
from ..core_model import GeoBroadcast, GeoPosition, NodeKind, Plane, Unicast, World, register_node
from ..credentials import (
    EnrollmentAuthority,
    PseudonymAuthority,
    PseudonymWallet,
    TrustAnchors,
    enroll,
)
from ..errors import HybridItsError
from ..network_plane import (
    Fault,
    ServiceDescriptor,
    ServiceRegistry,
    SystemsNetwork,
    Transmission,
    encode_fields,
)
from ..privacy.mediator import DataProtectionContact, mediate_request, prepare_requests
from ..privacy.model import DataSchema
from ..privacy.rights import ProviderStore, RequestKind, SubjectRequest, authenticate, handle_subject_request
from .metrics import Metrics, MetricsCollector
from .scenario import RESERVED_IDS, GeoAroundSender, Scenario
from .trace import TraceWriter

EA_ID, PA_ID, CONTACT_ID = RESERVED_IDS


class _Wallets(dict):
    """Wallets provisioned on first use, so idle nodes cost nothing."""

    def __init__(self, factory: Callable[[str], PseudonymWallet]):
        super().__init__()
        self._factory = factory

    def __missing__(self, node_id: str) -> PseudonymWallet:
        wallet = self[node_id] = self._factory(node_id)
        return wallet


@dataclass
class RunResult:
    metrics: Metrics
    trace: TraceWriter
    simulation: "Simulation"

    @property
    def trace_text(self) -> str:
        return self.trace.text()

    @property
    def digest(self) -> str:
        return self.trace.digest()


class Simulation:
    def __init__(self, scenario: Scenario, seed: int):
        self.scenario = scenario
        self.seed = seed
        self.trace = TraceWriter()
        self.collector = MetricsCollector()
        self.now = 0
        self._queue: list[tuple[int, int, str, Any]] = []
        self._order = itertools.count()
        self._accepted: list[tuple[Transmission, str, int]] = []

        world = self.world = World(seed)
        for spec in scenario.nodes:
            register_node(world, spec.kind, spec.plane, spec.trajectory, spec.id)
        for reserved in RESERVED_IDS:
            register_node(world, NodeKind.GOVERNANCE_AUTHORITY, Plane.BACKEND, GeoPosition(0.0, 0.0), reserved)
        world.seal()

        self.ea = EnrollmentAuthority(EA_ID, world.node(EA_ID).platform, world)
        self.pa = PseudonymAuthority(PA_ID, world.node(PA_ID).platform, self.ea)
        self.anchors = TrustAnchors.of(self.pa)
        self.enrollments = {spec.id: enroll(self.ea, world.node(spec.id), 0) for spec in scenario.nodes}

        def provision(node_id: str) -> PseudonymWallet:
            node = world.node(node_id)
            return PseudonymWallet.provision(node, scenario.pseudonym_policy, self.pa, self.enrollments[node_id], self.now)

        self.wallets = _Wallets(provision)
        self.registry = ServiceRegistry(self.ea.public_key, self.ea.crl)
        self.services = {s.id: s for s in scenario.services}
        for spec in scenario.services:
            schema = DataSchema(spec.purpose, frozenset(spec.fields) | frozenset(spec.settings))
            default = spec.address if not isinstance(spec.address, GeoAroundSender) else None
            self.registry.register(
                ServiceDescriptor(spec.id, spec.provider, spec.msg_class, schema, self.enrollments[spec.provider], default),
                at=0,
            )

        self.network = SystemsNetwork(
            world,
            scenario.coverage,
            self.registry,
            self.anchors,
            self.wallets,
            params=scenario.channel_params,
            on_log=self._on_log,
        )
        for descriptor in self.registry:
            if descriptor.personal:
                self.network.stores[descriptor.service_id] = ProviderStore(
                    descriptor.service_id,
                    descriptor.provider_id,
                    descriptor.schema,
                    self.anchors,
                    self.network.log_for(descriptor.provider_id),
                    setting_names=frozenset(self.services[descriptor.service_id].settings),
                )
        self.contact = DataProtectionContact(CONTACT_ID, self.network.stores, self.network.log_for(CONTACT_ID))

        for action in scenario.actions:
            self._schedule(action.at, action.type, action.params)

    # plumbing

    def _schedule(self, at: int, kind: str, payload: Any) -> None:
        heapq.heappush(self._queue, (at, next(self._order), kind, payload))

    def _emit(self, event: str, **data) -> None:
        self.trace.emit(self.now, event, **data)

    def _on_log(self, log, entry) -> None:
        self._emit("log", owner=log.owner, **entry.to_dict())

    def run(self) -> RunResult:
        handlers = {
            "dispatch": self._dispatch,
            "arrive": self._arrive,
            "revoke": self._revoke,
            "revoke_enrollment": self._revoke_enrollment,
            "subject_request": self._subject_request,
            "port": self._port,
            "rfid_auth": self._rfid_auth,
        }
        while self._queue:
            at, _, kind, payload = heapq.heappop(self._queue)
            self.now = at
            handlers[kind](payload)
        return self._finish()

    def _finish(self) -> RunResult:
        logs_ok = True
        for owner in sorted(self.network.logs):
            log = self.network.logs[owner]
            ok = log.verify_chain()
            logs_ok &= ok
            self._emit("log_verified", owner=owner, entries=len(log), ok=ok)
        metrics = self.collector.finish(logs_ok, self._audit_complete())
        self._emit("metrics", **metrics.to_dict())
        return RunResult(metrics, self.trace, self)

    def _audit_complete(self) -> bool:
        def has(owner: str, operation: str, subject: str, purpose: str, at: int) -> bool:
            log = self.network.logs.get(owner)
            return log is not None and any(
                e.operation == operation and e.subject == subject and e.purpose == purpose and e.at == at for e in log
            )

        for tx, recipient, arrived in self._accepted:
            env = tx.envelope
            if not has(tx.sender, "send", env.sender_pseudonym, env.purpose, env.created_at):
                return False
            if not has(recipient, "receive", env.sender_pseudonym, env.purpose, arrived):
                return False
        return True

    # handlers

    def _dispatch(self, params: dict) -> None:
        sender, service_id = params["sender"], params["service"]
        spec = self.services[service_id]
        address = params.get("address", spec.address)
        if isinstance(address, GeoAroundSender):
            address = GeoBroadcast(self.world.node(sender).position_at(self.now), address.radius)
        if "fields" in params:
            payload = encode_fields(params["fields"])
        else:
            payload = str(params.get("text", "")).encode()
        fault = Fault(**params["fault"]) if params.get("fault") else None

        try:
            tx = self.network.send(sender, service_id, payload, self.now, address, fault)
        except HybridItsError as exc:
            self.collector.on_send_failure(exc.reason)
            self._emit("send_failed", sender=sender, service=service_id, reason=exc.reason)
            return

        env = tx.envelope
        pos = self.world.node(sender).position_at(self.now)
        self.collector.on_send(
            env.message_id, sender, env.sender_pseudonym, service_id, pos, self.now,
            tx.personal, env.address.mode == "unicast", env.encrypted, bool(fault and fault.kind == "bitflip"),
        )
        self._emit(
            "send",
            message=env.message_id,
            sender=sender,
            pseudonym=env.sender_pseudonym,
            service=service_id,
            **{"class": env.msg_class.value},
            purpose=env.purpose,
            address_mode=env.address.mode,
            personal=tx.personal,
            encrypted=env.encrypted,
            x=pos.x,
            y=pos.y,
            fault=fault.kind if fault else None,
        )
        self._emit("route", message=env.message_id, **tx.decision.to_dict())
        for recipient, arrival in tx.report.recipients:
            self._schedule(arrival, "arrive", (tx, recipient))

    def _arrive(self, payload: tuple[Transmission, str]) -> None:
        tx, recipient = payload
        env = tx.envelope
        rx = self.network.receive(env, recipient, tx.service_id, self.now)
        channel = tx.report.channel
        if not rx.accepted:
            self.collector.on_drop(channel)
            self._emit("drop", message=env.message_id, recipient=recipient, channel=channel.value, reason=rx.reason)
            return
        self._accepted.append((tx, recipient, self.now))
        self.collector.on_delivery(env.message_id, channel, self.now - tx.report.sent_at)
        self._emit("deliver", message=env.message_id, recipient=recipient, channel=channel.value, sent_at=tx.report.sent_at)
        if rx.violation is not None:
            v = rx.violation
            self.collector.on_violation(tx.service_id, v.record_id, v.extra_fields)
            self._emit("violation", service=tx.service_id, record=v.record_id, fields=sorted(v.extra_fields))

        spec = self.services[tx.service_id]
        if spec.reply_fields is not None and recipient == spec.provider and tx.sender != spec.provider:
            # the access network knows the connection the request came in on
            reply = {"sender": spec.provider, "service": spec.id, "fields": spec.reply_fields, "address": Unicast(tx.sender)}
            self._schedule(self.now, "dispatch", reply)

    def _revoke(self, params: dict) -> None:
        cert = self.wallets[params["node"]].current(params["service"], self.now)
        self.pa.crl.revoke(cert.pseudonym_id)
        self._emit("crl", **self.pa.crl.snapshot())

    def _revoke_enrollment(self, params: dict) -> None:
        self.ea.revoke_node(params["node"])
        self._emit("crl", **self.ea.crl.snapshot())

    def _request_for(self, params: dict) -> SubjectRequest:
        kind = RequestKind(params["kind"])
        if kind is RequestKind.CORRECT:
            return SubjectRequest.correct(str(params["record"]), str(params["field"]), str(params["value"]))
        return SubjectRequest(kind)

    def _respond(self, service_id: str, ok: bool, error: str | None, records: int, settings: int) -> None:
        self.collector.on_subject_outcome(ok)
        self._emit("subject_response", service=service_id, ok=ok, error=error, records=records, settings=settings)

    def _subject_request(self, params: dict) -> None:
        subject, services = params["subject"], list(params["services"])
        request = self._request_for(params)
        self._emit("subject_request", subject=subject, services=services, kind=request.kind.value)
        try:
            signed = prepare_requests(self.wallets[subject], services, request, self.now)
        except HybridItsError as exc:
            for sid in services:
                self._respond(sid, False, exc.reason, 0, 0)
            return
        result = mediate_request(self.contact, signed, self.now)
        for outcome in result.outcomes:
            response = outcome.response
            self._respond(
                outcome.service_id,
                outcome.ok,
                outcome.error,
                len(response.records) if response else 0,
                len(response.settings) if response else 0,
            )

    def _port(self, params: dict) -> None:
        subject, source, target = params["subject"], params["from"], params["to"]
        self._emit("subject_request", subject=subject, services=[source, target], kind="port")
        wallet = self.wallets[subject]
        for service_id, step in ((source, "export"), (target, "import")):
            try:
                if step == "export":
                    exported = handle_subject_request(
                        self.network.stores[source], authenticate(wallet, source, SubjectRequest.export(), self.now)
                    )
                    response = exported
                else:
                    request = SubjectRequest.import_(exported.bundle)
                    response = handle_subject_request(self.network.stores[target], authenticate(wallet, target, request, self.now))
            except (HybridItsError, KeyError) as exc:
                reason = exc.reason if isinstance(exc, HybridItsError) else "UnknownService"
                self._respond(service_id, False, reason, 0, 0)
                return
            self._respond(service_id, True, None, len(response.records), len(response.settings))

    def _rfid_auth(self, params: dict) -> None:
        reader, holder = params["reader"], params["holder"]
        cert = self.wallets[holder].current(params["service"], self.now)
        try:
            result = rfid_proximity_auth(
                self.world,
                self.scenario.coverage,
                reader,
                holder,
                cert,
                self.now,
                self.anchors,
                log=self.network.log_for(reader),
            )
            granted, reason = result.granted, result.reason
        except HybridItsError as exc:
            granted, reason = False, exc.reason
        self._emit("auth", reader=reader, holder=holder, pseudonym=cert.pseudonym_id, granted=granted, reason=reason)
        if granted and self.world.node(reader).kind is NodeKind.ACCESS_BARRIER:
            self._emit("actuate", node=reader, action="open")


def run_scenario(scenario: Scenario, seed: int) -> RunResult:
    return Simulation(scenario, seed).run()
