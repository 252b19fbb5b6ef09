"""Simulated channel adapters for the four access technologies.

Reachability rules (evaluated on node positions at the send time):

Cellular
    Everywhere except declared dead zones; Backend-plane nodes are wired and
    never in a dead zone. Unicast reaches the target when neither end is in a
    dead zone. Regional broadcast reaches Remote-plane nodes inside the region
    and outside dead zones.
ITS-G5
    Field nodes (Remote plane, or a registered roadside station) transmit
    directly: a geo-broadcast reaches Remote-plane nodes within the sender's
    radio range *and* inside the target circle, which with the circle centered
    on the sender is "within min(radius, range) of the sender". Other senders
    go through roadside stations: a receiver must be inside the target circle
    and within range of some station. Unicast works directly between field
    nodes in range, or through stations when both ends are attached to one.
DAB+
    Downlink only. Senders must be on the Backend or Network plane; every
    Remote-plane node inside the region receives, wherever the sender is.
RFID
    No free transmission; readers authenticate tags through
    :func:`rfid_proximity_auth`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from types import MappingProxyType
from typing import Mapping

from .core_model import (
    Address,
    GeoBroadcast,
    GeoPosition,
    MessageEnvelope,
    Plane,
    Proximity,
    SimTime,
    Unicast,
    World,
    distance,
)
from .credentials import PseudonymCertificate, TrustAnchors, check_pseudonym
from .errors import (
    HybridItsError,
    InvalidCredential,
    NoBackChannel,
    NodeUnknown,
    OutOfCoverage,
    OutOfRange,
    UnsupportedAddress,
)
from .privacy.translog import TransparencyLog
from .security import verify


class ChannelKind(Enum):
    CELLULAR = "cellular"
    ITS_G5 = "its_g5"
    DAB = "dab"
    RFID = "rfid"


@dataclass(frozen=True)
class ChannelCapability:
    bidirectional: bool
    back_channel: bool
    supports_unicast: bool
    supports_broadcast: bool
    max_range_m: float | None
    fixed_latency_ms: int


@dataclass(frozen=True)
class ChannelParams:
    """Configurable ranges and latencies; defaults order channels by time-criticality."""

    g5_range_m: float = 300.0
    rfid_range_m: float = 3.0
    latency_ms: Mapping[ChannelKind, int] = field(
        default_factory=lambda: MappingProxyType(
            {ChannelKind.RFID: 5, ChannelKind.ITS_G5: 10, ChannelKind.CELLULAR: 100, ChannelKind.DAB: 1000}
        )
    )

    def __post_init__(self):
        if not 0 < self.g5_range_m <= 1000:
            raise ValueError("ITS-G5 range must be in (0, 1000] m")
        if not 0 < self.rfid_range_m <= 10:
            raise ValueError("RFID range must be in (0, 10] m")
        if set(self.latency_ms) != set(ChannelKind) or any(v < 0 for v in self.latency_ms.values()):
            raise ValueError("latency needed for every channel, non-negative")

    def with_overrides(self, overrides: Mapping) -> "ChannelParams":
        latency = dict(self.latency_ms)
        for name, value in dict(overrides.get("latency_ms", {})).items():
            latency[ChannelKind(name)] = int(value)
        return replace(
            self,
            g5_range_m=float(overrides.get("g5_range_m", self.g5_range_m)),
            rfid_range_m=float(overrides.get("rfid_range_m", self.rfid_range_m)),
            latency_ms=MappingProxyType(latency),
        )

    def to_dict(self) -> dict:
        return {
            "g5_range_m": self.g5_range_m,
            "rfid_range_m": self.rfid_range_m,
            "latency_ms": {k.value: v for k, v in self.latency_ms.items()},
        }


DEFAULT_PARAMS = ChannelParams()

ADDRESS_MODES_BY_CHANNEL: dict[ChannelKind, frozenset[str]] = {
    ChannelKind.CELLULAR: frozenset({"unicast", "regional_broadcast"}),
    ChannelKind.ITS_G5: frozenset({"unicast", "geo_broadcast"}),
    ChannelKind.DAB: frozenset({"regional_broadcast"}),
    ChannelKind.RFID: frozenset({"proximity"}),
}


def capabilities(kind: ChannelKind, params: ChannelParams = DEFAULT_PARAMS) -> ChannelCapability:
    latency = params.latency_ms[kind]
    if kind is ChannelKind.CELLULAR:
        return ChannelCapability(True, True, True, True, None, latency)
    if kind is ChannelKind.ITS_G5:
        return ChannelCapability(True, True, True, True, params.g5_range_m, latency)
    if kind is ChannelKind.DAB:
        return ChannelCapability(False, False, False, True, None, latency)
    return ChannelCapability(True, True, True, False, params.rfid_range_m, latency)


def supports_address(kind: ChannelKind, address: Address) -> bool:
    return address.mode in ADDRESS_MODES_BY_CHANNEL[kind]


@dataclass(frozen=True)
class Circle:
    center: GeoPosition
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    def contains(self, p: GeoPosition) -> bool:
        return distance(self.center, p) <= self.radius


@dataclass(frozen=True)
class RadioSite:
    node_id: str
    position: GeoPosition
    range_m: float

    def __post_init__(self):
        if not self.range_m > 0:
            raise ValueError(f"{self.node_id}: range must be positive")

    def reaches(self, p: GeoPosition) -> bool:
        return distance(self.position, p) <= self.range_m


@dataclass(frozen=True)
class CoverageModel:
    cellular_dead_zones: tuple[Circle, ...] = ()
    dab_regions: Mapping[str, Circle] = field(default_factory=dict)
    g5_stations: tuple[RadioSite, ...] = ()
    rfid_readers: tuple[RadioSite, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "cellular_dead_zones", tuple(self.cellular_dead_zones))
        object.__setattr__(self, "dab_regions", MappingProxyType(dict(self.dab_regions)))
        object.__setattr__(self, "g5_stations", tuple(self.g5_stations))
        object.__setattr__(self, "rfid_readers", tuple(self.rfid_readers))
        for sites in (self.g5_stations, self.rfid_readers):
            ids = [s.node_id for s in sites]
            if len(ids) != len(set(ids)):
                raise ValueError("duplicate radio site id")

    def reader(self, node_id: str) -> RadioSite | None:
        return next((r for r in self.rfid_readers if r.node_id == node_id), None)

    def station(self, node_id: str) -> RadioSite | None:
        return next((s for s in self.g5_stations if s.node_id == node_id), None)


@dataclass(frozen=True)
class DeliveryReport:
    channel: ChannelKind
    sent_at: SimTime
    recipients: tuple[tuple[str, SimTime], ...] = ()
    dropped: tuple[tuple[str, str], ...] = ()

    @property
    def recipient_ids(self) -> list[str]:
        return [r for r, _ in self.recipients]


@dataclass(frozen=True)
class CoverageState:
    """Snapshot of positions and coverage at one instant; channel logic reads only this."""

    at: SimTime
    positions: Mapping[str, GeoPosition]
    planes: Mapping[str, Plane]
    coverage: CoverageModel
    params: ChannelParams = DEFAULT_PARAMS

    @classmethod
    def snapshot(
        cls, world: World, coverage: CoverageModel, at: SimTime, params: ChannelParams = DEFAULT_PARAMS
    ) -> "CoverageState":
        positions = {n.id: n.position_at(at) for n in world}
        planes = {n.id: n.plane for n in world}
        return cls(at, MappingProxyType(positions), MappingProxyType(planes), coverage, params)

    def _require(self, node_id: str) -> GeoPosition:
        try:
            return self.positions[node_id]
        except KeyError:
            raise NodeUnknown(node_id) from None

    # cellular
    def in_dead_zone(self, node_id: str) -> bool:
        pos = self._require(node_id)
        if self.planes[node_id] is Plane.BACKEND:
            return False
        return any(zone.contains(pos) for zone in self.coverage.cellular_dead_zones)

    # ITS-G5
    def is_g5_field_node(self, node_id: str) -> bool:
        return self.planes[node_id] is Plane.REMOTE or self.coverage.station(node_id) is not None

    def g5_tx_range(self, node_id: str) -> float:
        station = self.coverage.station(node_id)
        return station.range_m if station else self.params.g5_range_m

    def g5_attached(self, node_id: str) -> bool:
        if self.coverage.station(node_id) is not None:
            return True
        pos = self._require(node_id)
        return any(s.reaches(pos) for s in self.coverage.g5_stations)

    def g5_unicast_reachable(self, sender: str, target: str) -> bool:
        if sender == target:
            return False
        sender_field, target_field = self.is_g5_field_node(sender), self.is_g5_field_node(target)
        if sender_field and target_field:
            direct = distance(self._require(sender), self._require(target)) <= self.g5_tx_range(sender)
            return direct or (self.g5_attached(sender) and self.g5_attached(target))
        if sender_field:
            return self.g5_attached(sender)
        if target_field:
            return self.g5_attached(target)
        return False

    def remote_nodes(self, exclude: str | None = None) -> list[str]:
        return [n for n, plane in self.planes.items() if plane is Plane.REMOTE and n != exclude]

    def g5_geo_recipients(self, sender: str, address: GeoBroadcast) -> list[str]:
        area = Circle(address.center, address.radius)
        candidates = [n for n in self.remote_nodes(exclude=sender) if area.contains(self.positions[n])]
        if self.is_g5_field_node(sender):
            origin, reach = self._require(sender), self.g5_tx_range(sender)
            return [n for n in candidates if distance(origin, self.positions[n]) <= reach]
        return [n for n in candidates if any(s.reaches(self.positions[n]) for s in self.coverage.g5_stations)]

    def region(self, region_id: str) -> Circle:
        try:
            return self.coverage.dab_regions[region_id]
        except KeyError:
            raise UnsupportedAddress(f"undeclared region {region_id!r}") from None


def reachable_recipients(state: CoverageState, kind: ChannelKind, address: Address, sender: str) -> list[str]:
    """Recipient ids for one transmission, or the error that prevents it."""
    state._require(sender)
    if kind is ChannelKind.DAB and state.planes[sender] is Plane.REMOTE:
        raise NoBackChannel(f"{sender} is a remote node; DAB has no back channel")
    if not supports_address(kind, address):
        raise UnsupportedAddress(f"{address.mode} over {kind.value}")

    if kind is ChannelKind.CELLULAR:
        if state.in_dead_zone(sender):
            raise OutOfCoverage(f"sender {sender} in cellular dead zone")
        if isinstance(address, Unicast):
            if state.in_dead_zone(address.node_id):
                raise OutOfCoverage(f"target {address.node_id} in cellular dead zone")
            return [address.node_id]
        region = state.region(address.region_id)
        return [
            n for n in state.remote_nodes(exclude=sender) if region.contains(state.positions[n]) and not state.in_dead_zone(n)
        ]

    if kind is ChannelKind.ITS_G5:
        if isinstance(address, Unicast):
            state._require(address.node_id)
            if not state.g5_unicast_reachable(sender, address.node_id):
                raise OutOfCoverage(f"{address.node_id} not reachable over ITS-G5 from {sender}")
            return [address.node_id]
        if not state.is_g5_field_node(sender) and not state.coverage.g5_stations:
            raise OutOfCoverage("no roadside station to relay ITS-G5 broadcast")
        return state.g5_geo_recipients(sender, address)

    if kind is ChannelKind.DAB:
        region = state.region(address.region_id)
        return [n for n in state.remote_nodes(exclude=sender) if region.contains(state.positions[n])]

    raise UnsupportedAddress("RFID carries only proximity authentication; use rfid_proximity_auth")


def admits(state: CoverageState, kind: ChannelKind, address: Address, sender: str) -> tuple[bool, str]:
    """Whether ``kind`` can carry ``address`` from ``sender`` in this coverage state."""
    if kind is ChannelKind.RFID:
        if not isinstance(address, Proximity):
            return False, "UnsupportedAddress"
        reader = state.coverage.reader(address.reader_id)
        if reader is None:
            return False, "UnknownReader"
        if not reader.reaches(state._require(sender)):
            return False, "OutOfRange"
        return True, "ok"
    if kind is ChannelKind.ITS_G5 and isinstance(address, GeoBroadcast) and not state.is_g5_field_node(sender):
        if not supports_address(kind, address):
            return False, "UnsupportedAddress"
        relays = [s for s in state.coverage.g5_stations if distance(s.position, address.center) <= s.range_m + address.radius]
        return (True, "ok") if relays else (False, "OutOfCoverage")
    try:
        reachable_recipients(state, kind, address, sender)
    except HybridItsError as exc:
        return False, exc.reason
    return True, "ok"


def transmit(
    world: World,
    coverage: CoverageModel,
    kind: ChannelKind,
    envelope: MessageEnvelope,
    sender: str,
    at: SimTime,
    params: ChannelParams = DEFAULT_PARAMS,
) -> DeliveryReport:
    state = CoverageState.snapshot(world, coverage, at, params)
    recipients = reachable_recipients(state, kind, envelope.address, sender)
    arrival = at + params.latency_ms[kind]
    return DeliveryReport(kind, at, tuple((r, arrival) for r in recipients))


@dataclass(frozen=True)
class AuthResult:
    reader: str
    pseudonym_id: str
    granted: bool
    reason: str
    at: SimTime


ACCESS_PURPOSE = "access-control"


def rfid_proximity_auth(
    world: World,
    coverage: CoverageModel,
    reader: str,
    tag_holder: str,
    credential: PseudonymCertificate,
    at: SimTime,
    anchors: TrustAnchors,
    log: TransparencyLog | None = None,
    purpose: str = ACCESS_PURPOSE,
) -> AuthResult:
    """Challenge-response between a reader and a tag within radio range.

    The holder's platform signs a reader-chosen challenge with the key of
    ``credential``. The outcome is logged before any error propagates.
    """
    site = coverage.reader(reader)
    if site is None:
        raise NodeUnknown(f"{reader} is not a registered RFID reader")
    holder = world.node(tag_holder)
    reader_node = world.node(reader)

    def outcome(reason: str) -> AuthResult:
        granted = reason == "granted"
        if log is not None:
            log.append(reader, credential.pseudonym_id, f"rfid_auth:{reason}", purpose, at)
        return AuthResult(reader, credential.pseudonym_id, granted, reason, at)

    if not site.reaches(holder.position_at(at)):
        outcome(OutOfRange.__name__)
        raise OutOfRange(f"{tag_holder} is {distance(site.position, holder.position_at(at)):.1f} m from {reader}")
    try:
        check_pseudonym(credential, anchors, at)
        challenge = b"rfid-challenge|" + reader.encode() + b"|" + str(at).encode() + b"|" + reader_node.platform.random_bytes(16)
        handle = holder.platform.handle_for(credential.public_key)
        if handle is None or not verify(credential.public_key, challenge, holder.platform.sign(handle, challenge)):
            raise InvalidCredential("holder cannot prove possession of the credential key")
    except HybridItsError as exc:
        outcome(exc.reason)
        raise
    return outcome("granted")
