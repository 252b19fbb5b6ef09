"""Domain vocabulary: planes, nodes, geometry, time and message envelopes.

Signed-tuple encoding
---------------------
The signature of a :class:`MessageEnvelope` covers the byte string produced by
:meth:`MessageEnvelope.signed_bytes`: the six fields

    message_id, address, class, purpose, payload, created_at

each written as a 4-byte big-endian unsigned length followed by the field
bytes. ``message_id`` and ``purpose`` are UTF-8; ``class`` is the
:class:`MessageClass` value in UTF-8; ``payload`` is raw (the serialized
cipher blob when encrypted); ``created_at`` is the decimal ASCII form of the
millisecond timestamp. ``address`` is UTF-8 of one of::

    unicast|<node id>
    geo|<x>|<y>|<radius>          floats written with repr()
    region|<region id>
    proximity|<reader node id>
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Iterator, Union

from .errors import DuplicateId, KindPlaneMismatch, NodeUnknown, WorldSealed
from .security import KeyHandle, KeyPurpose, PublicKey, SecurePlatform, SignedBlob, derive_seed

if TYPE_CHECKING:
    from .credentials import PseudonymCertificate

SimTime = int  # milliseconds since scenario start
PurposeTag = str


class Plane(Enum):
    BACKEND = "backend"
    NETWORK = "network"
    REMOTE = "remote"


class NodeKind(Enum):
    VEHICLE = "vehicle"
    SMARTPHONE = "smartphone"
    CHARGING_STATION = "charging_station"
    TRAFFIC_LIGHT = "traffic_light"
    ACCESS_BARRIER = "access_barrier"
    ROADSIDE_STATION = "roadside_station"
    SERVICE_PROVIDER = "service_provider"
    NETWORK_OPERATOR = "network_operator"
    GOVERNANCE_AUTHORITY = "governance_authority"


LEGAL_PLANE: dict[NodeKind, Plane] = {
    NodeKind.VEHICLE: Plane.REMOTE,
    NodeKind.SMARTPHONE: Plane.REMOTE,
    NodeKind.CHARGING_STATION: Plane.REMOTE,
    NodeKind.TRAFFIC_LIGHT: Plane.REMOTE,
    NodeKind.ACCESS_BARRIER: Plane.REMOTE,
    NodeKind.ROADSIDE_STATION: Plane.NETWORK,
    NodeKind.SERVICE_PROVIDER: Plane.BACKEND,
    NodeKind.NETWORK_OPERATOR: Plane.NETWORK,
    NodeKind.GOVERNANCE_AUTHORITY: Plane.BACKEND,
}


class MessageClass(Enum):
    TIME_CRITICAL_LOCAL = "time_critical_local"
    WIDE_AREA_PUBLIC = "wide_area_public"
    USER_SPECIFIC = "user_specific"
    PROXIMITY_AUTH = "proximity_auth"


@dataclass(frozen=True)
class GeoPosition:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite position ({self.x}, {self.y})")


def distance(a: GeoPosition, b: GeoPosition) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


@dataclass(frozen=True)
class Waypoint:
    at: SimTime
    position: GeoPosition


@dataclass(frozen=True)
class Trajectory:
    """Scripted waypoints, linearly interpolated and clamped at both ends."""

    waypoints: tuple[Waypoint, ...]

    def __post_init__(self):
        if not self.waypoints:
            raise ValueError("trajectory needs at least one waypoint")
        times = [w.at for w in self.waypoints]
        if times != sorted(times):
            raise ValueError("waypoints must be sorted by time")

    @classmethod
    def fixed(cls, position: GeoPosition) -> "Trajectory":
        return cls((Waypoint(0, position),))

    def position_at(self, t: SimTime) -> GeoPosition:
        pts = self.waypoints
        if t <= pts[0].at:
            return pts[0].position
        for prev, nxt in zip(pts, pts[1:]):
            if t <= nxt.at:
                span = nxt.at - prev.at
                if span == 0:
                    return nxt.position
                f = (t - prev.at) / span
                return GeoPosition(
                    prev.position.x + f * (nxt.position.x - prev.position.x),
                    prev.position.y + f * (nxt.position.y - prev.position.y),
                )
        return pts[-1].position


@dataclass(frozen=True)
class Unicast:
    node_id: str

    mode = "unicast"

    def encode(self) -> str:
        return f"unicast|{self.node_id}"


@dataclass(frozen=True)
class GeoBroadcast:
    center: GeoPosition
    radius: float

    mode = "geo_broadcast"

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("geo-broadcast radius must be positive")

    def encode(self) -> str:
        return f"geo|{self.center.x!r}|{self.center.y!r}|{self.radius!r}"


@dataclass(frozen=True)
class RegionalBroadcast:
    region_id: str

    mode = "regional_broadcast"

    def encode(self) -> str:
        return f"region|{self.region_id}"


@dataclass(frozen=True)
class Proximity:
    reader_id: str

    mode = "proximity"

    def encode(self) -> str:
        return f"proximity|{self.reader_id}"


Address = Union[Unicast, GeoBroadcast, RegionalBroadcast, Proximity]
ADDRESS_MODES = ("unicast", "geo_broadcast", "regional_broadcast", "proximity")


def _length_prefixed(parts: Iterable[bytes]) -> bytes:
    return b"".join(struct.pack(">I", len(p)) + p for p in parts)


def signed_tuple_bytes(
    message_id: str, address: Address, msg_class: MessageClass, purpose: str, payload: bytes, created_at: SimTime
) -> bytes:
    return _length_prefixed(
        (
            message_id.encode(),
            address.encode().encode(),
            msg_class.value.encode(),
            purpose.encode(),
            bytes(payload),
            str(created_at).encode(),
        )
    )


@dataclass(frozen=True)
class MessageEnvelope:
    message_id: str
    sender_pseudonym: str
    address: Address
    msg_class: MessageClass
    purpose: PurposeTag
    payload: bytes
    signature: SignedBlob
    cert: "PseudonymCertificate"
    encrypted: bool
    created_at: SimTime

    def signed_bytes(self) -> bytes:
        return signed_tuple_bytes(
            self.message_id, self.address, self.msg_class, self.purpose, self.payload, self.created_at
        )


@dataclass(frozen=True)
class Node:
    id: str
    kind: NodeKind
    plane: Plane
    trajectory: Trajectory
    platform: SecurePlatform = field(repr=False, compare=False)
    identity_key: KeyHandle = field(repr=False, compare=False)
    encryption_key: KeyHandle = field(repr=False, compare=False)

    def position_at(self, t: SimTime) -> GeoPosition:
        return self.trajectory.position_at(t)

    @property
    def identity_public(self) -> PublicKey:
        return self.platform.public_key(self.identity_key)

    @property
    def encryption_public(self) -> PublicKey:
        return self.platform.public_key(self.encryption_key)


class World:
    """Registry of nodes. Open for setup until :meth:`seal` is called.

    ``seed=None`` gives every platform system entropy; an integer seed makes
    each platform's randomness a function of ``(seed, node id)``.
    """

    def __init__(self, seed: int | None = 0):
        self.seed = seed
        self._nodes: dict[str, Node] = {}
        self._counter = 0
        self._sealed = False

    def seal(self) -> None:
        self._sealed = True

    @property
    def sealed(self) -> bool:
        return self._sealed

    def __contains__(self, node_id: object) -> bool:
        return node_id in self._nodes

    def __iter__(self) -> Iterator[Node]:
        return iter(self._nodes.values())

    def __len__(self) -> int:
        return len(self._nodes)

    def node(self, node_id: str) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise NodeUnknown(node_id) from None

    def _fresh_id(self) -> str:
        while True:
            self._counter += 1
            candidate = f"node-{self._counter:04d}"
            if candidate not in self._nodes:
                return candidate

    def make_platform(self, platform_id: str) -> SecurePlatform:
        seed = None if self.seed is None else derive_seed(self.seed, f"platform/{platform_id}")
        return SecurePlatform(platform_id, seed)


def register_node(
    world: World,
    kind: NodeKind,
    plane: Plane,
    position: GeoPosition | Trajectory,
    node_id: str | None = None,
) -> str:
    if world.sealed:
        raise WorldSealed("world is no longer open for setup")
    if LEGAL_PLANE[kind] is not plane:
        raise KindPlaneMismatch(f"{kind.value} cannot live on the {plane.value} plane")
    if node_id is None:
        node_id = world._fresh_id()
    elif node_id in world:
        raise DuplicateId(node_id)
    trajectory = position if isinstance(position, Trajectory) else Trajectory.fixed(position)
    platform = world.make_platform(node_id)
    identity = platform.generate_key(KeyPurpose.LONG_TERM_IDENTITY)
    encryption = platform.generate_key(KeyPurpose.ENCRYPTION)
    world._nodes[node_id] = Node(node_id, kind, plane, trajectory, platform, identity, encryption)
    return node_id
