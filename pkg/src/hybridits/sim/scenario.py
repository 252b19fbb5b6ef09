"""Scenario model and the YAML scenario file format (version 1).

Grammar, as YAML mappings (``?`` marks optional keys)::

    version: 1                       # mandatory
    name: <str>
    description?: <str>
    nodes:
      - id: <str>
        kind: vehicle | smartphone | charging_station | traffic_light |
              access_barrier | roadside_station | service_provider |
              network_operator | governance_authority
        plane?: backend | network | remote     # defaults to the legal plane
        position?: [x, y]                      # fixed node, meters
        trajectory?: [[t_ms, x, y], ...]       # scripted waypoints instead
    coverage?:
      cellular_dead_zones?: [{center: [x, y], radius: r}, ...]
      dab_regions?: {<region id>: {center: [x, y], radius: r}, ...}
      g5_stations?: [{node: <roadside station id>, range?: m}, ...]
      rfid_readers?: [{node: <node id>, range?: m}, ...]
    channels?:                                 # overrides of channel defaults
      g5_range_m?: m
      rfid_range_m?: m
      latency_ms?: {cellular|its_g5|dab|rfid: ms}
    pseudonym_policy?:
      strategy: per_service | time_rotation | per_service_and_time | single_identity
      period_ms?: ms
      pool_size?: n
    services:
      - id: <str>
        provider: <node id>
        class: time_critical_local | wide_area_public | user_specific | proximity_auth
        purpose: <str>
        fields?: [<allowed field name>, ...]   # empty => no personal data
        settings?: [<setting name>, ...]       # user settings kept per subject
        address?: <address>                    # default: unicast to provider
        reply?: {fields: {<name>: <value>}}     # provider answers each accepted request
    actions:                                   # sorted by ``at``
      - at: ms
        every?: ms                             # repeat ...
        until?: ms                             # ... up to and including this time
        <one of>:
          dispatch: {sender, service, fields?: {..}, text?: str, address?: <address>,
                     fault?: {kind: bitflip|wrong_purpose, bit?: n, purpose?: str}}
          revoke: {node, service}              # revoke the node's current pseudonym
          revoke_enrollment: {node}
          subject_request: {subject, services: [..], kind: review|correct|delete|export,
                            record?: id, field?: name, value?: str}
          port: {subject, from: service, to: service}
          rfid_auth: {reader, holder, service}

    <address> is one of
      {unicast: <node id>} | {geo: {center: [x, y], radius: r}} |
      {geo_around_sender: r} | {region: <region id>} | {proximity: <reader id>}
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..channels import DEFAULT_PARAMS, ChannelParams, Circle, CoverageModel, RadioSite
from ..core_model import (
    LEGAL_PLANE,
    Address,
    GeoBroadcast,
    GeoPosition,
    MessageClass,
    NodeKind,
    Plane,
    Proximity,
    RegionalBroadcast,
    Trajectory,
    Unicast,
    Waypoint,
)
from ..credentials import PseudonymPolicy, Strategy
from ..errors import ScenarioInvalid

FORMAT_VERSION = 1
ACTION_TYPES = ("dispatch", "revoke", "revoke_enrollment", "subject_request", "port", "rfid_auth")
RESERVED_IDS = ("enrollment-authority", "pseudonym-authority", "data-protection-contact")


@dataclass(frozen=True)
class GeoAroundSender:
    """Geo-broadcast centered wherever the sender is at send time."""

    radius: float

    mode = "geo_broadcast"


@dataclass(frozen=True)
class NodeSpec:
    id: str
    kind: NodeKind
    plane: Plane
    trajectory: Trajectory


@dataclass(frozen=True)
class ServiceSpec:
    id: str
    provider: str
    msg_class: MessageClass
    purpose: str
    fields: tuple[str, ...] = ()
    settings: tuple[str, ...] = ()
    address: Address | GeoAroundSender | None = None
    reply_fields: dict | None = None


@dataclass(frozen=True)
class Action:
    at: int
    type: str
    params: dict


@dataclass
class Scenario:
    name: str
    nodes: list[NodeSpec]
    coverage: CoverageModel
    channel_params: ChannelParams
    pseudonym_policy: PseudonymPolicy
    services: list[ServiceSpec]
    actions: list[Action]
    description: str = ""
    source: dict = field(default_factory=dict, repr=False, compare=False)

    def node_ids(self) -> set[str]:
        return {n.id for n in self.nodes}

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.source, sort_keys=False)


def _fail(location: str, message: str):
    raise ScenarioInvalid(location, message)


def _need(data: dict, key: str, location: str):
    if key not in data:
        _fail(f"{location}.{key}", "missing")
    return data[key]


def _enum(cls, value, location):
    try:
        return cls(value)
    except ValueError:
        options = ", ".join(m.value for m in cls)
        _fail(location, f"{value!r} is not one of: {options}")


def _position(value, location) -> GeoPosition:
    try:
        x, y = value
        return GeoPosition(float(x), float(y))
    except (TypeError, ValueError):
        _fail(location, f"expected [x, y], got {value!r}")


def parse_address(value, location: str) -> Address | GeoAroundSender:
    if not isinstance(value, dict) or len(value) != 1:
        _fail(location, "address must be a mapping with exactly one key")
    (key, arg), = value.items()
    try:
        if key == "unicast":
            return Unicast(str(arg))
        if key == "geo":
            return GeoBroadcast(_position(_need(arg, "center", location), f"{location}.geo.center"), float(arg["radius"]))
        if key == "geo_around_sender":
            if float(arg) <= 0:
                raise ValueError("radius must be positive")
            return GeoAroundSender(float(arg))
        if key == "region":
            return RegionalBroadcast(str(arg))
        if key == "proximity":
            return Proximity(str(arg))
    except (KeyError, TypeError, ValueError) as exc:
        _fail(location, str(exc))
    _fail(location, f"unknown address kind {key!r}")


def _parse_node(data, location) -> NodeSpec:
    node_id = str(_need(data, "id", location))
    kind = _enum(NodeKind, _need(data, "kind", location), f"{location}.kind")
    plane = _enum(Plane, data["plane"], f"{location}.plane") if "plane" in data else LEGAL_PLANE[kind]
    if plane is not LEGAL_PLANE[kind]:
        _fail(f"{location}.plane", f"{kind.value} cannot be on the {plane.value} plane")
    if "trajectory" in data:
        try:
            waypoints = tuple(Waypoint(int(t), GeoPosition(float(x), float(y))) for t, x, y in data["trajectory"])
            trajectory = Trajectory(waypoints)
        except (TypeError, ValueError) as exc:
            _fail(f"{location}.trajectory", str(exc))
    else:
        trajectory = Trajectory.fixed(_position(_need(data, "position", location), f"{location}.position"))
    return NodeSpec(node_id, kind, plane, trajectory)


def _parse_circle(data, location) -> Circle:
    try:
        return Circle(_position(_need(data, "center", location), f"{location}.center"), float(_need(data, "radius", location)))
    except ValueError as exc:
        _fail(location, str(exc))


def scenario_from_dict(data: dict) -> Scenario:
    """Parse and validate; the first violation raises :class:`ScenarioInvalid`."""
    if not isinstance(data, dict):
        _fail("<root>", "scenario must be a mapping")
    version = _need(data, "version", "<root>")
    if version != FORMAT_VERSION:
        _fail("version", f"unsupported version {version!r} (expected {FORMAT_VERSION})")
    name = str(_need(data, "name", "<root>"))

    nodes = []
    seen: set[str] = set()
    for i, raw in enumerate(_need(data, "nodes", "<root>")):
        spec = _parse_node(raw, f"nodes[{i}]")
        if spec.id in seen or spec.id in RESERVED_IDS:
            _fail(f"nodes[{i}].id", f"duplicate or reserved id {spec.id!r}")
        seen.add(spec.id)
        nodes.append(spec)
    by_id = {n.id: n for n in nodes}

    cov = data.get("coverage") or {}
    zones = tuple(_parse_circle(z, f"coverage.cellular_dead_zones[{i}]") for i, z in enumerate(cov.get("cellular_dead_zones", [])))
    regions = {str(k): _parse_circle(v, f"coverage.dab_regions.{k}") for k, v in (cov.get("dab_regions") or {}).items()}
    params = DEFAULT_PARAMS
    if data.get("channels"):
        try:
            params = DEFAULT_PARAMS.with_overrides(data["channels"])
        except (ValueError, TypeError) as exc:
            _fail("channels", str(exc))

    def sites(key: str, default_range: float, kinds: tuple[NodeKind, ...] | None) -> tuple[RadioSite, ...]:
        out = []
        for i, raw in enumerate(cov.get(key, [])):
            loc = f"coverage.{key}[{i}]"
            node_id = str(_need(raw, "node", loc))
            if node_id not in by_id:
                _fail(f"{loc}.node", f"unknown node {node_id!r}")
            if kinds and by_id[node_id].kind not in kinds:
                _fail(f"{loc}.node", f"{node_id} is a {by_id[node_id].kind.value}")
            rng = float(raw.get("range", default_range))
            if not rng > 0:
                _fail(f"{loc}.range", "must be positive")
            out.append(RadioSite(node_id, by_id[node_id].trajectory.position_at(0), rng))
        return tuple(out)

    stations = sites("g5_stations", params.g5_range_m, (NodeKind.ROADSIDE_STATION,))
    readers = sites("rfid_readers", params.rfid_range_m, None)
    try:
        coverage = CoverageModel(zones, regions, stations, readers)
    except ValueError as exc:
        _fail("coverage", str(exc))

    pol = data.get("pseudonym_policy") or {"strategy": "per_service"}
    try:
        policy = PseudonymPolicy(
            _enum(Strategy, pol.get("strategy"), "pseudonym_policy.strategy"),
            pol.get("period_ms"),
            int(pol.get("pool_size", 20)),
        )
    except ValueError as exc:
        _fail("pseudonym_policy", str(exc))

    services = []
    for i, raw in enumerate(_need(data, "services", "<root>")):
        loc = f"services[{i}]"
        sid = str(_need(raw, "id", loc))
        if sid in {s.id for s in services}:
            _fail(f"{loc}.id", f"duplicate service id {sid!r}")
        provider = str(_need(raw, "provider", loc))
        if provider not in by_id:
            _fail(f"{loc}.provider", f"unknown node {provider!r}")
        address = parse_address(raw["address"], f"{loc}.address") if "address" in raw else None
        _check_address_refs(address, by_id, regions, f"{loc}.address")
        purpose = str(_need(raw, "purpose", loc))
        if not purpose:
            _fail(f"{loc}.purpose", "must be non-empty")
        reply = raw.get("reply")
        services.append(
            ServiceSpec(
                sid,
                provider,
                _enum(MessageClass, _need(raw, "class", loc), f"{loc}.class"),
                purpose,
                tuple(str(f) for f in raw.get("fields", [])),
                tuple(str(f) for f in raw.get("settings", [])),
                address,
                dict(reply.get("fields", {})) if reply else None,
            )
        )
    service_ids = {s.id for s in services}

    actions = []
    last_at = None
    for i, raw in enumerate(data.get("actions") or []):
        loc = f"actions[{i}]"
        at = int(_need(raw, "at", loc))
        if at < 0:
            _fail(f"{loc}.at", "time must be non-negative")
        if last_at is not None and at < last_at:
            _fail(f"{loc}.at", f"actions must be sorted by time ({at} < {last_at})")
        last_at = at
        kinds = [k for k in ACTION_TYPES if k in raw]
        if len(kinds) != 1:
            _fail(loc, f"exactly one of {', '.join(ACTION_TYPES)} required")
        kind = kinds[0]
        args = dict(raw[kind])
        _check_action(kind, args, by_id, service_ids, regions, f"{loc}.{kind}")
        every, until = raw.get("every"), raw.get("until")
        if every is None:
            actions.append(Action(at, kind, args))
            continue
        every, until = int(every), int(until if until is not None else at)
        if every <= 0:
            _fail(f"{loc}.every", "must be positive")
        for t in range(at, until + 1, every):
            actions.append(Action(t, kind, args))
    actions.sort(key=lambda a: a.at)  # stable: preserves file order at equal times

    return Scenario(name, nodes, coverage, params, policy, services, actions, str(data.get("description", "")), copy.deepcopy(data))


def _check_address_refs(address, by_id, regions, location) -> None:
    if isinstance(address, Unicast) and address.node_id not in by_id:
        _fail(location, f"unknown node {address.node_id!r}")
    if isinstance(address, RegionalBroadcast) and address.region_id not in regions:
        _fail(location, f"undeclared region {address.region_id!r}")
    if isinstance(address, Proximity) and address.reader_id not in by_id:
        _fail(location, f"unknown reader {address.reader_id!r}")


def _check_action(kind: str, params: dict, by_id, service_ids, regions, location) -> None:
    def node(key):
        value = _need(params, key, location)
        if value not in by_id:
            _fail(f"{location}.{key}", f"unknown node {value!r}")

    def service(key):
        value = _need(params, key, location)
        if value not in service_ids:
            _fail(f"{location}.{key}", f"unknown service {value!r}")

    if kind == "dispatch":
        node("sender")
        service("service")
        if "address" in params:
            params["address"] = parse_address(params["address"], f"{location}.address")
            _check_address_refs(params["address"], by_id, regions, f"{location}.address")
        if "fault" in params and params["fault"].get("kind") not in ("bitflip", "wrong_purpose"):
            _fail(f"{location}.fault.kind", "must be bitflip or wrong_purpose")
    elif kind == "revoke":
        node("node")
        service("service")
    elif kind == "revoke_enrollment":
        node("node")
    elif kind == "subject_request":
        node("subject")
        services = _need(params, "services", location)
        if not isinstance(services, list) or not services:
            _fail(f"{location}.services", "non-empty list required")
        for j, sid in enumerate(services):
            if sid not in service_ids:
                _fail(f"{location}.services[{j}]", f"unknown service {sid!r}")
        if params.get("kind") not in ("review", "correct", "delete", "export"):
            _fail(f"{location}.kind", "must be review, correct, delete or export")
    elif kind == "port":
        node("subject")
        service("from")
        service("to")
    elif kind == "rfid_auth":
        node("reader")
        node("holder")
        service("service")


def load_scenario(path: str | Path) -> Scenario:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioInvalid(str(path), f"not valid YAML: {exc}") from None
    return scenario_from_dict(data)
