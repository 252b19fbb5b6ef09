import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import Testbed
from hybridits.channels import (
    ADDRESS_MODES_BY_CHANNEL,
    DEFAULT_PARAMS,
    ChannelKind,
    ChannelParams,
    Circle,
    CoverageModel,
    CoverageState,
    RadioSite,
    capabilities,
    rfid_proximity_auth,
    transmit,
)
from hybridits.core_model import (
    LEGAL_PLANE,
    GeoBroadcast,
    GeoPosition,
    MessageClass,
    MessageEnvelope,
    NodeKind,
    Plane,
    Proximity,
    RegionalBroadcast,
    Unicast,
    World,
    distance,
    register_node,
)
from hybridits.credentials import TrustAnchors
from hybridits.errors import (
    InvalidCredential,
    NoBackChannel,
    NodeUnknown,
    OutOfCoverage,
    OutOfRange,
    RevokedCredential,
    UnsupportedAddress,
)
from hybridits.privacy.translog import TransparencyLog
from hybridits.security import PublicKey, SignedBlob

FIELD_KINDS = [NodeKind.VEHICLE, NodeKind.SMARTPHONE, NodeKind.CHARGING_STATION, NodeKind.TRAFFIC_LIGHT, NodeKind.ACCESS_BARRIER]


def envelope(address):
    dummy = PublicKey("ed25519", bytes(32))
    return MessageEnvelope("m1", "p", address, MessageClass.TIME_CRITICAL_LOCAL, "t", b"", SignedBlob(b"", dummy), None, False, 0)


def world_with(nodes):
    world = World(seed=0)
    for node_id, kind, x, y in nodes:
        register_node(world, kind, LEGAL_PLANE[kind], GeoPosition(x, y), node_id)
    return world


def test_dab_capability_has_no_back_channel():
    cap = capabilities(ChannelKind.DAB)
    assert not cap.back_channel and cap.supports_broadcast and not cap.supports_unicast


def test_rfid_default_range_is_three_metres():
    assert capabilities(ChannelKind.RFID).max_range_m == 3


def test_cellular_is_bidirectional_unicast_without_range():
    cap = capabilities(ChannelKind.CELLULAR)
    assert cap.bidirectional and cap.supports_unicast and cap.max_range_m is None


def test_capability_invariants_hold():
    assert capabilities(ChannelKind.ITS_G5).max_range_m <= 1000
    assert capabilities(ChannelKind.RFID).max_range_m <= 10
    latencies = [capabilities(k).fixed_latency_ms for k in (ChannelKind.RFID, ChannelKind.ITS_G5, ChannelKind.CELLULAR, ChannelKind.DAB)]
    assert latencies == sorted(latencies)


def test_params_reject_out_of_bound_ranges():
    with pytest.raises(ValueError):
        ChannelParams(g5_range_m=1500)
    with pytest.raises(ValueError):
        ChannelParams(rfid_range_m=20)


def test_param_overrides():
    p = DEFAULT_PARAMS.with_overrides({"g5_range_m": 500, "latency_ms": {"dab": 2000}})
    assert p.g5_range_m == 500 and p.latency_ms[ChannelKind.DAB] == 2000
    assert capabilities(ChannelKind.DAB, p).fixed_latency_ms == 2000


def test_coverage_rejects_bad_radii():
    with pytest.raises(ValueError):
        Circle(GeoPosition(0, 0), 0)
    with pytest.raises(ValueError):
        RadioSite("s", GeoPosition(0, 0), -1)


def test_g5_geo_broadcast_reaches_node_at_150m():
    world = world_with([("a", NodeKind.VEHICLE, 0, 0), ("b", NodeKind.VEHICLE, 150, 0)])
    report = transmit(world, CoverageModel(), ChannelKind.ITS_G5, envelope(GeoBroadcast(GeoPosition(0, 0), 300)), "a", 1000)
    assert report.recipients == (("b", 1010),)


def test_g5_range_caps_large_radius():
    world = world_with([("a", NodeKind.VEHICLE, 0, 0), ("b", NodeKind.VEHICLE, 350, 0)])
    report = transmit(world, CoverageModel(), ChannelKind.ITS_G5, envelope(GeoBroadcast(GeoPosition(0, 0), 900)), "a", 0)
    assert report.recipients == ()


def test_remote_sender_on_dab_has_no_back_channel():
    world = world_with([("car", NodeKind.VEHICLE, 0, 0), ("op", NodeKind.SERVICE_PROVIDER, 0, 0)])
    cov = CoverageModel(dab_regions={"r": Circle(GeoPosition(0, 0), 100)})
    with pytest.raises(NoBackChannel):
        transmit(world, cov, ChannelKind.DAB, envelope(RegionalBroadcast("r")), "car", 0)


@pytest.mark.parametrize("kind", FIELD_KINDS)
@pytest.mark.parametrize("address", [Unicast("op"), RegionalBroadcast("r"), GeoBroadcast(GeoPosition(0, 0), 5)])
def test_every_remote_sender_blocked_on_dab(kind, address):
    world = world_with([("field", kind, 0, 0), ("op", NodeKind.SERVICE_PROVIDER, 0, 0)])
    cov = CoverageModel(dab_regions={"r": Circle(GeoPosition(0, 0), 100)})
    with pytest.raises(NoBackChannel):
        transmit(world, cov, ChannelKind.DAB, envelope(address), "field", 0)


def test_unicast_over_dab_unsupported():
    world = world_with([("op", NodeKind.SERVICE_PROVIDER, 0, 0), ("car", NodeKind.VEHICLE, 0, 0)])
    with pytest.raises(UnsupportedAddress):
        transmit(world, CoverageModel(), ChannelKind.DAB, envelope(Unicast("car")), "op", 0)


def test_cellular_dead_zone_blocks_sender_and_target():
    world = world_with([("car", NodeKind.VEHICLE, 0, 0), ("op", NodeKind.SERVICE_PROVIDER, 0, 0), ("far", NodeKind.VEHICLE, 500, 0)])
    cov = CoverageModel(cellular_dead_zones=(Circle(GeoPosition(0, 0), 50),))
    with pytest.raises(OutOfCoverage):
        transmit(world, cov, ChannelKind.CELLULAR, envelope(Unicast("op")), "car", 0)
    with pytest.raises(OutOfCoverage):
        transmit(world, cov, ChannelKind.CELLULAR, envelope(Unicast("car")), "op", 0)
    report = transmit(world, cov, ChannelKind.CELLULAR, envelope(Unicast("far")), "op", 0)
    assert report.recipients == (("far", 100),)


def test_rfid_transmit_is_unsupported():
    world = world_with([("a", NodeKind.ACCESS_BARRIER, 0, 0), ("b", NodeKind.VEHICLE, 1, 0)])
    with pytest.raises(UnsupportedAddress):
        transmit(world, CoverageModel(), ChannelKind.RFID, envelope(Proximity("a")), "b", 0)


def test_address_modes_table():
    assert ADDRESS_MODES_BY_CHANNEL[ChannelKind.DAB] == {"regional_broadcast"}
    assert ADDRESS_MODES_BY_CHANNEL[ChannelKind.RFID] == {"proximity"}


def test_unknown_sender():
    with pytest.raises(NodeUnknown):
        transmit(World(), CoverageModel(), ChannelKind.CELLULAR, envelope(Unicast("x")), "ghost", 0)


def test_infrastructure_g5_broadcast_relays_through_stations():
    world = world_with([
        ("op", NodeKind.SERVICE_PROVIDER, 5000, 5000),
        ("irs", NodeKind.ROADSIDE_STATION, 0, 0),
        ("near", NodeKind.VEHICLE, 30, 0),
        ("inside-circle-out-of-station", NodeKind.VEHICLE, 0, 95),
        ("outside-circle", NodeKind.VEHICLE, 150, 0),
    ])
    cov = CoverageModel(g5_stations=(RadioSite("irs", GeoPosition(0, 0), 80),))
    report = transmit(world, cov, ChannelKind.ITS_G5, envelope(GeoBroadcast(GeoPosition(0, 0), 100)), "op", 0)
    assert report.recipient_ids == ["near"]


# ---- brute-force oracles -------------------------------------------------

def g5_oracle(nodes, stations, sender, center, radius, g5_range):
    """Every node checked against the reachability rule from first principles."""
    pos = {n: GeoPosition(x, y) for n, _, x, y in nodes}
    kinds = {n: k for n, k, _, _ in nodes}
    sender_is_field = LEGAL_PLANE[kinds[sender]] is Plane.REMOTE or sender in stations
    reach = stations.get(sender, g5_range)
    out = set()
    for n, kind, x, y in nodes:
        if n == sender or LEGAL_PLANE[kind] is not Plane.REMOTE:
            continue
        if ((x - center.x) ** 2 + (y - center.y) ** 2) ** 0.5 > radius:
            continue
        if sender_is_field:
            ok = distance(pos[sender], pos[n]) <= reach
        else:
            ok = any(distance(pos[s], pos[n]) <= r for s, r in stations.items())
        if ok:
            out.add(n)
    return out


def random_topology(rng, n_nodes):
    nodes = []
    for i in range(n_nodes):
        kind = rng.choice(FIELD_KINDS + [NodeKind.ROADSIDE_STATION, NodeKind.SERVICE_PROVIDER])
        nodes.append((f"n{i}", kind, rng.uniform(-800, 800), rng.uniform(-800, 800)))
    stations = {n: rng.uniform(50, 400) for n, k, _, _ in nodes if k is NodeKind.ROADSIDE_STATION}
    return nodes, stations


def g5_discrepancies(seed):
    rng = random.Random(seed)
    nodes, stations = random_topology(rng, rng.randint(2, 50))
    world = world_with(nodes)
    cov = CoverageModel(g5_stations=tuple(RadioSite(n, world.node(n).position_at(0), r) for n, r in stations.items()))
    g5_range = rng.uniform(100, 1000)
    params = ChannelParams(g5_range_m=g5_range)
    sender = rng.choice(nodes)[0]
    center = GeoPosition(rng.uniform(-800, 800), rng.uniform(-800, 800))
    radius = rng.uniform(1, 900)
    expected = g5_oracle(nodes, stations, sender, center, radius, g5_range)
    try:
        got = set(transmit(world, cov, ChannelKind.ITS_G5, envelope(GeoBroadcast(center, radius)), sender, 0, params).recipient_ids)
    except OutOfCoverage:
        got = set()
    return expected ^ got


@pytest.mark.parametrize("seed", range(25))
def test_g5_recipients_match_brute_force(seed):
    assert g5_discrepancies(seed) == set()


def test_dab_recipients_independent_of_sender_position():
    rng = random.Random(3)
    nodes = [(f"v{i}", NodeKind.VEHICLE, rng.uniform(-9000, 9000), rng.uniform(-9000, 9000)) for i in range(40)]
    cov = CoverageModel(dab_regions={"r": Circle(GeoPosition(0, 0), 5000)})
    results = set()
    for sx, sy in [(0, 0), (20000, -5000), (-3, 7)]:
        world = world_with(nodes + [("op", NodeKind.SERVICE_PROVIDER, sx, sy)])
        results.add(tuple(transmit(world, cov, ChannelKind.DAB, envelope(RegionalBroadcast("r")), "op", 0).recipient_ids))
    assert len(results) == 1


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(list(ChannelKind)), st.integers(min_value=0, max_value=10**9))
def test_arrival_is_send_time_plus_fixed_latency(kind, at):
    world = world_with([("op", NodeKind.SERVICE_PROVIDER, 0, 0), ("irs", NodeKind.ROADSIDE_STATION, 0, 0), ("car", NodeKind.VEHICLE, 10, 0)])
    cov = CoverageModel(dab_regions={"r": Circle(GeoPosition(0, 0), 100)}, g5_stations=(RadioSite("irs", GeoPosition(0, 0), 300),))
    address = {
        ChannelKind.CELLULAR: Unicast("car"),
        ChannelKind.ITS_G5: GeoBroadcast(GeoPosition(0, 0), 50),
        ChannelKind.DAB: RegionalBroadcast("r"),
        ChannelKind.RFID: Proximity("irs"),
    }[kind]
    if kind is ChannelKind.RFID:
        with pytest.raises(UnsupportedAddress):
            transmit(world, cov, kind, envelope(address), "op", at)
        return
    report = transmit(world, cov, kind, envelope(address), "op", at)
    assert report.recipients
    assert all(arrival == at + capabilities(kind).fixed_latency_ms for _, arrival in report.recipients)
    assert not set(report.recipient_ids) & {n for n, _ in report.dropped}


def test_coverage_state_snapshot_positions():
    world = world_with([("car", NodeKind.VEHICLE, 3, 4)])
    state = CoverageState.snapshot(world, CoverageModel(), 0)
    assert state.positions["car"] == GeoPosition(3, 4)
    assert not state.in_dead_zone("car")


# ---- RFID proximity authentication ---------------------------------------

@pytest.fixture
def barrier():
    bed = Testbed(seed=5, coverage=CoverageModel(rfid_readers=(RadioSite("gate", GeoPosition(0, 0), 3),)))
    bed.add("gate", NodeKind.ACCESS_BARRIER, GeoPosition(0, 0))
    bed.add("near", NodeKind.VEHICLE, GeoPosition(1, 0))
    bed.add("far", NodeKind.VEHICLE, GeoPosition(10, 0))
    return bed


def auth(bed, holder, log=None, cert=None):
    cert = cert or bed.wallets[holder].current("access", 0)
    return rfid_proximity_auth(bed.world, bed.coverage, "gate", holder, cert, 0, TrustAnchors.of(bed.pa), log=log)


def test_rfid_in_range_valid_credential_granted(barrier):
    log = TransparencyLog("gate")
    result = auth(barrier, "near", log)
    assert result.granted and result.reason == "granted"
    assert [e.operation for e in log] == ["rfid_auth:granted"]
    assert log.entries[0].subject == result.pseudonym_id


def test_rfid_out_of_range(barrier):
    log = TransparencyLog("gate")
    with pytest.raises(OutOfRange):
        auth(barrier, "far", log)
    assert [e.operation for e in log] == ["rfid_auth:OutOfRange"]


def test_rfid_revoked_credential(barrier):
    cert = barrier.wallets["near"].current("access", 0)
    barrier.pa.crl.revoke(cert.pseudonym_id)
    with pytest.raises(RevokedCredential):
        auth(barrier, "near", cert=cert)


def test_rfid_stolen_credential_fails_possession(barrier):
    stolen = barrier.wallets["far"].current("access", 0)
    with pytest.raises(InvalidCredential):
        auth(barrier, "near", cert=stolen)


def test_rfid_unregistered_reader(barrier):
    cert = barrier.wallets["near"].current("access", 0)
    with pytest.raises(NodeUnknown):
        rfid_proximity_auth(barrier.world, barrier.coverage, "near", "far", cert, 0, TrustAnchors.of(barrier.pa))


def test_all_kind_plane_pairs_on_dab():
    for kind, plane in itertools.product(NodeKind, Plane):
        if LEGAL_PLANE[kind] is not plane or kind is NodeKind.GOVERNANCE_AUTHORITY:
            continue
        world = world_with([("s", kind, 0, 0), ("car", NodeKind.VEHICLE, 1, 1)])
        cov = CoverageModel(dab_regions={"r": Circle(GeoPosition(0, 0), 10)})
        if plane is Plane.REMOTE:
            with pytest.raises(NoBackChannel):
                transmit(world, cov, ChannelKind.DAB, envelope(RegionalBroadcast("r")), "s", 0)
        else:
            assert "car" in transmit(world, cov, ChannelKind.DAB, envelope(RegionalBroadcast("r")), "s", 0).recipient_ids
