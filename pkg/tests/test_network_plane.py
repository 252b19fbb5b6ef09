import itertools
from dataclasses import replace

import pytest

from conftest import Testbed
from hybridits.channels import ChannelKind, Circle, CoverageModel, CoverageState, RadioSite
from hybridits.core_model import GeoBroadcast, GeoPosition, MessageClass, NodeKind, RegionalBroadcast, Unicast
from hybridits.errors import (
    DuplicateServiceId,
    InvalidProviderCertificate,
    NoViableChannel,
    UnknownService,
)
from hybridits.network_plane import (
    DEFAULT_PREFERENCES,
    ChannelSelectionPolicy,
    Fault,
    ServiceDescriptor,
    decode_fields,
    dispatch,
    encode_fields,
    flip_bit,
    register_service,
    select_channel,
    tamper,
)
from hybridits.privacy.model import DataSchema
from hybridits.security import CipherBlob


@pytest.fixture
def bed():
    cov = CoverageModel(
        cellular_dead_zones=(Circle(GeoPosition(0, 0), 60),),
        dab_regions={"region": Circle(GeoPosition(0, 0), 5000)},
        g5_stations=(RadioSite("irs", GeoPosition(0, 0), 80),),
    )
    bed = Testbed(seed=13, coverage=cov)
    bed.add("irs", NodeKind.ROADSIDE_STATION, GeoPosition(0, 0))
    bed.add("op", NodeKind.SERVICE_PROVIDER, GeoPosition(3000, 3000))
    bed.add("garage-car", NodeKind.VEHICLE, GeoPosition(10, 10))
    bed.add("street-car", NodeKind.VEHICLE, GeoPosition(1000, 0))
    bed.add("street-car-2", NodeKind.VEHICLE, GeoPosition(1100, 0))
    bed.service("status", "op", MessageClass.USER_SPECIFIC, "fleet-status", fields=["battery"])
    bed.service("hazard", "op", MessageClass.TIME_CRITICAL_LOCAL, "hazard-warning")
    return bed


def state(bed, at=0):
    return CoverageState.snapshot(bed.world, bed.coverage, at)


# registry

def test_register_and_resolve(bed):
    assert bed.registry.get("status").purpose == "fleet-status"
    assert "status" in bed.registry


def test_expired_provider_certificate_rejected(bed):
    ec = bed.enrollments["op"]
    desc = ServiceDescriptor("late", "op", MessageClass.USER_SPECIFIC, DataSchema("late"), ec)
    with pytest.raises(InvalidProviderCertificate):
        register_service(bed.registry, desc, at=ec.not_after + 1)


def test_revoked_or_foreign_provider_certificate_rejected(bed):
    desc = ServiceDescriptor("x", "op", MessageClass.USER_SPECIFIC, DataSchema("x"), bed.enrollments["street-car"])
    with pytest.raises(InvalidProviderCertificate):
        register_service(bed.registry, desc)
    bed.ea.revoke_node("op")
    desc = ServiceDescriptor("y", "op", MessageClass.USER_SPECIFIC, DataSchema("y"), bed.enrollments["op"])
    with pytest.raises(InvalidProviderCertificate):
        register_service(bed.registry, desc)


def test_tampered_provider_certificate_rejected(bed):
    forged = replace(bed.enrollments["op"], not_after=bed.enrollments["op"].not_after * 2)
    desc = ServiceDescriptor("z", "op", MessageClass.USER_SPECIFIC, DataSchema("z"), forged)
    with pytest.raises(InvalidProviderCertificate):
        register_service(bed.registry, desc)


def test_duplicate_service_id(bed):
    with pytest.raises(DuplicateServiceId):
        register_service(bed.registry, bed.registry.get("status"))


def test_unknown_service(bed):
    with pytest.raises(UnknownService):
        bed.registry.get("nope")


def test_replicas_are_interchangeable(bed):
    twin = bed.registry.replicate()
    assert [d.service_id for d in twin] == [d.service_id for d in bed.registry]
    assert twin.get("status") == bed.registry.get("status")


# channel selection

def test_time_critical_geo_broadcast_prefers_g5(bed):
    d = select_channel(ChannelSelectionPolicy(), MessageClass.TIME_CRITICAL_LOCAL, GeoBroadcast(GeoPosition(0, 0), 50), state(bed), "op")
    assert d.chosen is ChannelKind.ITS_G5 and d.fallbacks == ()


def test_wide_area_regional_broadcast_from_backend_uses_dab(bed):
    d = select_channel(ChannelSelectionPolicy(), MessageClass.WIDE_AREA_PUBLIC, RegionalBroadcast("region"), state(bed), "op")
    assert d.chosen is ChannelKind.DAB


def test_wide_area_uplink_falls_back_to_cellular(bed):
    d = select_channel(ChannelSelectionPolicy(), MessageClass.WIDE_AREA_PUBLIC, Unicast("op"), state(bed), "street-car")
    assert d.chosen is ChannelKind.CELLULAR and d.fallbacks == (ChannelKind.DAB,)
    assert "dab:NoBackChannel" in d.reason


def test_user_specific_in_dead_zone_falls_back_to_g5(bed):
    d = select_channel(ChannelSelectionPolicy(), MessageClass.USER_SPECIFIC, Unicast("op"), state(bed), "garage-car")
    assert d.chosen is ChannelKind.ITS_G5 and d.fallbacks == (ChannelKind.CELLULAR,)


def test_user_specific_in_dead_zone_without_station_fails():
    bed = Testbed(seed=1, coverage=CoverageModel(cellular_dead_zones=(Circle(GeoPosition(0, 0), 60),)))
    bed.add("op", NodeKind.SERVICE_PROVIDER, GeoPosition(3000, 3000))
    bed.add("car", NodeKind.VEHICLE, GeoPosition(0, 0))
    with pytest.raises(NoViableChannel):
        select_channel(ChannelSelectionPolicy(), MessageClass.USER_SPECIFIC, Unicast("op"), state(bed), "car")


def test_policy_must_cover_every_class():
    with pytest.raises(ValueError):
        ChannelSelectionPolicy({MessageClass.USER_SPECIFIC: (ChannelKind.CELLULAR,)})
    with pytest.raises(ValueError):
        ChannelSelectionPolicy({**DEFAULT_PREFERENCES, MessageClass.USER_SPECIFIC: ()})


def test_selection_is_deterministic(bed):
    args = (ChannelSelectionPolicy(), MessageClass.USER_SPECIFIC, Unicast("op"), state(bed), "garage-car")
    assert select_channel(*args) == select_channel(*args)


# dispatch pipeline

def test_well_formed_dispatch_is_accepted_and_encrypted(bed):
    net = bed.net()
    tx = net.send("street-car", "status", encode_fields({"battery": "80"}), 0)
    assert tx.envelope.encrypted
    assert b"80" not in tx.envelope.payload
    assert CipherBlob.from_bytes(tx.envelope.payload).recipient == bed.world.node("op").encryption_public
    rx = net.receive(tx.envelope, "op", "status", 100)
    assert rx.accepted and decode_fields(rx.plaintext) == {"battery": "80"}
    assert rx.record.subject == tx.envelope.sender_pseudonym


def test_non_personal_broadcast_not_encrypted(bed):
    report = dispatch(bed.net(), "street-car", "hazard", b"ice", 0, GeoBroadcast(GeoPosition(1000, 0), 200))
    assert report.channel is ChannelKind.ITS_G5
    assert report.recipient_ids == ["street-car-2"]


def test_bitflip_in_transit_is_dropped_and_logged(bed):
    report = dispatch(bed.net(), "street-car", "status", encode_fields({"battery": "1"}), 0, fault=Fault("bitflip", bit=17))
    assert report.recipients == () and report.dropped == (("op", "IntegrityFailure"),)
    assert [e.operation for e in bed.net().log_for("op")] == ["drop:IntegrityFailure"]


def test_revoked_pseudonym_is_dropped(bed):
    cert = bed.wallets["street-car"].current("status", 0)
    bed.pa.crl.revoke(cert.pseudonym_id)
    report = dispatch(bed.net(), "street-car", "status", encode_fields({"battery": "1"}), 0)
    assert report.dropped == (("op", "RevokedCredential"),)


def test_wrong_purpose_is_dropped(bed):
    report = dispatch(bed.net(), "street-car", "status", encode_fields({"battery": "1"}), 0, fault=Fault("wrong_purpose"))
    assert report.dropped == (("op", "PurposeMismatch"),)


def test_sender_and_recipient_both_log(bed):
    net = bed.net()
    tx = net.send("street-car", "status", encode_fields({"battery": "5"}), 0)
    net.receive(tx.envelope, "op", "status", 100)
    sent = net.log_for("street-car").entries[-1]
    got = [e for e in net.log_for("op") if e.operation == "receive"][-1]
    assert (sent.operation, sent.subject, sent.purpose) == ("send", tx.envelope.sender_pseudonym, "fleet-status")
    assert (got.subject, got.purpose, got.at) == (tx.envelope.sender_pseudonym, "fleet-status", 100)


def test_flip_bit_wraps_and_changes_one_bit():
    data = b"\x00\x00"
    assert flip_bit(data, 9) == b"\x00\x02"
    assert flip_bit(data, 16) == b"\x01\x00"


def attempt(bed, sig_ok, unrevoked, purpose_ok):
    net = bed.net()
    if not unrevoked:
        bed.pa.crl.revoke(bed.wallets["street-car"].current("status", 0).pseudonym_id)
    fault = None if purpose_ok else Fault("wrong_purpose")
    env = net.send("street-car", "status", encode_fields({"battery": "1"}), 0, fault=fault).envelope
    if not sig_ok:
        env = tamper(env, 3)
    return net.receive(env, "op", "status", 100)


@pytest.mark.parametrize("sig_ok,unrevoked,purpose_ok", list(itertools.product([True, False], repeat=3)))
def test_acceptance_predicate_cell(bed, sig_ok, unrevoked, purpose_ok):
    rx = attempt(bed, sig_ok, unrevoked, purpose_ok)
    assert rx.accepted == (sig_ok and unrevoked and purpose_ok)
    if not sig_ok:
        assert rx.reason == "IntegrityFailure"
    elif not unrevoked:
        assert rx.reason == "RevokedCredential"
    elif not purpose_ok:
        assert rx.reason == "PurposeMismatch"
