import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from hybridits.core_model import GeoPosition, distance
from hybridits.errors import EmptyTrace
from hybridits.privacy.linkability import (
    IdentifierEquality,
    Observation,
    SpatioTemporal,
    adversary_by_name,
    analyze_linkability,
)


def obs(p, s, x, t, y=0.0):
    return Observation(p, s, GeoPosition(x, y), t)


def test_single_identity_full_recall():
    o = [obs("id1", "A", 0, 0), obs("id1", "B", 500, 100_000), obs("id2", "A", 900, 0), obs("id2", "B", 9000, 80_000)]
    truth = {"id1": "car1", "id2": "car2"}
    report = analyze_linkability(o, IdentifierEquality(), truth, cross_service_only=True)
    assert report.recall == 1.0 and report.precision == 1.0


def test_per_service_zero_cross_service_recall():
    o = [obs("p1", "A", 0, 0), obs("p2", "B", 500, 100_000)]
    report = analyze_linkability(o, IdentifierEquality(), {"p1": "car", "p2": "car"}, cross_service_only=True)
    assert report.candidate_links == () and report.recall == 0.0 and report.true_links == 1


def test_empty_trace():
    with pytest.raises(EmptyTrace):
        analyze_linkability([], IdentifierEquality(), {})


def brute_force_links(observations, dt, dd):
    links = set()
    for a, b in itertools.combinations(observations, 2):
        if a.profile == b.profile:
            continue
        if abs(a.at - b.at) <= dt and distance(a.position, b.position) <= dd:
            links.add(tuple(sorted((a.profile, b.profile))))
    return links


def two_vehicle_script():
    out = []
    for t in range(0, 60_000, 2_000):
        slot = t // 20_000
        out.append(obs(f"a{slot}", "nav", 14 * t / 1000, t))
        out.append(obs(f"b{slot}", "nav", 14 * t / 1000 + 30, t + 500, y=20))
    return out


def test_spatiotemporal_matches_all_pairs_enumeration():
    o = two_vehicle_script()
    truth = {f"{v}{s}": v for v in "ab" for s in range(3)}
    report = analyze_linkability(o, SpatioTemporal(), truth)
    assert set(report.candidate_links) == brute_force_links(o, 5000, 50.0)


@settings(max_examples=60)
@given(
    st.lists(
        st.tuples(
            st.sampled_from(["p1", "p2", "p3", "p4"]),
            st.sampled_from(["A", "B"]),
            st.integers(0, 200),
            st.integers(0, 200),
            st.integers(0, 20_000),
        ),
        min_size=1,
        max_size=25,
    ),
    st.integers(100, 8000),
    st.floats(1, 150),
)
def test_spatiotemporal_sliding_window_equals_brute_force(rows, dt, dd):
    o = [Observation(p, s, GeoPosition(x, y), t) for p, s, x, y, t in rows]
    truth = {p: p[-1] for p, *_ in rows}
    report = analyze_linkability(o, SpatioTemporal(dt, dd), truth)
    assert set(report.candidate_links) == brute_force_links(o, dt, dd)


def test_precision_and_recall_against_truth():
    o = [obs("x", "A", 0, 0), obs("y", "A", 10, 1000), obs("z", "A", 20, 2000)]
    truth = {"x": "car1", "y": "car1", "z": "car2"}
    report = analyze_linkability(o, SpatioTemporal(), truth)
    # candidates: x-y (true), y-z (false), x-z (false)
    assert report.precision == pytest.approx(1 / 3)
    assert report.recall == 1.0


def test_cross_service_filter_restricts_both_sides():
    o = [obs("x", "A", 0, 0), obs("y", "A", 10, 1000), obs("y", "B", 10, 1000)]
    truth = {"x": "car", "y": "car"}
    report = analyze_linkability(o, SpatioTemporal(), truth, cross_service_only=True)
    assert all(a[1] != b[1] for a, b in report.candidate_links)
    assert report.true_links == 2


def test_metric_bounds_random():
    rng = random.Random(2)
    for _ in range(20):
        o = [obs(f"p{rng.randint(0, 6)}", rng.choice("AB"), rng.uniform(0, 100), rng.randint(0, 10_000)) for _ in range(20)]
        truth = {f"p{i}": f"car{i % 3}" for i in range(7)}
        for adversary in (IdentifierEquality(), SpatioTemporal()):
            r = analyze_linkability(o, adversary, truth)
            assert 0.0 <= r.precision <= 1.0 and 0.0 <= r.recall <= 1.0


def test_adversary_lookup():
    assert adversary_by_name("identifier-equality") == IdentifierEquality()
    assert adversary_by_name("spatio-temporal", dt_ms=10) == SpatioTemporal(10, 50.0)
    with pytest.raises(ValueError):
        adversary_by_name("oracle")


def test_report_dict():
    r = analyze_linkability([obs("a", "A", 0, 0), obs("a", "B", 0, 0)], IdentifierEquality(), {"a": "n"})
    assert r.to_dict()["candidate_links"] == [[["a", "A"], ["a", "B"]]]
