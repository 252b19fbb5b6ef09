"""Adversarial linkability analysis over observed pseudonym usage.

The unit being linked is a *usage profile*: one pseudonym as seen at one
service. Two distinct profiles are truly linked when the ground truth maps
both pseudonyms to the same node. Links are unordered and reported with the
lexicographically smaller profile first.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping, Union

from ..core_model import GeoPosition, distance
from ..errors import EmptyTrace

Profile = tuple[str, str]  # (pseudonym id, service id)
Link = tuple[Profile, Profile]


@dataclass(frozen=True)
class Observation:
    pseudonym: str
    service: str
    position: GeoPosition
    at: int

    @property
    def profile(self) -> Profile:
        return (self.pseudonym, self.service)


@dataclass(frozen=True)
class IdentifierEquality:
    name = "identifier-equality"


@dataclass(frozen=True)
class SpatioTemporal:
    dt_ms: int = 5000
    dd_m: float = 50.0

    name = "spatio-temporal"


Adversary = Union[IdentifierEquality, SpatioTemporal]


def adversary_by_name(name: str, **params) -> Adversary:
    if name == IdentifierEquality.name:
        return IdentifierEquality()
    if name == SpatioTemporal.name:
        return SpatioTemporal(**params)
    raise ValueError(f"unknown adversary {name!r}")


@dataclass(frozen=True)
class LinkabilityReport:
    adversary: str
    candidate_links: tuple[Link, ...]
    true_links: int
    precision: float
    recall: float

    def to_dict(self) -> dict:
        return {
            "adversary": self.adversary,
            "candidate_links": [[list(a), list(b)] for a, b in self.candidate_links],
            "true_links": self.true_links,
            "precision": self.precision,
            "recall": self.recall,
        }


def _ordered(a: Profile, b: Profile) -> Link:
    return (a, b) if a <= b else (b, a)


def _identifier_links(observations: list[Observation]) -> set[Link]:
    services_by_pseudonym: dict[str, set[str]] = {}
    for o in observations:
        services_by_pseudonym.setdefault(o.pseudonym, set()).add(o.service)
    links = set()
    for pseudonym, services in services_by_pseudonym.items():
        for s1, s2 in combinations(sorted(services), 2):
            links.add(((pseudonym, s1), (pseudonym, s2)))
    return links


def _spatiotemporal_links(observations: list[Observation], dt_ms: int, dd_m: float) -> set[Link]:
    ordered = sorted(observations, key=lambda o: o.at)
    links = set()
    start = 0
    for i, o in enumerate(ordered):
        while ordered[start].at < o.at - dt_ms:
            start += 1
        for p in ordered[start:i]:
            if p.profile != o.profile and distance(p.position, o.position) <= dd_m:
                links.add(_ordered(p.profile, o.profile))
    return links


def analyze_linkability(
    observations: Iterable[Observation],
    adversary: Adversary,
    ground_truth: Mapping[str, str],
    cross_service_only: bool = False,
) -> LinkabilityReport:
    """Score an adversary's links against the true pseudonym -> node map.

    With ``cross_service_only`` both candidates and true links are restricted
    to profile pairs at different services.
    """
    observations = list(observations)
    if not observations:
        raise EmptyTrace("no observations to analyze")
    if isinstance(adversary, IdentifierEquality):
        candidates = _identifier_links(observations)
    else:
        candidates = _spatiotemporal_links(observations, adversary.dt_ms, adversary.dd_m)
    if cross_service_only:
        candidates = {l for l in candidates if l[0][1] != l[1][1]}

    by_node: dict[str, set[Profile]] = {}
    for o in observations:
        by_node.setdefault(ground_truth[o.pseudonym], set()).add(o.profile)
    truth = set()
    for profiles in by_node.values():
        for a, b in combinations(sorted(profiles), 2):
            if not cross_service_only or a[1] != b[1]:
                truth.add((a, b))

    hits = len(candidates & truth)
    precision = hits / len(candidates) if candidates else 0.0
    recall = hits / len(truth) if truth else 0.0
    return LinkabilityReport(adversary.name, tuple(sorted(candidates)), len(truth), precision, recall)
