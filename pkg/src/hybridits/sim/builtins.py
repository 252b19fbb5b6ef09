"""Built-in scenarios.

Each one is written as the same mapping a YAML scenario file would hold, so
``hybridits run <name>`` and ``hybridits run file.yaml`` go through one parser.
"""

from __future__ import annotations

import copy

from .scenario import Scenario, scenario_from_dict


def _charging_reservation() -> dict:
    service = {
        "provider": "charge-op",
        "class": "user_specific",
        "purpose": "charging-reservation",
        "fields": ["station_id", "arrival_time", "plug_type", "status"],
        "settings": ["preferred_plug", "language"],
        "reply": {"fields": {"status": "confirmed"}},
    }
    request = {
        "station_id": "cs1",
        "arrival_time": "61000",
        "plug_type": "Type2",
        "status": "requested",
        "preferred_plug": "Type2",
        "language": "de",
    }
    both = ["charging_reservation", "charging_reservation_b"]
    return {
        "version": 1,
        "name": "charging_reservation",
        "description": "An EV reserves a charging point over cellular, then exercises its data-subject rights.",
        "nodes": [
            {"id": "ev1", "kind": "vehicle", "trajectory": [[0, 0, 0], [60000, 800, 0]]},
            {"id": "cs1", "kind": "charging_station", "position": [900, 50]},
            {"id": "charge-op", "kind": "service_provider", "position": [5000, 5000]},
            {"id": "charge-op-b", "kind": "service_provider", "position": [6000, 5000]},
        ],
        "services": [
            {"id": "charging_reservation", **service},
            {"id": "charging_reservation_b", **service, "provider": "charge-op-b"},
        ],
        "actions": [
            {"at": 1000, "dispatch": {"sender": "ev1", "service": "charging_reservation", "fields": request}},
            {"at": 5000, "subject_request": {"subject": "ev1", "services": ["charging_reservation"], "kind": "review"}},
            {
                "at": 6000,
                "subject_request": {
                    "subject": "ev1",
                    "services": ["charging_reservation"],
                    "kind": "correct",
                    "record": "charging_reservation#1",
                    "field": "plug_type",
                    "value": "CCS",
                },
            },
            {"at": 7000, "subject_request": {"subject": "ev1", "services": ["charging_reservation"], "kind": "review"}},
            {"at": 8000, "port": {"subject": "ev1", "from": "charging_reservation", "to": "charging_reservation_b"}},
            {"at": 9000, "subject_request": {"subject": "ev1", "services": both, "kind": "review"}},
            {"at": 10000, "subject_request": {"subject": "ev1", "services": both, "kind": "delete"}},
            {"at": 11000, "subject_request": {"subject": "ev1", "services": both, "kind": "review"}},
        ],
    }


def _parking_garage_positioning() -> dict:
    return {
        "version": 1,
        "name": "parking_garage_positioning",
        "description": "Positioning inside a garage with no cellular coverage, served by a roadside station.",
        "nodes": [
            {"id": "irs-garage", "kind": "roadside_station", "position": [0, 0]},
            {"id": "garage-op", "kind": "service_provider", "position": [2000, 2000]},
            {"id": "veh-a", "kind": "vehicle", "trajectory": [[0, 150, 0], [20000, 5, 0]]},
            {"id": "veh-b", "kind": "vehicle", "position": [10, -15]},
            {"id": "veh-c", "kind": "vehicle", "position": [-25, 20]},
            {"id": "veh-d", "kind": "vehicle", "position": [400, 0]},
        ],
        "coverage": {
            "cellular_dead_zones": [{"center": [0, 0], "radius": 60}],
            "g5_stations": [{"node": "irs-garage", "range": 80}],
        },
        "services": [
            {
                "id": "garage_positioning",
                "provider": "garage-op",
                "class": "time_critical_local",
                "purpose": "garage-positioning",
                "address": {"geo": {"center": [0, 0], "radius": 60}},
            },
            {
                "id": "positioning_correction",
                "provider": "garage-op",
                "class": "user_specific",
                "purpose": "positioning-correction",
                "fields": ["correction"],
            },
        ],
        "actions": [
            {
                "at": 0,
                "every": 1000,
                "until": 30000,
                "dispatch": {"sender": "garage-op", "service": "garage_positioning", "text": "anchor-grid-v1"},
            },
            {
                "at": 500,
                "every": 5000,
                "until": 30000,
                "dispatch": {
                    "sender": "garage-op",
                    "service": "positioning_correction",
                    "fields": {"correction": "dx=0.4,dy=-0.1"},
                    "address": {"unicast": "veh-b"},
                },
            },
            {
                "at": 600,
                "every": 5000,
                "until": 30000,
                "dispatch": {
                    "sender": "garage-op",
                    "service": "positioning_correction",
                    "fields": {"correction": "dx=-0.2,dy=0.3"},
                    "address": {"unicast": "veh-c"},
                },
            },
        ],
    }


REGION_INSIDE = ("veh-in-1", "veh-in-2", "veh-in-3", "phone-in")
REGION_OUTSIDE = ("veh-out-1", "veh-out-2")


def _regional_traffic_dab() -> dict:
    return {
        "version": 1,
        "name": "regional_traffic_dab",
        "description": "A traffic center broadcasts regional information over DAB; a hazard report falls back to cellular.",
        "nodes": [
            {"id": "traffic-center", "kind": "service_provider", "position": [0, 0]},
            {"id": "veh-in-1", "kind": "vehicle", "position": [100, 100]},
            {"id": "veh-in-2", "kind": "vehicle", "position": [-3000, 2000]},
            {"id": "veh-in-3", "kind": "vehicle", "trajectory": [[0, 4000, 0], [60000, -4000, 0]]},
            {"id": "phone-in", "kind": "smartphone", "position": [0, -4500]},
            {"id": "veh-out-1", "kind": "vehicle", "position": [8000, 0]},
            {"id": "veh-out-2", "kind": "vehicle", "trajectory": [[0, 0, -6000], [60000, 0, -9000]]},
        ],
        "coverage": {"dab_regions": {"county-west": {"center": [0, 0], "radius": 5000}}},
        "services": [
            {
                "id": "traffic_info",
                "provider": "traffic-center",
                "class": "wide_area_public",
                "purpose": "traffic-information",
                "address": {"region": "county-west"},
            },
            {
                "id": "hazard_report",
                "provider": "traffic-center",
                "class": "wide_area_public",
                "purpose": "hazard-reporting",
                "fields": ["hazard_type", "location"],
            },
        ],
        "actions": [
            {
                "at": 0,
                "every": 10000,
                "until": 60000,
                "dispatch": {"sender": "traffic-center", "service": "traffic_info", "text": "A1 congestion km 12-18"},
            },
            {
                "at": 15000,
                "dispatch": {
                    "sender": "veh-in-1",
                    "service": "hazard_report",
                    "fields": {"hazard_type": "debris", "location": "A1 km 14"},
                },
            },
        ],
    }


def _access_barrier_rfid() -> dict:
    return {
        "version": 1,
        "name": "access_barrier_rfid",
        "description": "Two cars approach an access barrier; one credential is revoked.",
        "nodes": [
            {"id": "barrier-1", "kind": "access_barrier", "position": [0, 0]},
            {"id": "barrier-op", "kind": "service_provider", "position": [1000, 1000]},
            {"id": "car-1", "kind": "vehicle", "trajectory": [[0, 30, 0], [10000, 1, 0]]},
            {"id": "car-2", "kind": "vehicle", "trajectory": [[0, 0, 40], [10000, 0, 2]]},
        ],
        "coverage": {"rfid_readers": [{"node": "barrier-1", "range": 3}]},
        "services": [
            {
                "id": "barrier_access",
                "provider": "barrier-op",
                "class": "proximity_auth",
                "purpose": "access-control",
                "address": {"proximity": "barrier-1"},
            }
        ],
        "actions": [
            {"at": 0, "revoke": {"node": "car-2", "service": "barrier_access"}},
            {
                "at": 0,
                "every": 1000,
                "until": 10000,
                "rfid_auth": {"reader": "barrier-1", "holder": "car-1", "service": "barrier_access"},
            },
            {
                "at": 0,
                "every": 1000,
                "until": 10000,
                "rfid_auth": {"reader": "barrier-1", "holder": "car-2", "service": "barrier_access"},
            },
        ],
    }


FLEET = tuple(f"fleet-{i}" for i in range(5))
STUDY_POLICIES = {
    "": {"strategy": "per_service"},
    "/single_identity": {"strategy": "single_identity"},
    "/rotation_600s": {"strategy": "time_rotation", "period_ms": 600_000},
    "/rotation_60s": {"strategy": "time_rotation", "period_ms": 60_000},
}


def _linkability_study(suffix: str) -> dict:
    duration = 900_000
    nodes = [
        {
            "id": node_id,
            "kind": "vehicle",
            "trajectory": [[0, 0, 200 * i], [duration, 14 * duration // 1000, 200 * i]],
        }
        for i, node_id in enumerate(FLEET)
    ]
    nodes.append({"id": "telemetry-op", "kind": "service_provider", "position": [0, 10000]})
    nodes.append({"id": "parking-op", "kind": "service_provider", "position": [0, 12000]})
    actions = []
    for start, service in ((0, "traffic_telemetry"), (3000, "parking_search")):
        for node_id in FLEET:
            actions.append(
                {
                    "at": start,
                    "every": 6000,
                    "until": duration,
                    "dispatch": {"sender": node_id, "service": service, "fields": {"speed_band": "50-60"}},
                }
            )
    return {
        "version": 1,
        "name": "pseudonym_linkability_study" + suffix,
        "description": f"A five-vehicle fleet uses two services for 15 minutes ({STUDY_POLICIES[suffix]['strategy']} pseudonyms).",
        "nodes": nodes,
        "pseudonym_policy": STUDY_POLICIES[suffix],
        "services": [
            {
                "id": "traffic_telemetry",
                "provider": "telemetry-op",
                "class": "user_specific",
                "purpose": "traffic-telemetry",
                "fields": ["speed_band"],
            },
            {
                "id": "parking_search",
                "provider": "parking-op",
                "class": "user_specific",
                "purpose": "parking-search",
                "fields": ["speed_band"],
            },
        ],
        "actions": actions,
    }


def _data_minimization_audit() -> dict:
    return {
        "version": 1,
        "name": "data_minimization_audit",
        "description": "One compliant service and one client that over-collects a home address.",
        "nodes": [
            {"id": "ev-a", "kind": "vehicle", "position": [0, 0]},
            {"id": "ev-b", "kind": "vehicle", "position": [500, 0]},
            {"id": "routing-op", "kind": "service_provider", "position": [3000, 0]},
            {"id": "offers-op", "kind": "service_provider", "position": [3000, 3000]},
        ],
        "services": [
            {
                "id": "ev_routing",
                "provider": "routing-op",
                "class": "user_specific",
                "purpose": "ev-routing",
                "fields": ["origin", "destination", "state_of_charge"],
            },
            {
                "id": "charging_offers",
                "provider": "offers-op",
                "class": "user_specific",
                "purpose": "charging-offers",
                "fields": ["plug_type"],
            },
        ],
        "actions": [
            {
                "at": 1000,
                "dispatch": {
                    "sender": "ev-a",
                    "service": "ev_routing",
                    "fields": {"origin": "Kaiserslautern", "destination": "Trier", "state_of_charge": "41"},
                },
            },
            {
                "at": 2000,
                "dispatch": {
                    "sender": "ev-a",
                    "service": "charging_offers",
                    "fields": {"plug_type": "CCS", "home_address": "Hauptstr. 1"},
                },
            },
            {
                "at": 3000,
                "dispatch": {
                    "sender": "ev-b",
                    "service": "ev_routing",
                    "fields": {"origin": "Homburg", "destination": "Metz", "state_of_charge": "77"},
                },
            },
            {
                "at": 4000,
                "dispatch": {
                    "sender": "ev-b",
                    "service": "charging_offers",
                    "fields": {"plug_type": "Type2", "home_address": "Bahnhofstr. 9"},
                },
            },
        ],
    }


def _secure_dispatch_faults() -> dict:
    return {
        "version": 1,
        "name": "secure_dispatch_faults",
        "description": "Tampered, mis-purposed and revoked senders are all rejected at the recipient.",
        "nodes": [
            {"id": "veh-1", "kind": "vehicle", "position": [0, 0]},
            {"id": "veh-2", "kind": "vehicle", "position": [100, 0]},
            {"id": "fleet-op", "kind": "service_provider", "position": [2000, 0]},
        ],
        "services": [
            {
                "id": "fleet_status",
                "provider": "fleet-op",
                "class": "user_specific",
                "purpose": "fleet-status",
                "fields": ["battery"],
            }
        ],
        "actions": [
            {"at": 1000, "dispatch": {"sender": "veh-1", "service": "fleet_status", "fields": {"battery": "80"}}},
            {
                "at": 2000,
                "dispatch": {
                    "sender": "veh-1",
                    "service": "fleet_status",
                    "fields": {"battery": "79"},
                    "fault": {"kind": "bitflip", "bit": 3},
                },
            },
            {
                "at": 3000,
                "dispatch": {
                    "sender": "veh-1",
                    "service": "fleet_status",
                    "fields": {"battery": "78"},
                    "fault": {"kind": "wrong_purpose", "purpose": "advertising"},
                },
            },
            {"at": 4000, "revoke": {"node": "veh-2", "service": "fleet_status"}},
            {"at": 5000, "dispatch": {"sender": "veh-2", "service": "fleet_status", "fields": {"battery": "50"}}},
        ],
    }


_BUILDERS = {
    "charging_reservation": _charging_reservation,
    "parking_garage_positioning": _parking_garage_positioning,
    "regional_traffic_dab": _regional_traffic_dab,
    "access_barrier_rfid": _access_barrier_rfid,
    **{"pseudonym_linkability_study" + s: (lambda s=s: _linkability_study(s)) for s in STUDY_POLICIES},
    "data_minimization_audit": _data_minimization_audit,
    "secure_dispatch_faults": _secure_dispatch_faults,
}


def builtin_names() -> list[str]:
    return list(_BUILDERS)


def builtin_source(name: str) -> dict:
    """The raw scenario mapping, e.g. to dump it as a starting-point file."""
    try:
        return copy.deepcopy(_BUILDERS[name]())
    except KeyError:
        raise KeyError(f"no built-in scenario named {name!r}") from None


def builtin_scenario(name: str) -> Scenario:
    return scenario_from_dict(builtin_source(name))


def builtin_scenarios() -> list[Scenario]:
    return [builtin_scenario(name) for name in _BUILDERS]
