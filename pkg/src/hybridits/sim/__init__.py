"""Discrete-event simulation of whole scenarios, plus traces and metrics."""

from .builtins import builtin_names, builtin_scenario, builtin_scenarios, builtin_source
from .engine import RunResult, Simulation, run_scenario
from .metrics import Metrics, recompute_metrics
from .scenario import Scenario, load_scenario, scenario_from_dict
from .trace import parse_trace, read_trace
from .verify import audit_trace, verify_trace

__all__ = [
    "Metrics",
    "RunResult",
    "Scenario",
    "Simulation",
    "audit_trace",
    "builtin_names",
    "builtin_scenario",
    "builtin_scenarios",
    "builtin_source",
    "load_scenario",
    "parse_trace",
    "read_trace",
    "recompute_metrics",
    "run_scenario",
    "scenario_from_dict",
    "verify_trace",
]
