"""Deterministic simulated network, scenarios, traces and trace audits."""

from .network import Network, Notice, ScenarioError
from .scenario import Scenario, build_network, load_scenario, parse_scenario, run_scenario, run_step
from .trace import Trace

__all__ = [
    "Network", "Notice", "ScenarioError", "Scenario", "Trace", "build_network",
    "load_scenario", "parse_scenario", "run_scenario", "run_step",
]
