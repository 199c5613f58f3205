"""Multicast beam/packet/modulation planning over directional mmWave links."""

from .baselines import BroadcastPolicy, UnicastPolicy, solve_broadcast, solve_unicast
from .exact import BeamAction, ExactPolicy, value_iteration
from .hierarchy import HierarchicalPolicy, build_tree, solve_tree
from .scenario import Scenario, bundled, dump_scenario, load_scenario
from .sim import SimConfig, SimStats, simulate
from .sweep import emit, sweep

__all__ = [
    "BeamAction",
    "BroadcastPolicy",
    "ExactPolicy",
    "HierarchicalPolicy",
    "Scenario",
    "SimConfig",
    "SimStats",
    "UnicastPolicy",
    "build_tree",
    "bundled",
    "dump_scenario",
    "emit",
    "load_scenario",
    "simulate",
    "solve_broadcast",
    "solve_tree",
    "solve_unicast",
    "sweep",
    "value_iteration",
]
