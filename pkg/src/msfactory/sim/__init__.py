"""Cycle-level lattice simulator used to validate the analytical latency model."""
from msfactory.sim.layout import LatticeLayout, Region, build_layout, factory_footprint
from msfactory.sim.simulator import (
    STALL,
    SimConfig,
    SimResult,
    calibrate_congestion,
    lower_bound_cycles,
    model_cycles,
    reallocate_state,
    requests_from_counts,
    run,
)

__all__ = [
    "STALL",
    "LatticeLayout",
    "Region",
    "SimConfig",
    "SimResult",
    "build_layout",
    "calibrate_congestion",
    "factory_footprint",
    "lower_bound_cycles",
    "model_cycles",
    "reallocate_state",
    "requests_from_counts",
    "run",
]
