"""Model, optimize and simulate distributed magic-state distillation factories."""
from msfactory.distillation import (
    BravyiHaahProtocol,
    FactoryArchitecture,
    NoiseModel,
    ResourceEstimate,
    RoundProfile,
)
from msfactory.latency import CongestionModel
from msfactory.optimizer import (
    DesignPoint,
    FactoryOptimizer,
    SearchConstraints,
    evaluate_design,
    optimize,
    preset,
)
from msfactory.workload import TLoadDistribution, WorkloadStats

__version__ = "0.1.0"

__all__ = [
    "BravyiHaahProtocol",
    "CongestionModel",
    "DesignPoint",
    "FactoryArchitecture",
    "FactoryOptimizer",
    "NoiseModel",
    "ResourceEstimate",
    "RoundProfile",
    "SearchConstraints",
    "TLoadDistribution",
    "WorkloadStats",
    "evaluate_design",
    "optimize",
    "preset",
]
