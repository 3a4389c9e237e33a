"""Hybrid k-clustering: bicriteria solver, coresets and exact oracles."""

__version__ = "0.1.0"

from .ballint import BudgetExceeded, Infeasible, Request, RequestSet  # noqa: E402
from .coreset import AnchorSet, CoresetOutput, build_coreset, build_T, certify  # noqa: E402
from .gen import generate  # noqa: E402
from .metric import (Instance, MetricError, MetricSpace, Solution, WeightedClientSet,  # noqa: E402
                     alpha_distance, cost, load_instance, save_instance)
from .oracle import OracleResult, brute_force, kcenter_radius  # noqa: E402
from .solver import NoSolutionFound, SolveResult, SolverConfig, solve  # noqa: E402

__all__ = [
    "AnchorSet", "BudgetExceeded", "CoresetOutput", "Infeasible", "Instance", "MetricError",
    "MetricSpace", "NoSolutionFound", "OracleResult", "Request", "RequestSet", "Solution",
    "SolveResult", "SolverConfig", "WeightedClientSet", "alpha_distance", "brute_force",
    "build_T", "build_coreset", "certify", "cost", "generate", "kcenter_radius",
    "load_instance", "save_instance", "solve",
]
