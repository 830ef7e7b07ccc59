"""Offline scenario analysis by maximum-entropy reweighting.

Predict how business metrics would shift under hypothetical population
changes: declare constraints on weighted feature statistics, solve for
the maximum-entropy observation weights that satisfy them, and estimate
metrics with bootstrap uncertainty.
"""

from whatif.dataset import ColumnSpec, Dataset, ResamplePlan, load_csv, load_schema
from whatif.scenario import ConstraintSpec, TargetSpec, compile_constraints, parse_scenario
from whatif.maxent import SolverConfig, SolverResult, solve
from whatif.estimate import bootstrap_estimate, point_estimate

__all__ = [
    "ColumnSpec",
    "Dataset",
    "ResamplePlan",
    "load_csv",
    "load_schema",
    "ConstraintSpec",
    "TargetSpec",
    "compile_constraints",
    "parse_scenario",
    "SolverConfig",
    "SolverResult",
    "solve",
    "bootstrap_estimate",
    "point_estimate",
]
