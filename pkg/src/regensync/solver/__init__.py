from .bnb import (
    Budget,
    Solution,
    SolverError,
    SolveStats,
    branch_and_bound,
    enumerate_oracle,
    extract_timetable,
    polish,
)
from .lp import LpResult, bounded_simplex, solve_lp

__all__ = [
    "Budget",
    "LpResult",
    "Solution",
    "SolveStats",
    "SolverError",
    "bounded_simplex",
    "branch_and_bound",
    "enumerate_oracle",
    "extract_timetable",
    "polish",
    "solve_lp",
]
