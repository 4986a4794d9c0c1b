"""Bundled mixed-integer linear solver: model objects, simplex, branch and bound."""

from .model import BINARY, CONTINUOUS, Constraint, MilpModel, ObjectiveTerm, Variable, write_lp
from .solver import (
    STATUS_FEASIBLE,
    STATUS_INFEASIBLE,
    STATUS_NO_SOLUTION,
    STATUS_OPTIMAL,
    STATUS_UNBOUNDED,
    LpSolution,
    MilpResult,
    SolverLimits,
    solve_lp,
    solve_milp,
)

__all__ = [
    "BINARY",
    "CONTINUOUS",
    "Constraint",
    "MilpModel",
    "ObjectiveTerm",
    "Variable",
    "write_lp",
    "LpSolution",
    "MilpResult",
    "SolverLimits",
    "solve_lp",
    "solve_milp",
    "STATUS_OPTIMAL",
    "STATUS_FEASIBLE",
    "STATUS_INFEASIBLE",
    "STATUS_UNBOUNDED",
    "STATUS_NO_SOLUTION",
]
