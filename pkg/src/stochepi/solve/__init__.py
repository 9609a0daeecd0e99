"""Solvers for LinearModel instances: a dense-simplex branch-and-bound for
desk-scale models, MPS emission, and an external-solver subprocess adapter.
"""

from .bnb import (
    STATUS_FEASIBLE_GAP,
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    STATUS_TIME_LIMIT,
    STATUS_UNBOUNDED,
    SolveResult,
    SolverConfig,
    solve_branch_and_bound,
)
from .external import ExternalSolverError, parse_solution_file, solve_external
from .feas import Violation, check_feasibility
from .mps import MpsError, emit_mps, name_table, parse_mps
from .simplex import SimplexResult, StandardForm, simplex_lp

__all__ = [
    "STATUS_FEASIBLE_GAP", "STATUS_INFEASIBLE", "STATUS_OPTIMAL",
    "STATUS_TIME_LIMIT", "STATUS_UNBOUNDED",
    "SolveResult", "SolverConfig", "solve_branch_and_bound",
    "ExternalSolverError", "parse_solution_file", "solve_external",
    "Violation", "check_feasibility",
    "MpsError", "emit_mps", "name_table", "parse_mps",
    "SimplexResult", "StandardForm", "simplex_lp",
    "solve_model",
]


def solve_model(model, cfg: SolverConfig | None = None) -> SolveResult:
    """Dispatch to the configured backend (builtin branch-and-bound or the
    external subprocess adapter)."""
    cfg = cfg or SolverConfig()
    cfg.validate()
    if cfg.backend == "external":
        return solve_external(model, cfg)
    return solve_branch_and_bound(model, cfg)
