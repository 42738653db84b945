"""MILP solving: built-in simplex + branch-and-bound, plus a HiGHS backend."""

from __future__ import annotations

import os

from .base import (ERROR, FEASIBLE, INFEASIBLE, LIMIT_REACHED, OPTIMAL, UNBOUNDED, Backend,
                   LPSolution, MILPSolution, SolveOptions, relative_gap)
from .bnb import BranchAndBound, solve_lp
from .highs import HighsBackend

BACKEND_ENV = "MGRAMP_BACKEND"
_BACKENDS = {"builtin": BranchAndBound, "highs": HighsBackend}


def get_backend(name: str | None = None) -> Backend:
    """Backend by name; falls back to ``$MGRAMP_BACKEND`` then ``builtin``."""
    name = name or os.environ.get(BACKEND_ENV) or "builtin"
    try:
        return _BACKENDS[name]()
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; choose from {sorted(_BACKENDS)}") from None


def backend_names() -> list[str]:
    return sorted(_BACKENDS)


def solve_milp(model, options: SolveOptions = SolveOptions(), backend: Backend | None = None
               ) -> MILPSolution:
    return (backend or BranchAndBound()).solve_milp(model, options)


__all__ = [
    "ERROR", "FEASIBLE", "INFEASIBLE", "LIMIT_REACHED", "OPTIMAL", "UNBOUNDED",
    "Backend", "BranchAndBound", "HighsBackend", "LPSolution", "MILPSolution", "SolveOptions",
    "backend_names", "get_backend", "relative_gap", "solve_lp", "solve_milp",
]
