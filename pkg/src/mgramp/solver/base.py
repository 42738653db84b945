"""Result and option types shared by every solver backend."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Protocol

import numpy as np

OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
LIMIT_REACHED = "limit_reached"
ERROR = "error"


BRANCHING_RULES = ("pseudocost", "most_fractional")


@dataclass(frozen=True)
class SolveOptions:
    gap_tol: float = 1e-6
    int_tol: float = 1e-6
    feas_tol: float = 1e-7
    node_limit: Optional[int] = None
    time_limit: Optional[float] = None  # seconds
    workers: int = 1
    branching: str = "pseudocost"  # or "most_fractional"

    def __post_init__(self):
        for name in ("gap_tol", "int_tol", "feas_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.branching not in BRANCHING_RULES:
            raise ValueError(f"branching must be one of {BRANCHING_RULES}")


@dataclass
class LPSolution:
    status: str
    x: Optional[np.ndarray] = None
    objective: float = math.nan
    iterations: int = 0
    message: str = ""


@dataclass
class MILPSolution:
    status: str
    x: Optional[np.ndarray] = None
    objective: float = math.nan
    bound: float = math.nan
    gap: float = math.inf
    nodes: int = 0
    wall_time: float = 0.0
    message: str = ""
    bound_history: list[float] = field(default_factory=list, repr=False)

    @property
    def has_solution(self) -> bool:
        return self.x is not None


def relative_gap(objective: float, bound: float) -> float:
    if not (math.isfinite(objective) and math.isfinite(bound)):
        return math.inf
    return abs(objective - bound) / max(1.0, abs(objective))


class Backend(Protocol):
    name: str

    def solve_milp(self, model, options: SolveOptions) -> MILPSolution: ...
