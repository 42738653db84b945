"""Reference backend delegating to HiGHS through ``scipy.optimize.milp``."""

from __future__ import annotations

import math
import time

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from ..formulation import MILPModel
from .base import (ERROR, FEASIBLE, INFEASIBLE, LIMIT_REACHED, OPTIMAL, UNBOUNDED,
                   MILPSolution, SolveOptions, relative_gap)


class HighsBackend:
    name = "highs"

    def solve_milp(self, model: MILPModel, options: SolveOptions = SolveOptions()) -> MILPSolution:
        start = time.perf_counter()
        model.check()
        c, A, lo, hi, lb, ub, is_bin, sign = model.arrays()
        opts = {"mip_rel_gap": options.gap_tol}
        if options.time_limit is not None:
            opts["time_limit"] = options.time_limit
        if options.node_limit is not None:
            opts["node_limit"] = options.node_limit
        cons = [LinearConstraint(A, lo, hi)] if A.shape[0] else []
        res = milp(c, constraints=cons, integrality=is_bin.astype(int),
                   bounds=Bounds(lb, ub), options=opts)
        elapsed = time.perf_counter() - start
        status = {0: OPTIMAL, 1: LIMIT_REACHED, 2: INFEASIBLE, 3: UNBOUNDED}.get(res.status, ERROR)
        if res.x is None:
            return MILPSolution(status, wall_time=elapsed, message=res.message)
        x = np.asarray(res.x, dtype=float)
        x[is_bin] = np.round(x[is_bin])
        obj = sign * float(res.fun) + model.objective.constant
        bound = getattr(res, "mip_dual_bound", None)
        bound = sign * float(bound) + model.objective.constant if bound is not None else obj
        if status == LIMIT_REACHED:
            status = FEASIBLE if math.isfinite(obj) else status
        nodes = int(getattr(res, "mip_node_count", 0) or 0)
        return MILPSolution(status, x, obj, bound, relative_gap(obj, bound), nodes, elapsed,
                            res.message)
