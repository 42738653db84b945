"""LP-based branch-and-bound over binary variables.

Node selection is best-bound with depth-first plunging: after branching, the
child in the rounding direction of the branching variable is processed
immediately and its sibling goes to the open-node heap. Every node LP is
warm-started from its parent's optimal basis with the dual simplex.

Branching uses pseudocosts (average LP degradation per unit of rounding,
learned from solved children) with the product score. A variable with no
history borrows the average over all variables, so until anything is learned
the rule picks the most fractional binary; ties go to the lowest id.
``branching="most_fractional"`` keeps that rule throughout.
"""

from __future__ import annotations

import heapq
import itertools
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..formulation import MILPModel
from .base import (ERROR, INFEASIBLE, LIMIT_REACHED, OPTIMAL, UNBOUNDED, LPSolution,
                   MILPSolution, SolveOptions, relative_gap)
from .simplex import Basis, LPEngine, LPResult, PresolveInfeasible, presolve


@dataclass
class _Node:
    bound: float  # parent LP value (minimisation form)
    depth: int
    fixings: tuple[tuple[int, float], ...]
    basis: Optional[Basis]
    # (variable, 0 down / 1 up, parent LP value, distance rounded) of the last branch
    branch: Optional[tuple[int, int, float, float]] = None


class _Problem:
    """Presolved minimisation-form arrays of a model plus LP engines."""

    def __init__(self, model: MILPModel, options: SolveOptions, relax: bool):
        model.check()
        c, A, lo, hi, lb, ub, is_bin, sign = model.arrays()
        self.sign = sign
        self.constant = model.objective.constant
        self.is_bin = is_bin
        self.bin_ids = np.flatnonzero(is_bin)
        keep, self.lb, self.ub = presolve(A, lo, hi, lb, ub, None if relax else is_bin)
        self.args = (c, A[keep], lo[keep], hi[keep])
        self.feas_tol = options.feas_tol
        self._local = threading.local()

    def engine(self) -> LPEngine:
        eng = getattr(self._local, "engine", None)
        if eng is None:
            eng = LPEngine(*self.args, feas_tol=self.feas_tol)
            self._local.engine = eng
        return eng

    def objective(self, z: float) -> float:
        """Original-sense objective from a minimisation-form value."""
        return self.sign * z + self.constant

    def solve(self, fixings, basis) -> LPResult:
        lb, ub = self.lb, self.ub
        if fixings:
            lb, ub = lb.copy(), ub.copy()
            for j, v in fixings:
                lb[j] = ub[j] = v
        return self.engine().solve(lb, ub, basis)


def solve_lp(model: MILPModel, options: SolveOptions = SolveOptions()) -> LPSolution:
    """Solve the LP relaxation of ``model`` (binaries relaxed to [0, 1])."""
    try:
        prob = _Problem(model, options, relax=True)
    except PresolveInfeasible as exc:
        return LPSolution(INFEASIBLE, message=str(exc))
    res = prob.solve((), None)
    if res.status != OPTIMAL:
        return LPSolution(res.status, iterations=res.iterations, message=res.message)
    return LPSolution(OPTIMAL, res.x, prob.objective(res.objective), res.iterations)


class BranchAndBound:
    """Built-in MILP backend."""

    name = "builtin"

    def solve_milp(self, model: MILPModel, options: SolveOptions = SolveOptions()) -> MILPSolution:
        start = time.perf_counter()
        try:
            prob = _Problem(model, options, relax=False)
        except PresolveInfeasible as exc:
            return MILPSolution(INFEASIBLE, message=str(exc), wall_time=time.perf_counter() - start)
        return _Search(prob, options, start).run()


class _Search:
    def __init__(self, prob: _Problem, options: SolveOptions, start: float):
        self.prob = prob
        self.opt = options
        self.start = start
        self.heap: list = []
        self.lock = threading.Lock()
        self.seq = itertools.count()
        self.inc_z = math.inf
        self.inc_x: Optional[np.ndarray] = None
        self.gap_pruned = math.inf  # smallest LP bound discarded by the gap test
        self.nodes = 0
        self.bound_history: list[float] = []
        self.best_bound = -math.inf
        self.message = ""
        n = prob.lb.size
        self.pc_sum = np.zeros((2, n))
        self.pc_count = np.zeros((2, n))

    # -- helpers ----------------------------------------------------------
    def _push(self, node: _Node) -> None:
        with self.lock:
            heapq.heappush(self.heap, (self._key(node.bound), -node.depth, -next(self.seq), node))

    def _pop(self) -> Optional[_Node]:
        with self.lock:
            while self.heap:
                node = heapq.heappop(self.heap)[-1]
                if not self._prunable(node.bound):
                    return node
                self.gap_pruned = min(self.gap_pruned, node.bound)
            return None

    def _key(self, z: float) -> float:
        # equal bounds up to round-off compare equal so ties go to the deepest node
        return round(z, 7) if math.isfinite(z) else z

    def _prunable(self, z: float) -> bool:
        if not math.isfinite(self.inc_z):
            return False
        return (self.inc_z - z) / max(1.0, abs(self.prob.objective(self.inc_z))) <= self.opt.gap_tol

    def _global_bound(self, pending: list[_Node]) -> float:
        cands = [self.inc_z, self.gap_pruned]
        with self.lock:
            if self.heap:
                cands.append(min(e[-1].bound for e in self.heap))
        cands += [n.bound for n in pending]
        return min(cands)

    def _record_bound(self, pending: list[_Node]) -> None:
        b = self._global_bound(pending)
        if b > self.best_bound:
            self.best_bound = b
        self.bound_history.append(self.prob.objective(self.best_bound))

    def _limits_hit(self) -> bool:
        if self.opt.node_limit is not None and self.nodes >= self.opt.node_limit:
            self.message = "node limit reached"
            return True
        if self.opt.time_limit is not None and time.perf_counter() - self.start >= self.opt.time_limit:
            self.message = "time limit reached"
            return True
        return False

    def _fractional(self, x: np.ndarray) -> Optional[int]:
        ids = self.prob.bin_ids
        if ids.size == 0:
            return None
        vals = x[ids]
        down = vals - np.floor(vals)
        up = 1.0 - down
        frac = np.minimum(down, up)
        if frac.max() <= self.opt.int_tol:
            return None
        if self.opt.branching == "most_fractional":
            # argmax returns the lowest id among ties
            return int(ids[np.argmax(frac)])
        cand = np.flatnonzero(frac > self.opt.int_tol)
        j = ids[cand]
        with self.lock:
            est = []
            for k, dist in ((0, down[cand]), (1, up[cand])):
                total = self.pc_count[k].sum()
                avg = self.pc_sum[k].sum() / total if total else 1.0
                cnt = self.pc_count[k, j]
                pc = np.where(cnt > 0, self.pc_sum[k, j] / np.maximum(cnt, 1.0), avg)
                est.append(np.maximum(pc * dist, 1e-6))
        return int(j[np.argmax(est[0] * est[1])])

    def _learn(self, node: _Node, res: LPResult) -> None:
        if node.branch is None or res.status != OPTIMAL:
            return
        j, k, parent_z, dist = node.branch
        with self.lock:
            self.pc_sum[k, j] += max(res.objective - parent_z, 0.0) / dist
            self.pc_count[k, j] += 1

    def _accept(self, node: _Node, res: LPResult) -> None:
        """Polish an integral LP point by re-solving with binaries fixed."""
        ids = self.prob.bin_ids
        fixed = tuple((int(j), float(round(res.x[j]))) for j in ids)
        pol = self.prob.solve(fixed, res.basis)
        if pol.status == OPTIMAL:
            x, z = pol.x, pol.objective
        else:
            x = res.x.copy()
            x[ids] = np.round(x[ids])
            z = float(self.prob.args[0] @ x)
        with self.lock:
            if z < self.inc_z:
                self.inc_z, self.inc_x = z, x

    def _process(self, node: _Node, res: LPResult) -> Optional[_Node]:
        """Handle a solved node; returns the child to plunge into, if any."""
        if res.status == INFEASIBLE:
            return None
        if res.status != OPTIMAL:
            raise _Abort(res.status, res.message)
        self._learn(node, res)
        z = max(res.objective, node.bound)
        if self._prunable(z):
            self.gap_pruned = min(self.gap_pruned, z)
            return None
        j = self._fractional(res.x)
        if j is None:
            self._accept(node, res)
            return None
        fixings = node.fixings + self._reduced_cost_fixings(node, res, z)
        val = res.x[j]
        f = val - math.floor(val)
        first, second = (1.0, 0.0) if val >= 0.5 else (0.0, 1.0)
        depth = node.depth + 1

        def child(v: float) -> _Node:
            k = int(v)
            return _Node(z, depth, fixings + ((j, v),), res.basis, (j, k, z, 1.0 - f if k else f))

        self._push(child(second))
        return child(first)

    def _reduced_cost_fixings(self, node: _Node, res: LPResult, z: float) -> tuple:
        """Binaries whose move to the other bound alone would lift the LP
        value to the pruning threshold are fixed for the whole subtree."""
        if not math.isfinite(self.inc_z) or res.reduced_costs is None:
            return ()
        ids = self.prob.bin_ids
        d = res.reduced_costs[ids]
        x = res.x[ids]
        slack = self.inc_z - self.opt.gap_tol * max(1.0, abs(self.prob.objective(self.inc_z))) - z
        at_zero = (x <= self.opt.int_tol) & (d >= slack) & (d > 0)
        at_one = (x >= 1.0 - self.opt.int_tol) & (-d >= slack) & (d < 0)
        done = {j for j, _ in node.fixings}
        out = []
        for k in np.flatnonzero(at_zero | at_one):
            j = int(ids[k])
            if j in done or self.prob.lb[j] == self.prob.ub[j]:
                continue
            out.append((j, 0.0 if at_zero[k] else 1.0))
            # the cut-off side is bounded below by z + |d_j|
            self.gap_pruned = min(self.gap_pruned, z + abs(float(d[k])))
        return tuple(out)

    # -- main loop ----------------------------------------------------------
    def run(self) -> MILPSolution:
        prob = self.prob
        root = prob.solve((), None)
        self.nodes = 1
        if root.status == INFEASIBLE:
            return self._finish(INFEASIBLE)
        if root.status == UNBOUNDED:
            return self._finish(UNBOUNDED, "LP relaxation is unbounded")
        if root.status != OPTIMAL:
            return self._finish(ERROR, root.message)
        self.best_bound = root.objective
        try:
            plunge = self._process(_Node(root.objective, 0, (), None), root)
            self._record_bound([plunge] if plunge else [])
            workers = self.opt.workers
            pool = ThreadPoolExecutor(workers) if workers > 1 else None
            try:
                while True:
                    if self._limits_hit():
                        return self._finish(LIMIT_REACHED, self.message)
                    batch = []
                    if plunge is not None:
                        if self._prunable(plunge.bound):
                            self.gap_pruned = min(self.gap_pruned, plunge.bound)
                        else:
                            batch.append(plunge)
                        plunge = None
                    while len(batch) < workers:
                        node = self._pop()
                        if node is None:
                            break
                        batch.append(node)
                    if not batch:
                        break
                    if pool is None:
                        results = [prob.solve(n.fixings, n.basis) for n in batch]
                    else:
                        results = list(pool.map(lambda n: prob.solve(n.fixings, n.basis), batch))
                    self.nodes += len(batch)
                    for node, res in zip(batch, results):
                        child = self._process(node, res)
                        if child is not None:
                            if plunge is None:
                                plunge = child
                            else:
                                self._push(child)
                    self._record_bound([plunge] if plunge else [])
            finally:
                if pool is not None:
                    pool.shutdown()
        except _Abort as exc:
            return self._finish(ERROR, f"node LP failed: {exc.status} {exc.message}")
        if self.inc_x is None:
            return self._finish(INFEASIBLE)
        return self._finish(OPTIMAL)

    def _finish(self, status: str, message: str = "") -> MILPSolution:
        prob = self.prob
        elapsed = time.perf_counter() - self.start
        if self.inc_x is None:
            bound = prob.objective(self.best_bound) if math.isfinite(self.best_bound) else math.nan
            return MILPSolution(status, None, math.nan, bound, math.inf, self.nodes, elapsed,
                                message, self.bound_history)
        bound_z = self._global_bound([])
        obj = prob.objective(self.inc_z)
        bound = prob.objective(bound_z)
        return MILPSolution(status, self.inc_x, obj, bound, relative_gap(obj, bound), self.nodes,
                            elapsed, message, self.bound_history)


class _Abort(Exception):
    def __init__(self, status: str, message: str):
        self.status = status
        self.message = message
        super().__init__(status)
