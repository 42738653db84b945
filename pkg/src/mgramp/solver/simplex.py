"""Bounded-variable revised simplex.

Rows ``lo <= A x <= hi`` are turned into equalities with one logical
variable per row, ``A x - r = 0`` and ``lo <= r <= hi``, so every column
(structural or logical) is simply a bounded variable. The basis inverse is
kept as a sparse LU of the last refactorised basis plus a product-form eta
file.

The dual simplex is the workhorse: a slack basis with every boxed variable
parked at the bound matching the sign of its cost is dual feasible, and a
basis that was optimal before a bound change stays dual feasible, which is
exactly what branch-and-bound needs. Columns that cannot be made dual
feasible by a bound choice get a temporary cost shift; once the shifted
problem is optimal the true costs are restored and a primal phase finishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .base import ERROR, INFEASIBLE, OPTIMAL, UNBOUNDED

AT_LOWER, AT_UPPER, FREE, FIXED, BASIC = 0, 1, 2, 3, -1


class NumericalTrouble(RuntimeError):
    pass


class PresolveInfeasible(Exception):
    pass


@dataclass
class Basis:
    basic: np.ndarray  # column index per basis position
    state: np.ndarray  # AT_LOWER / AT_UPPER / FREE / FIXED / BASIC per column

    def copy(self) -> "Basis":
        return Basis(self.basic.copy(), self.state.copy())


@dataclass
class LPResult:
    status: str
    x: Optional[np.ndarray]  # structural values
    objective: float  # of the minimisation costs given to the engine
    iterations: int
    basis: Optional[Basis]
    message: str = ""
    reduced_costs: Optional[np.ndarray] = None  # structural columns, at optimality


def presolve(A: sp.csr_matrix, row_lo: np.ndarray, row_hi: np.ndarray, lb: np.ndarray,
             ub: np.ndarray, is_int: Optional[np.ndarray] = None, tol: float = 1e-9):
    """Turn rows with at most one non-fixed variable into bounds.

    Returns ``(keep, lb, ub)`` where ``keep`` masks the rows that remain.
    Raises :class:`PresolveInfeasible` when a row or bound pair is empty.
    """
    A = sp.csr_matrix(A)
    lb = lb.astype(float).copy()
    ub = ub.astype(float).copy()
    m = A.shape[0]
    keep = np.ones(m, dtype=bool)
    indptr, indices, data = A.indptr, A.indices, A.data
    changed = True
    while changed:
        changed = False
        fixed = lb == ub
        for i in range(m):
            if not keep[i]:
                continue
            sl = slice(indptr[i], indptr[i + 1])
            cols, vals = indices[sl], data[sl]
            free = ~fixed[cols]
            nfree = int(free.sum())
            if nfree > 1:
                continue
            const = float(vals[~free] @ lb[cols[~free]]) if nfree < len(cols) else 0.0
            if nfree == 0:
                scale = tol * (1 + abs(const))
                if const < row_lo[i] - scale or const > row_hi[i] + scale:
                    raise PresolveInfeasible(f"row {i} violated by fixed variables")
                keep[i] = False
                changed = True
                continue
            j = int(cols[free][0])
            a = float(vals[free][0])
            lo_new = (row_lo[i] - const) / a
            hi_new = (row_hi[i] - const) / a
            if a < 0:
                lo_new, hi_new = hi_new, lo_new
            if is_int is not None and is_int[j]:
                if math.isfinite(lo_new):
                    lo_new = math.ceil(lo_new - 1e-6)
                if math.isfinite(hi_new):
                    hi_new = math.floor(hi_new + 1e-6)
            if lo_new > lb[j]:
                lb[j] = lo_new
            if hi_new < ub[j]:
                ub[j] = hi_new
            if lb[j] > ub[j]:
                if lb[j] - ub[j] > tol * (1 + abs(lb[j])):
                    raise PresolveInfeasible(f"variable {j} has empty bounds after row {i}")
                ub[j] = lb[j]
            keep[i] = False
            changed = True
            if lb[j] == ub[j]:
                fixed[j] = True
    return keep, lb, ub


class LPEngine:
    """Solve ``min c.x`` s.t. ``row_lo <= A x <= row_hi``, ``lb <= x <= ub``
    for changing bound vectors, optionally warm-started from a basis."""

    def __init__(self, c, A, row_lo, row_hi, *, feas_tol: float = 1e-7,
                 dual_tol: float = 1e-9, pivot_tol: float = 1e-9,
                 refactor_every: int = 64, bland_after: int = 1000,
                 max_iter: Optional[int] = None):
        A = sp.csc_matrix(A, dtype=float)
        self.m, self.n = A.shape
        m, n = self.m, self.n
        self.Af = sp.hstack([A, -sp.identity(m, format="csc")], format="csc")
        self.Af.sort_indices()
        self.AfT = self.Af.T.tocsr()
        self.cost0 = np.concatenate([np.asarray(c, dtype=float), np.zeros(m)])
        self.row_lo = np.asarray(row_lo, dtype=float)
        self.row_hi = np.asarray(row_hi, dtype=float)
        self.feas_tol = feas_tol
        self.dual_tol = dual_tol
        self.pivot_tol = pivot_tol
        self.refactor_every = refactor_every
        self.bland_after = bland_after
        self.max_iter = max_iter if max_iter is not None else 50 * (n + m) + 1000
        self.etas: list = []
        self._live: Optional[np.ndarray] = None  # basis the current LU + etas represent

    # -- linear algebra ---------------------------------------------------
    def _column(self, j: int) -> np.ndarray:
        a = np.zeros(self.m)
        s, e = self.Af.indptr[j], self.Af.indptr[j + 1]
        a[self.Af.indices[s:e]] = self.Af.data[s:e]
        return a

    def _factor(self) -> None:
        B = self.Af[:, self.basic]
        try:
            self.lu = splu(sp.csc_matrix(B), permc_spec="COLAMD")
        except RuntimeError as exc:  # exactly singular
            raise NumericalTrouble(str(exc)) from exc
        self.etas = []

    def _ftran(self, a: np.ndarray) -> np.ndarray:
        x = self.lu.solve(a)
        for r, idx, vals, piv in self.etas:
            xr = x[r] / piv
            if xr != 0.0:
                x[idx] -= vals * xr
            x[r] = xr
        return x

    def _btran(self, w: np.ndarray) -> np.ndarray:
        w = w.copy()
        for r, idx, vals, piv in reversed(self.etas):
            w[r] = (w[r] - vals @ w[idx]) / piv
        return self.lu.solve(w, trans="T")

    def _push_eta(self, r: int, col: np.ndarray) -> None:
        idx = np.flatnonzero(col)
        idx = idx[idx != r]
        self.etas.append((r, idx, col[idx].copy(), col[r]))

    # -- state ------------------------------------------------------------
    def _recompute_primal(self) -> None:
        x = self.x
        x[self.basic] = 0.0
        rhs = -(self.Af @ x)
        x[self.basic] = self._ftran(rhs)

    def _recompute_dual(self) -> None:
        y = self._btran(self.cost[self.basic])
        self.d = self.cost - self.AfT @ y
        self.d[self.basic] = 0.0

    def _place_nonbasic(self, strict: bool) -> None:
        """Put every nonbasic column at a dual-feasible bound.

        Boxed columns choose (or, with ``strict``, flip to) the bound that
        matches the sign of their reduced cost; any remaining dual
        infeasibility gets a temporary cost shift.
        """
        lo, up, d, state = self.lo, self.up, self.d, self.state
        tol = self.dual_tol
        nb = state != BASIC
        fin_lo = np.isfinite(lo)
        fin_up = np.isfinite(up)
        fixed = nb & (lo == up)
        boxed = nb & fin_lo & fin_up & ~fixed
        new = state.copy()
        new[fixed] = FIXED
        new[nb & ~fin_lo & ~fin_up] = FREE
        new[nb & fin_lo & ~fin_up] = AT_LOWER
        new[nb & ~fin_lo & fin_up] = AT_UPPER
        if strict:
            keep = boxed & (((state == AT_LOWER) & (d >= -tol)) | ((state == AT_UPPER) & (d <= tol)))
            move = boxed & ~keep
        else:
            move = boxed
        new[move] = np.where(d[move] < 0, AT_UPPER, AT_LOWER)
        self.state = state = new
        bad = ((state == AT_LOWER) & (d < -tol)) | ((state == AT_UPPER) & (d > tol)) | \
              ((state == FREE) & (np.abs(d) > tol))
        if bad.any():
            self.cost[bad] -= d[bad]
            d[bad] = 0.0
            self.shifted = True
        x = self.x
        at_lo = (state == AT_LOWER) | (state == FIXED)
        x[at_lo] = lo[at_lo]
        x[state == AT_UPPER] = up[state == AT_UPPER]
        x[state == FREE] = 0.0

    def _refresh(self) -> None:
        self._factor()
        self._recompute_dual()
        self._place_nonbasic(strict=True)
        self._recompute_primal()

    # -- main entry -------------------------------------------------------
    def solve(self, lb, ub, basis: Optional[Basis] = None) -> LPResult:
        n, m = self.n, self.m
        self.lo = np.concatenate([np.asarray(lb, dtype=float), self.row_lo])
        self.up = np.concatenate([np.asarray(ub, dtype=float), self.row_hi])
        if np.any(self.lo > self.up + self.feas_tol):
            return LPResult(INFEASIBLE, None, math.nan, 0, None, "empty bounds")
        self.up = np.maximum(self.up, self.lo)
        self.iterations = 0
        if m == 0:
            return self._solve_unconstrained()
        try:
            return self._solve(basis)
        except NumericalTrouble as exc:
            if basis is None:
                return LPResult(ERROR, None, math.nan, self.iterations, None, str(exc))
            try:
                return self._solve(None)
            except NumericalTrouble as exc2:
                return LPResult(ERROR, None, math.nan, self.iterations, None, str(exc2))

    def _solve_unconstrained(self) -> LPResult:
        c = self.cost0[: self.n]
        lo, up = self.lo[: self.n], self.up[: self.n]
        x = np.where(c > 0, lo, np.where(c < 0, up, np.where(np.isfinite(lo), lo,
                                                               np.where(np.isfinite(up), up, 0.0))))
        if not np.all(np.isfinite(x)):
            return LPResult(UNBOUNDED, None, math.nan, 0, None)
        return LPResult(OPTIMAL, x, float(c @ x), 0, None, reduced_costs=c.copy())

    def _solve(self, basis: Optional[Basis]) -> LPResult:
        n, m = self.n, self.m
        live, self._live = self._live, None
        self.cost = self.cost0.copy()
        self.shifted = False
        self.x = np.zeros(n + m)
        if basis is None:
            self.basic = np.arange(n, n + m)
            self.state = np.full(n + m, AT_LOWER, dtype=np.int8)
            self.state[self.basic] = BASIC
        else:
            self.basic = basis.basic.copy()
            self.state = basis.state.copy()
        # a plunging child usually restarts from the basis just solved
        if basis is None or live is None or not np.array_equal(live, self.basic):
            self._factor()
        self._recompute_dual()
        self._place_nonbasic(strict=basis is not None)
        self._recompute_primal()

        for _ in range(4):
            status = self._dual_phase()
            if status != OPTIMAL:
                return self._result(status)
            if self.shifted:
                self.cost = self.cost0.copy()
                self.shifted = False
                self._recompute_dual()
                status = self._primal_phase()
                if status != OPTIMAL:
                    return self._result(status)
            # final verification; refactorise unless the eta file is short
            if len(self.etas) > 8:
                self._factor()
            self._recompute_dual()
            self._recompute_primal()
            if self._max_primal_infeasibility() <= self.feas_tol and \
                    self._max_dual_infeasibility() <= 10 * self.dual_tol:
                return self._result(OPTIMAL)
            self._place_nonbasic(strict=True)
            self._recompute_primal()
        raise NumericalTrouble("could not reach a verified optimum")

    def _result(self, status: str) -> LPResult:
        basis = Basis(self.basic.copy(), self.state.copy())
        if status == OPTIMAL:
            self._live = basis.basic
            x = self.x[: self.n].copy()
            obj = float(self.cost0[: self.n] @ x)
            return LPResult(OPTIMAL, x, obj, self.iterations, basis,
                            reduced_costs=self.d[: self.n].copy())
        return LPResult(status, None, math.nan, self.iterations, basis)

    def _max_primal_infeasibility(self) -> float:
        xb = self.x[self.basic]
        v = np.maximum(self.lo[self.basic] - xb, xb - self.up[self.basic])
        return float(v.max()) if v.size else 0.0

    def _max_dual_infeasibility(self) -> float:
        d, s = self.d, self.state
        v = np.zeros_like(d)
        v[s == AT_LOWER] = -d[s == AT_LOWER]
        v[s == AT_UPPER] = d[s == AT_UPPER]
        v[s == FREE] = np.abs(d[s == FREE])
        return float(v.max()) if v.size else 0.0

    def _tick(self) -> None:
        self.iterations += 1
        if self.iterations > self.max_iter:
            raise NumericalTrouble("iteration limit exceeded")

    # -- dual simplex -----------------------------------------------------
    def _dual_phase(self) -> str:
        m = self.m
        degenerate = 0
        retried = False
        while True:
            self._tick()
            bland = degenerate > self.bland_after
            basic = self.basic
            xb = self.x[basic]
            below = self.lo[basic] - xb
            above = xb - self.up[basic]
            viol = np.maximum(below, above)
            if bland:
                cand = np.flatnonzero(viol > self.feas_tol)
                if cand.size == 0:
                    return OPTIMAL
                r = int(cand[np.argmin(basic[cand])])
            else:
                r = int(np.argmax(viol)) if m else 0
                if m == 0 or viol[r] <= self.feas_tol:
                    return OPTIMAL
            p = int(basic[r])
            to_lower = below[r] > 0
            target = self.lo[p] if to_lower else self.up[p]

            e = np.zeros(m)
            e[r] = 1.0
            rho = self._btran(e)
            alpha = self.AfT @ rho
            state = self.state
            ptol = self.pivot_tol
            if to_lower:
                elig = ((state == AT_LOWER) & (alpha < -ptol)) | ((state == AT_UPPER) & (alpha > ptol))
            else:
                elig = ((state == AT_LOWER) & (alpha > ptol)) | ((state == AT_UPPER) & (alpha < -ptol))
            elig |= (state == FREE) & (np.abs(alpha) > ptol)
            idx = np.flatnonzero(elig)
            if idx.size == 0:
                if retried:
                    return INFEASIBLE
                retried = True
                self._refresh()
                continue
            retried = False
            dj = self.d[idx]
            st = state[idx]
            slack = np.where(st == AT_LOWER, np.maximum(dj, 0.0),
                             np.where(st == AT_UPPER, np.maximum(-dj, 0.0), 0.0))
            mag = np.abs(alpha[idx])
            if bland:
                ratios = slack / mag
                k = int(np.flatnonzero(ratios <= ratios.min())[0])
            else:
                bound = np.min((slack + self.dual_tol) / mag)
                within = np.flatnonzero(slack / mag <= bound)
                k = int(within[np.argmax(mag[within])])
            q = int(idx[k])
            step = slack[k] / mag[k]
            theta = -step if to_lower else step
            col = self._ftran(self._column(q))
            if abs(col[r] - alpha[q]) > 1e-6 * (1.0 + abs(col[r])) or abs(col[r]) < ptol:
                self._refresh()
                continue
            self.d -= theta * alpha
            self.d[basic] = 0.0
            self.d[p] = -theta
            self.d[q] = 0.0
            dxq = (self.x[p] - target) / col[r]
            self.x[basic] -= dxq * col
            self.x[q] += dxq
            self.x[p] = target
            basic[r] = q
            state[q] = BASIC
            state[p] = FIXED if self.lo[p] == self.up[p] else (AT_LOWER if to_lower else AT_UPPER)
            degenerate = degenerate + 1 if step == 0.0 else 0
            self._push_eta(r, col)
            if len(self.etas) >= self.refactor_every:
                self._refresh()

    # -- primal simplex (phase 2) -----------------------------------------
    def _primal_phase(self) -> str:
        m = self.m
        degenerate = 0
        while True:
            self._tick()
            bland = degenerate > self.bland_after
            d, state = self.d, self.state
            tol = self.dual_tol
            score = np.zeros_like(d)
            lo_mask = (state == AT_LOWER) & (d < -tol)
            up_mask = (state == AT_UPPER) & (d > tol)
            fr_mask = (state == FREE) & (np.abs(d) > tol)
            score[lo_mask | up_mask | fr_mask] = np.abs(d[lo_mask | up_mask | fr_mask])
            cand = np.flatnonzero(score)
            if cand.size == 0:
                return OPTIMAL
            q = int(cand[0]) if bland else int(cand[np.argmax(score[cand])])
            direction = 1.0 if d[q] < 0 else -1.0
            col = self._ftran(self._column(q))
            delta = -direction * col
            basic = self.basic
            xb = self.x[basic]
            lo_b, up_b = self.lo[basic], self.up[basic]
            ptol = self.pivot_tol
            room = np.full(m, np.inf)
            dec = delta < -ptol
            inc = delta > ptol
            room[dec] = (xb[dec] - lo_b[dec]) / -delta[dec]
            room[inc] = (up_b[inc] - xb[inc]) / delta[inc]
            room = np.maximum(room, 0.0)
            flip = self.up[q] - self.lo[q]
            t = room.min() if m else np.inf
            if not math.isfinite(t) and not math.isfinite(flip):
                return UNBOUNDED
            if flip <= t:
                self.x[basic] += delta * flip
                self.x[q] = self.up[q] if state[q] == AT_LOWER else self.lo[q]
                state[q] = AT_UPPER if state[q] == AT_LOWER else AT_LOWER
                degenerate = 0
                continue
            if bland:
                r = int(np.flatnonzero(room <= t)[np.argmin(basic[room <= t])])
            else:
                slack_room = np.full(m, np.inf)
                slack_room[dec] = (xb[dec] - lo_b[dec] + self.feas_tol) / -delta[dec]
                slack_room[inc] = (up_b[inc] - xb[inc] + self.feas_tol) / delta[inc]
                bound = slack_room.min()
                within = np.flatnonzero(room <= bound)
                r = int(within[np.argmax(np.abs(delta[within]))])
                t = room[r]
            p = int(basic[r])
            to_lower = delta[r] < 0
            self.x[basic] += delta * t
            self.x[q] += direction * t
            self.x[p] = self.lo[p] if to_lower else self.up[p]

            e = np.zeros(m)
            e[r] = 1.0
            alpha = self.AfT @ self._btran(e)
            if abs(alpha[q] - col[r]) > 1e-6 * (1.0 + abs(col[r])):
                self._refresh()
                continue
            theta = d[q] / alpha[q]
            self.d -= theta * alpha
            self.d[basic] = 0.0
            self.d[p] = -theta
            self.d[q] = 0.0
            basic[r] = q
            state[q] = BASIC
            state[p] = FIXED if self.lo[p] == self.up[p] else (AT_LOWER if to_lower else AT_UPPER)
            degenerate = degenerate + 1 if t == 0.0 else 0
            self._push_eta(r, col)
            if len(self.etas) >= self.refactor_every:
                self._refresh()
