"""Reference solvers that share no code with the package.

``enumerate_*`` walk every binary pattern of a tiny instance, keep the
patterns whose on/off runs respect the minimum durations, and solve the LP
left over for each one with scipy's ``linprog``. The LP is written directly
from the instance data, not from the package's MILP rows.

``vertex_lp`` solves small bounded LPs exactly by visiting every basic
solution.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linprog

from mgramp.instance import (AdjustableLoad, DispatchableUnit, FixedProfiles, GridLink,
                             MicrogridInstance, StorageUnit, TimeGrid)


# -- binary patterns ----------------------------------------------------------

def runs_ok(seq, initial, initial_duration, K, value):
    """True if every run of ``value`` in seq lasts K periods (or reaches the
    horizon), counting a run already in progress before period 1."""
    T = len(seq)
    if initial == value and initial_duration is not None:
        need = K - initial_duration
        if any(seq[k] != value for k in range(min(max(need, 0), T))):
            return False
    for k in range(T):
        before = seq[k - 1] if k else initial
        if seq[k] == value and before != value:
            end = min(k + K, T)
            if any(seq[j] != value for j in range(k, end)):
                return False
    return True


def unit_patterns(g, T):
    init = 1 if g.initial_committed else 0
    for I in itertools.product((0, 1), repeat=T):
        if runs_ok(I, init, g.initial_state_duration, g.min_up, 1) and \
                runs_ok(I, init, g.initial_state_duration, g.min_down, 0):
            yield I


def storage_patterns(s, T):
    u0 = 1 if s.initial_mode == "discharging" else 0
    v0 = 1 if s.initial_mode == "charging" else 0
    for modes in itertools.product((0, 1, 2), repeat=T):  # idle, discharge, charge
        u = tuple(int(m == 1) for m in modes)
        v = tuple(int(m == 2) for m in modes)
        if runs_ok(u, u0, s.initial_mode_duration if u0 else None, s.min_discharge_time, 1) and \
                runs_ok(v, v0, s.initial_mode_duration if v0 else None, s.min_charge_time, 1):
            yield u, v


def load_patterns(d, T):
    inside = [d.window_start <= t <= d.window_end for t in range(1, T + 1)]
    init = 1 if d.initial_operating else 0
    for z in itertools.product((0, 1), repeat=T):
        if any(z[k] and not inside[k] for k in range(T)):
            continue
        if runs_ok(z, init, d.initial_on_duration if init else None, d.min_on, 1):
            yield z


def pattern_count(instance):
    T = instance.T
    n = 1
    for g in instance.dispatchable_units:
        n *= 2 ** T
    for s in instance.storage_units:
        n *= 3 ** T
    for d in instance.adjustable_loads:
        n *= 2 ** (d.window_end - d.window_start + 1)
    return n


def all_patterns(instance):
    T = instance.T
    groups = [list(unit_patterns(g, T)) for g in instance.dispatchable_units]
    groups += [list(storage_patterns(s, T)) for s in instance.storage_units]
    groups += [list(load_patterns(d, T)) for d in instance.adjustable_loads]
    return itertools.product(*groups)


# -- per-pattern LP ---------------------------------------------------------

class _LP:
    """Continuous part of the scheduling problem for one binary pattern."""

    def __init__(self, instance, pattern, feeder_bands=None, capability=math.inf):
        T, tau = instance.T, instance.tau
        self.T = T
        names = []
        lo, hi = [], []
        self.constant = 0.0
        self.cost = []
        A_eq, b_eq, A_ub, b_ub = [], [], [], []

        def new(name, a, b, c=0.0):
            names.append(name)
            lo.append(a)
            hi.append(b)
            self.cost.append(c)
            return len(names) - 1

        pat = iter(pattern)
        rows_balance = [dict() for _ in range(T)]
        prices = instance.grid_link.market_price
        for g in instance.dispatchable_units:
            I = next(pat)
            prev_on = 1 if g.initial_committed else 0
            for k in range(T):
                self.constant += g.no_load_cost * I[k] * tau
                if I[k] and not prev_on:
                    self.constant += g.startup_cost
                if prev_on and not I[k]:
                    self.constant += g.shutdown_cost
                prev_on = I[k]
            P = [new(("P", k), g.p_min * I[k], g.p_max * I[k], g.marginal_cost * tau)
                 for k in range(T)]
            for k in range(T):
                rows_balance[k][P[k]] = 1.0
                if k == 0:
                    A_ub.append({P[0]: 1.0}); b_ub.append(g.ramp_up + g.initial_power)
                    A_ub.append({P[0]: -1.0}); b_ub.append(g.ramp_down - g.initial_power)
                else:
                    A_ub.append({P[k]: 1.0, P[k - 1]: -1.0}); b_ub.append(g.ramp_up)
                    A_ub.append({P[k - 1]: 1.0, P[k]: -1.0}); b_ub.append(g.ramp_down)
        for s in instance.storage_units:
            u, v = next(pat)
            Pd = [new(("Pd", k), s.p_dch_min * u[k], s.p_dch_max * u[k]) for k in range(T)]
            Pc = [new(("Pc", k), s.p_ch_min * v[k], s.p_ch_max * v[k]) for k in range(T)]
            C = [new(("C", k), s.cap_min, s.cap_max) for k in range(T)]
            for k in range(T):
                row = {C[k]: 1.0, Pd[k]: tau / s.efficiency, Pc[k]: -tau}
                if k:
                    row[C[k - 1]] = -1.0
                A_eq.append(row)
                b_eq.append(s.initial_energy if k == 0 else 0.0)
                rows_balance[k][Pd[k]] = 1.0
                rows_balance[k][Pc[k]] = -1.0
        for d in instance.adjustable_loads:
            z = next(pat)
            D = [new(("D", k), d.d_min[k] * z[k], d.d_max[k] * z[k]) for k in range(T)]
            A_eq.append({D[k]: tau for k in range(T)})
            b_eq.append(d.energy)
            for k in range(T):
                rows_balance[k][D[k]] = -1.0
        lim = instance.grid_link.transfer_limit
        self.PM = [new(("PM", k), -lim, lim, prices[k] * tau) for k in range(T)]
        fp = instance.fixed_profiles
        for k in range(T):
            rows_balance[k][self.PM[k]] = 1.0
            A_eq.append(rows_balance[k])
            b_eq.append(fp.fixed_load[k] - fp.nondispatchable_gen[k])

        P0 = instance.grid_link.initial_exchange
        first = 0 if P0 is not None else 1
        for k in range(first, T):
            a, b = -capability, capability
            if feeder_bands is not None:
                a, b = max(a, feeder_bands[0][k]), min(b, feeder_bands[1][k])
            row = {self.PM[k]: 1.0}
            const = 0.0
            if k:
                row[self.PM[k - 1]] = -1.0
            else:
                const = P0
            if math.isfinite(b):
                A_ub.append(dict(row)); b_ub.append(b + const)
            if math.isfinite(a):
                A_ub.append({j: -c for j, c in row.items()}); b_ub.append(-a - const)

        n = len(names)
        self.bounds = list(zip(lo, hi))
        self.A_eq = self._dense(A_eq, n)
        self.b_eq = np.array(b_eq)
        self.A_ub = self._dense(A_ub, n) if A_ub else None
        self.b_ub = np.array(b_ub) if A_ub else None
        self.n = n

    @staticmethod
    def _dense(rows, n):
        M = np.zeros((len(rows), n))
        for i, row in enumerate(rows):
            for j, c in row.items():
                M[i, j] += c
        return M

    def solve(self, c):
        res = linprog(c, A_ub=self.A_ub, b_ub=self.b_ub, A_eq=self.A_eq, b_eq=self.b_eq,
                      bounds=self.bounds, method="highs")
        return res.fun if res.status == 0 else None

    def min_cost(self):
        val = self.solve(np.array(self.cost))
        return None if val is None else val + self.constant

    def max_ramp(self, period, direction, P0=None):
        c = np.zeros(self.n)
        sign = 1.0 if direction == "up" else -1.0
        k = period - 1
        c[self.PM[k]] = -sign
        const = 0.0
        if k:
            c[self.PM[k - 1]] = sign
        else:
            const = -sign * P0
        val = self.solve(c)
        return None if val is None else -val + const


def enumerate_cost(instance, feeder_bands=None, capability=math.inf):
    """Least cost over all patterns, or None if nothing is feasible."""
    best = None
    for pattern in all_patterns(instance):
        val = _LP(instance, pattern, feeder_bands, capability).min_cost()
        if val is not None and (best is None or val < best):
            best = val
    return best


def enumerate_capability(instance):
    """(R, {t: max ramp}) by enumeration, or None if the instance is infeasible."""
    P0 = instance.grid_link.initial_exchange
    first = 1 if P0 is not None else 2
    periods = range(first, instance.T + 1)
    best = {t: -math.inf for t in periods}
    feasible = False
    for pattern in all_patterns(instance):
        lp = _LP(instance, pattern)
        for t in periods:
            for direction in ("up", "down"):
                val = lp.max_ramp(t, direction, P0)
                if val is not None:
                    feasible = True
                    best[t] = max(best[t], val)
    if not feasible:
        return None
    return min(best.values()), best


# -- random tiny instances ------------------------------------------------------

def random_instance(rng, max_patterns=64):
    """A tiny instance with at most one unit, one storage and one load."""
    while True:
        has = rng.random(3) < 0.6
        if not has.any():
            continue
        T = int(rng.integers(2, 5))
        inst = _draw(rng, T, *has)
        if pattern_count(inst) <= max_patterns:
            return inst


def _draw(rng, T, unit, storage, load):
    r = lambda a, b: int(rng.integers(a, b + 1))
    units, stores, loads = (), (), ()
    if unit:
        p_min = float(r(0, 2))
        p_max = p_min + r(1, 5)
        on = bool(rng.random() < 0.5)
        units = (DispatchableUnit(
            "G", p_min, p_max, marginal_cost=float(r(10, 60)), ramp_up=float(r(2, 6)),
            ramp_down=float(r(2, 6)), no_load_cost=float(r(0, 5)), startup_cost=float(r(0, 20)),
            shutdown_cost=float(r(0, 5)), min_up=r(1, 3), min_down=r(1, 3),
            initial_committed=on, initial_power=float(r(int(p_min), int(p_max))) if on else 0.0,
            initial_state_duration=None if rng.random() < 0.5 else r(1, 2)),)
    if storage:
        cap = float(r(3, 8))
        mode = ("idle", "charging", "discharging")[r(0, 2)]
        stores = (StorageUnit(
            "S", p_dch_max=float(r(1, 3)), p_ch_max=float(r(1, 3)), cap_max=cap,
            initial_energy=float(r(1, int(cap) - 1)), p_dch_min=0.5 * r(0, 1),
            p_ch_min=0.5 * r(0, 1), cap_min=float(r(0, 1)),
            efficiency=(0.8, 0.9, 1.0)[r(0, 2)], min_charge_time=r(1, 2),
            min_discharge_time=r(1, 2), initial_mode=mode,
            initial_mode_duration=None if mode == "idle" or rng.random() < 0.5 else 1),)
    if load:
        a = r(1, T)
        b = r(a, T)
        dmax = float(r(1, 3))
        dmin = 0.5 * r(0, 1)
        n = b - a + 1
        energy = round(float(rng.uniform(dmin * n, dmax * n)), 1)
        loads = (AdjustableLoad("L", (dmin,) * T, (dmax,) * T, energy, a, b, min_on=r(1, 2)),)
    fixed = tuple(float(r(3, 10)) for _ in range(T))
    gen = tuple(float(r(0, 3)) for _ in range(T))
    price = tuple(float(r(20, 80)) for _ in range(T))
    P0 = float(r(-2, 8)) if rng.random() < 0.3 else None
    link = GridLink(float(r(4, 20)), price, P0)
    return MicrogridInstance(TimeGrid(T, 1.0), FixedProfiles(fixed, gen), link, units, stores,
                             loads)


# -- dense LP by vertex enumeration -------------------------------------------------

def vertex_lp(c, A, senses, b, lb, ub):
    """Minimise c x subject to rows ``A x (sense) b`` and finite bounds.

    Every vertex has n active constraints: k general rows (all equality rows
    among them) and n - k variables at a bound. Returns (objective, x) or
    None when infeasible.
    """
    c, A, b = np.asarray(c, float), np.asarray(A, float).reshape(-1, len(c)), np.asarray(b, float)
    lb, ub = np.asarray(lb, float), np.asarray(ub, float)
    n, m = len(c), len(b)
    eq = [i for i in range(m) if senses[i] == "="]
    ineq = [i for i in range(m) if senses[i] != "="]
    best = None
    tol = 1e-9
    for k in range(len(eq), min(m, n) + 1):
        for extra in itertools.combinations(ineq, k - len(eq)):
            S = list(eq) + list(extra)
            for F in itertools.combinations(range(n), k):
                N = [j for j in range(n) if j not in F]
                combos = np.array(list(itertools.product((0, 1), repeat=len(N))), dtype=float)
                XN = lb[N] + combos * (ub[N] - lb[N]) if N else np.zeros((1, 0))
                X = np.empty((len(XN), n))
                X[:, N] = XN
                if k:
                    M = A[np.ix_(S, F)]
                    if abs(np.linalg.det(M)) < 1e-12:
                        continue
                    rhs = b[S][None, :] - XN @ A[np.ix_(S, N)].T
                    X[:, list(F)] = np.linalg.solve(M, rhs.T).T
                ok = np.all(X >= lb - tol, axis=1) & np.all(X <= ub + tol, axis=1)
                if m:
                    AX = X @ A.T
                    for i in range(m):
                        if senses[i] == "<=":
                            ok &= AX[:, i] <= b[i] + tol
                        elif senses[i] == ">=":
                            ok &= AX[:, i] >= b[i] - tol
                        else:
                            ok &= np.abs(AX[:, i] - b[i]) <= tol
                for x in X[ok]:
                    val = float(c @ x)
                    if best is None or val < best[0]:
                        best = (val, x)
    return best
