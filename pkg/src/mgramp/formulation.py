"""Solver-agnostic MILP model and the microgrid constraint builders.

Every builder returns a new :class:`MILPModel`; inputs are never mutated.
Variable tags follow ``NAME[index,...]`` with 1-based periods, e.g.
``P[G1,3]`` or ``PM[7]``; constraint tags use the same index style.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .instance import InvalidInstanceError, MicrogridInstance, validate_instance

CONTINUOUS = "continuous"
BINARY = "binary"
SENSES = ("<=", "=", ">=")


def tag(name: str, *index) -> str:
    return f"{name}[{','.join(str(i) for i in index)}]"


@dataclass(frozen=True)
class Variable:
    id: int
    tag: str
    kind: str
    lb: float
    ub: float


@dataclass(frozen=True)
class Constraint:
    coeffs: tuple[tuple[int, float], ...]
    sense: str
    rhs: float
    tag: str


@dataclass(frozen=True)
class Objective:
    sense: str = "min"
    coeffs: tuple[tuple[int, float], ...] = ()
    constant: float = 0.0


class ModelError(ValueError):
    pass


@dataclass
class MILPModel:
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: Objective = field(default_factory=Objective)
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    def copy(self) -> "MILPModel":
        return MILPModel(list(self.variables), list(self.constraints), self.objective,
                         dict(self._index))

    # -- construction -----------------------------------------------------
    def add_var(self, tag_: str, kind: str = CONTINUOUS, lb: float = 0.0,
                ub: float = math.inf) -> int:
        if tag_ in self._index:
            raise ModelError(f"duplicate variable tag {tag_}")
        if kind not in (CONTINUOUS, BINARY):
            raise ModelError(f"unknown variable kind {kind!r}")
        if kind == BINARY and not (0 <= lb <= ub <= 1):
            raise ModelError(f"binary {tag_} needs bounds within [0, 1]")
        vid = len(self.variables)
        self.variables.append(Variable(vid, tag_, kind, float(lb), float(ub)))
        self._index[tag_] = vid
        return vid

    def add_constraint(self, terms: Iterable[tuple[int, float]], sense: str, rhs: float,
                       tag_: str) -> Optional[Constraint]:
        """Append ``sum(coef * x) sense rhs``; duplicate ids are merged and
        zero coefficients dropped. A row left without variables is checked
        and discarded (``None`` is returned)."""
        if sense not in SENSES:
            raise ModelError(f"unknown sense {sense!r}")
        merged: dict[int, float] = {}
        for vid, coef in terms:
            merged[vid] = merged.get(vid, 0.0) + float(coef)
        coeffs = tuple((v, c) for v, c in merged.items() if c != 0.0)
        rhs = float(rhs)
        if not coeffs:
            ok = {"<=": 0 <= rhs + 1e-12, ">=": 0 >= rhs - 1e-12, "=": abs(rhs) <= 1e-12}[sense]
            if not ok:
                raise ModelError(f"constant row {tag_} is infeasible")
            return None
        row = Constraint(coeffs, sense, rhs, tag_)
        self.constraints.append(row)
        return row

    def set_bounds(self, vid: int, lb: float, ub: float) -> None:
        v = self.variables[vid]
        self.variables[vid] = Variable(v.id, v.tag, v.kind, float(lb), float(ub))

    # -- queries ----------------------------------------------------------
    def var(self, tag_: str) -> int:
        return self._index[tag_]

    def has_var(self, tag_: str) -> bool:
        return tag_ in self._index

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_binaries(self) -> int:
        return sum(v.kind == BINARY for v in self.variables)

    def binary_ids(self) -> list[int]:
        return [v.id for v in self.variables if v.kind == BINARY]

    def check(self) -> None:
        """Raise :class:`ModelError` if a structural invariant is broken."""
        n = len(self.variables)
        for v in self.variables:
            if math.isnan(v.lb) or math.isnan(v.ub) or v.lb > v.ub:
                raise ModelError(f"bad bounds on {v.tag}")
            if v.kind == BINARY and not (0 <= v.lb and v.ub <= 1):
                raise ModelError(f"binary {v.tag} bounds outside [0, 1]")
        for row in self.constraints:
            if not math.isfinite(row.rhs):
                raise ModelError(f"non-finite rhs in {row.tag}")
            for vid, coef in row.coeffs:
                if not 0 <= vid < n:
                    raise ModelError(f"{row.tag} references unknown variable {vid}")
                if not math.isfinite(coef):
                    raise ModelError(f"non-finite coefficient in {row.tag}")
        for vid, coef in self.objective.coeffs:
            if not 0 <= vid < n or not math.isfinite(coef):
                raise ModelError("bad objective entry")

    def evaluate(self, x: Sequence[float]) -> float:
        return self.objective.constant + sum(c * x[v] for v, c in self.objective.coeffs)

    def max_violation(self, x: Sequence[float]) -> float:
        """Largest bound or row violation of point ``x`` (absolute units)."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        for v in self.variables:
            worst = max(worst, v.lb - x[v.id], x[v.id] - v.ub)
        for row in self.constraints:
            act = sum(c * x[v] for v, c in row.coeffs)
            if row.sense == "<=":
                worst = max(worst, act - row.rhs)
            elif row.sense == ">=":
                worst = max(worst, row.rhs - act)
            else:
                worst = max(worst, abs(act - row.rhs))
        return worst

    def arrays(self):
        """Dense-vector / sparse-matrix view used by the solvers.

        Returns ``(c, A, row_lo, row_hi, lb, ub, is_binary, sign)`` where the
        objective is always expressed for minimisation (``sign`` is -1 for
        max models) and rows read ``row_lo <= A x <= row_hi``.
        """
        n, m = len(self.variables), len(self.constraints)
        sign = -1.0 if self.objective.sense == "max" else 1.0
        c = np.zeros(n)
        for vid, coef in self.objective.coeffs:
            c[vid] += sign * coef
        rows, cols, vals = [], [], []
        lo = np.full(m, -np.inf)
        hi = np.full(m, np.inf)
        for i, row in enumerate(self.constraints):
            for vid, coef in row.coeffs:
                rows.append(i)
                cols.append(vid)
                vals.append(coef)
            if row.sense in ("<=", "="):
                hi[i] = row.rhs
            if row.sense in (">=", "="):
                lo[i] = row.rhs
        A = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
        lb = np.array([v.lb for v in self.variables])
        ub = np.array([v.ub for v in self.variables])
        is_bin = np.array([v.kind == BINARY for v in self.variables], dtype=bool)
        return c, A, lo, hi, lb, ub, is_bin, sign


class VariableMap:
    """Bidirectional tag <-> variable id mapping."""

    def __init__(self, tags: Sequence[str]):
        self._tags = list(tags)
        self._ids = {t: i for i, t in enumerate(self._tags)}
        if len(self._ids) != len(self._tags):
            raise ModelError("variable tags are not unique")

    @classmethod
    def of(cls, model: MILPModel) -> "VariableMap":
        return cls([v.tag for v in model.variables])

    def id(self, name: str, *index) -> int:
        return self._ids[tag(name, *index)]

    def get(self, name: str, *index) -> Optional[int]:
        return self._ids.get(tag(name, *index))

    def tag(self, vid: int) -> str:
        return self._tags[vid]

    def __len__(self) -> int:
        return len(self._tags)

    def __contains__(self, tag_: str) -> bool:
        return tag_ in self._ids


class RampBandError(ValueError):
    """A transition whose admissible exchange-ramp interval is empty."""

    def __init__(self, period: int, low: float, up: float, capability: float):
        self.period = period
        self.low = low
        self.up = up
        self.capability = capability
        if low > up:
            self.kind = "data"
            msg = (f"period {period}: ramp band is empty before the capability limit "
                   f"(low {low:g} > up {up:g}); check the ramp target and feeder data")
        else:
            self.kind = "capability"
            msg = (f"period {period}: utility requires an exchange ramp in [{low:g}, {up:g}] "
                   f"MW but the microgrid capability is only +/-{capability:g} MW")
        super().__init__(msg)


# -- component blocks -------------------------------------------------------

def _min_duration(model: MILPModel, ids: Sequence[int], x0: float, K: int, *, on: bool,
                  name: str, owner: str, carried: int) -> None:
    """Minimum-duration rows for an indicator sequence (ids[t-1] is period t).

    ``on=True`` keeps the indicator at 1 for K periods after it switches on:
    ``x_s >= x_t - x_{t-1}`` for s in [t, t+K-1]. ``on=False`` keeps it at 0
    after it switches off: ``1 - x_s >= x_{t-1} - x_t``. ``carried`` periods
    at the start inherit the obligation from before the horizon.
    """
    T = len(ids)
    for t in range(1, T + 1):
        for s in range(t, min(t + K - 1, T) + 1):
            terms = [(ids[s - 1], 1.0), (ids[t - 1], -1.0)]
            rhs = 0.0
            if t == 1:
                rhs -= x0
            else:
                terms.append((ids[t - 2], 1.0))
            if on:
                model.add_constraint(terms, ">=", rhs, tag(name, owner, t, s))
            else:
                model.add_constraint(terms, "<=", 1.0 + rhs, tag(name, owner, t, s))
    for t in range(1, min(carried, T) + 1):
        if on:
            model.add_constraint([(ids[t - 1], 1.0)], ">=", 1.0, tag(name + "_init", owner, t))
        else:
            model.add_constraint([(ids[t - 1], 1.0)], "<=", 0.0, tag(name + "_init", owner, t))


def _carried(duration: Optional[int], K: int) -> int:
    if duration is None:
        return 0
    return max(0, K - duration)


def build_component_constraints(instance: MicrogridInstance,
                                terminal_soc_at_least_initial: bool = False
                                ) -> tuple[MILPModel, VariableMap]:
    """Variables and constraints of every microgrid component.

    Also creates the grid exchange variables ``PM[t]`` (bounded by the
    instance transfer limit) so that later builders can reference them.
    """
    report = validate_instance(instance)
    if not report.ok:
        raise InvalidInstanceError(report)
    T, tau = instance.T, instance.tau
    m = MILPModel()
    periods = range(1, T + 1)

    for g in instance.dispatchable_units:
        P = [m.add_var(tag("P", g.id, t), CONTINUOUS, 0.0, g.p_max) for t in periods]
        I = [m.add_var(tag("I", g.id, t), BINARY, 0.0, 1.0) for t in periods]
        SU = [m.add_var(tag("SU", g.id, t), CONTINUOUS, 0.0, g.startup_cost) for t in periods]
        SD = [m.add_var(tag("SD", g.id, t), CONTINUOUS, 0.0, g.shutdown_cost) for t in periods]
        I0 = 1.0 if g.initial_committed else 0.0
        P0 = float(g.initial_power)
        for t in periods:
            k = t - 1
            m.add_constraint([(P[k], 1.0), (I[k], -g.p_min)], ">=", 0.0, tag("capacity_min", g.id, t))
            m.add_constraint([(P[k], 1.0), (I[k], -g.p_max)], "<=", 0.0, tag("capacity_max", g.id, t))
            if t == 1:
                m.add_constraint([(P[k], 1.0)], "<=", g.ramp_up + P0, tag("ramp_up", g.id, t))
                m.add_constraint([(P[k], -1.0)], "<=", g.ramp_down - P0, tag("ramp_down", g.id, t))
            else:
                m.add_constraint([(P[k], 1.0), (P[k - 1], -1.0)], "<=", g.ramp_up,
                                 tag("ramp_up", g.id, t))
                m.add_constraint([(P[k - 1], 1.0), (P[k], -1.0)], "<=", g.ramp_down,
                                 tag("ramp_down", g.id, t))
        on_carry = _carried(g.initial_state_duration, g.min_up) if g.initial_committed else 0
        off_carry = 0 if g.initial_committed else _carried(g.initial_state_duration, g.min_down)
        _min_duration(m, I, I0, g.min_up, on=True, name="min_up", owner=g.id, carried=on_carry)
        _min_duration(m, I, I0, g.min_down, on=False, name="min_down", owner=g.id,
                      carried=off_carry)
        for t in periods:
            k = t - 1
            prev = [(I[k - 1], 1.0)] if t > 1 else []
            c0 = I0 if t == 1 else 0.0
            if g.startup_cost > 0:
                terms = [(SU[k], 1.0), (I[k], -g.startup_cost)] + [(v, g.startup_cost) for v, _ in prev]
                m.add_constraint(terms, ">=", -g.startup_cost * c0, tag("startup", g.id, t))
            if g.shutdown_cost > 0:
                terms = [(SD[k], 1.0), (I[k], g.shutdown_cost)] + [(v, -g.shutdown_cost) for v, _ in prev]
                m.add_constraint(terms, ">=", g.shutdown_cost * c0, tag("shutdown", g.id, t))

    for s in instance.storage_units:
        Pd = [m.add_var(tag("Pdch", s.id, t), CONTINUOUS, 0.0, s.p_dch_max) for t in periods]
        Pc = [m.add_var(tag("Pch", s.id, t), CONTINUOUS, 0.0, s.p_ch_max) for t in periods]
        u = [m.add_var(tag("u", s.id, t), BINARY, 0.0, 1.0) for t in periods]
        v = [m.add_var(tag("v", s.id, t), BINARY, 0.0, 1.0) for t in periods]
        C = [m.add_var(tag("C", s.id, t), CONTINUOUS, s.cap_min, s.cap_max) for t in periods]
        for t in periods:
            k = t - 1
            m.add_constraint([(Pd[k], 1.0), (u[k], -s.p_dch_max)], "<=", 0.0, tag("discharge_max", s.id, t))
            m.add_constraint([(Pd[k], 1.0), (u[k], -s.p_dch_min)], ">=", 0.0, tag("discharge_min", s.id, t))
            m.add_constraint([(Pc[k], 1.0), (v[k], -s.p_ch_max)], "<=", 0.0, tag("charge_max", s.id, t))
            m.add_constraint([(Pc[k], 1.0), (v[k], -s.p_ch_min)], ">=", 0.0, tag("charge_min", s.id, t))
            m.add_constraint([(u[k], 1.0), (v[k], 1.0)], "<=", 1.0, tag("mode_exclusive", s.id, t))
            terms = [(C[k], 1.0), (Pd[k], tau / s.efficiency), (Pc[k], -tau)]
            if t == 1:
                m.add_constraint(terms, "=", s.initial_energy, tag("soc", s.id, t))
            else:
                m.add_constraint(terms + [(C[k - 1], -1.0)], "=", 0.0, tag("soc", s.id, t))
        u0 = 1.0 if s.initial_mode == "discharging" else 0.0
        v0 = 1.0 if s.initial_mode == "charging" else 0.0
        _min_duration(m, v, v0, s.min_charge_time, on=True, name="min_charge", owner=s.id,
                      carried=_carried(s.initial_mode_duration, s.min_charge_time) if v0 else 0)
        _min_duration(m, u, u0, s.min_discharge_time, on=True, name="min_discharge", owner=s.id,
                      carried=_carried(s.initial_mode_duration, s.min_discharge_time) if u0 else 0)
        if terminal_soc_at_least_initial:
            m.add_constraint([(C[-1], 1.0)], ">=", s.initial_energy, tag("terminal_soc", s.id))

    for d in instance.adjustable_loads:
        inside = [d.window_start <= t <= d.window_end for t in periods]
        D = [m.add_var(tag("D", d.id, t), CONTINUOUS, 0.0, d.d_max[t - 1] if inside[t - 1] else 0.0)
             for t in periods]
        z = [m.add_var(tag("z", d.id, t), BINARY, 0.0, 1.0 if inside[t - 1] else 0.0)
             for t in periods]
        for t in periods:
            if not inside[t - 1]:
                continue
            k = t - 1
            m.add_constraint([(D[k], 1.0), (z[k], -d.d_min[k])], ">=", 0.0, tag("demand_min", d.id, t))
            m.add_constraint([(D[k], 1.0), (z[k], -d.d_max[k])], "<=", 0.0, tag("demand_max", d.id, t))
        z0 = 1.0 if d.initial_operating else 0.0
        _min_duration(m, z, z0, d.min_on, on=True, name="min_on", owner=d.id,
                      carried=_carried(d.initial_on_duration, d.min_on) if z0 else 0)
        m.add_constraint([(D[t - 1], tau) for t in periods if inside[t - 1]], "=", d.energy,
                         tag("energy", d.id))

    limit = instance.grid_link.transfer_limit
    for t in periods:
        m.add_var(tag("PM", t), CONTINUOUS, -limit, limit)
    return m, VariableMap.of(m)


def add_power_balance(model: MILPModel, instance: MicrogridInstance) -> MILPModel:
    """Per-period supply = demand equality (single-bus balance)."""
    out = model.copy()
    fp = instance.fixed_profiles
    for t in range(1, instance.T + 1):
        terms = [(out.var(tag("P", g.id, t)), 1.0) for g in instance.dispatchable_units]
        for s in instance.storage_units:
            terms.append((out.var(tag("Pdch", s.id, t)), 1.0))
            terms.append((out.var(tag("Pch", s.id, t)), -1.0))
        terms.append((out.var(tag("PM", t)), 1.0))
        terms += [(out.var(tag("D", d.id, t)), -1.0) for d in instance.adjustable_loads]
        rhs = fp.fixed_load[t - 1] - fp.nondispatchable_gen[t - 1]
        out.add_constraint(terms, "=", rhs, tag("balance", t))
    return out


def add_grid_limits(model: MILPModel, limit: float) -> MILPModel:
    """Bound every exchange variable to ``[-limit, limit]``."""
    if not math.isfinite(limit) or limit < 0:
        raise ValueError(f"transfer limit must be a non-negative number, got {limit}")
    out = model.copy()
    t = 1
    while out.has_var(tag("PM", t)):
        out.set_bounds(out.var(tag("PM", t)), -limit, limit)
        t += 1
    return out


def set_cost_objective(model: MILPModel, instance: MicrogridInstance) -> MILPModel:
    """Generation, start/stop and energy-purchase cost, minimised."""
    out = model.copy()
    tau = instance.tau
    coeffs: list[tuple[int, float]] = []
    for g in instance.dispatchable_units:
        for t in range(1, instance.T + 1):
            coeffs.append((out.var(tag("P", g.id, t)), g.marginal_cost * tau))
            coeffs.append((out.var(tag("I", g.id, t)), g.no_load_cost * tau))
            coeffs.append((out.var(tag("SU", g.id, t)), 1.0))
            coeffs.append((out.var(tag("SD", g.id, t)), 1.0))
    prices = instance.grid_link.market_price
    for t in range(1, instance.T + 1):
        coeffs.append((out.var(tag("PM", t)), prices[t - 1] * tau))
    out.objective = Objective("min", tuple((v, c) for v, c in coeffs if c != 0.0), 0.0)
    return out


def set_ramp_objective(model: MILPModel, period: int, direction: str,
                       initial_exchange: Optional[float] = None) -> MILPModel:
    """Maximise the exchange change into ``period`` (``up``) or its
    negation (``down``)."""
    if direction not in ("up", "down"):
        raise ValueError(f"direction must be 'up' or 'down', got {direction!r}")
    sign = 1.0 if direction == "up" else -1.0
    out = model.copy()
    cur = out.var(tag("PM", period))
    if period == 1:
        if initial_exchange is None:
            raise ValueError("period 1 has no predecessor unless an initial exchange is given")
        out.objective = Objective("max", ((cur, sign),), -sign * float(initial_exchange))
    elif period >= 2:
        prev = out.var(tag("PM", period - 1))
        out.objective = Objective("max", ((cur, sign), (prev, -sign)), 0.0)
    else:
        raise ValueError(f"invalid period {period}")
    return out


def intersect_band(low: float, up: float, capability: float) -> tuple[float, float]:
    return max(low, -capability), min(up, capability)


def add_ramp_band(model: MILPModel, low: Sequence[float], up: Sequence[float],
                  capability: float, initial_exchange: Optional[float] = None) -> MILPModel:
    """Constrain each exchange transition to ``[low, up]`` intersected with
    ``[-capability, capability]``.

    ``low``/``up`` are indexed by period (entry ``t-1`` bounds the change
    into period t); the period-1 entry only applies when an initial exchange
    is supplied. Raises :class:`RampBandError` on the first empty interval.
    """
    if capability < 0 or math.isnan(capability):
        raise ValueError("ramp capability must be non-negative")
    T = len(low)
    first = 1 if initial_exchange is not None else 2
    bands = []
    for t in range(first, T + 1):
        lo, hi = intersect_band(low[t - 1], up[t - 1], capability)
        if lo > hi + 1e-12:
            raise RampBandError(t, low[t - 1], up[t - 1], capability)
        bands.append((t, lo, hi))
    out = model.copy()
    for t, lo, hi in bands:
        cur = out.var(tag("PM", t))
        if t == 1:
            terms, const = [(cur, 1.0)], float(initial_exchange)
        else:
            terms, const = [(cur, 1.0), (out.var(tag("PM", t - 1)), -1.0)], 0.0
        if math.isfinite(lo) and math.isfinite(hi) and abs(hi - lo) <= 1e-12:
            out.add_constraint(terms, "=", lo + const, tag("ramp_band", t))
            continue
        if math.isfinite(hi):
            out.add_constraint(terms, "<=", hi + const, tag("ramp_band_up", t))
        if math.isfinite(lo):
            out.add_constraint(terms, ">=", lo + const, tag("ramp_band_low", t))
    return out


def build_base_model(instance: MicrogridInstance,
                     terminal_soc_at_least_initial: bool = False
                     ) -> tuple[MILPModel, VariableMap]:
    """Component blocks, power balance and transfer limits."""
    model, vmap = build_component_constraints(instance, terminal_soc_at_least_initial)
    model = add_power_balance(model, instance)
    model = add_grid_limits(model, instance.grid_link.transfer_limit)
    return model, vmap


def fix_variables(model: MILPModel, values: Mapping[int, float]) -> MILPModel:
    out = model.copy()
    for vid, val in values.items():
        out.set_bounds(vid, val, val)
    return out


# -- LP text dump -----------------------------------------------------------

def _lp_name(tag_: str) -> str:
    return tag_.replace("[", "(").replace("]", ")")


def _lp_num(x: float) -> str:
    return repr(float(x)) if x != int(x) or abs(x) >= 1e15 else str(int(x))


def _lp_expr(coeffs: Sequence[tuple[int, float]], names: Sequence[str]) -> str:
    if not coeffs:
        return "0"
    parts = []
    for k, (vid, c) in enumerate(coeffs):
        op = "-" if c < 0 else "+"
        mag = abs(c)
        term = names[vid] if mag == 1 else f"{_lp_num(mag)} {names[vid]}"
        parts.append(f"{op} {term}" if k or c < 0 else term)
    return " ".join(parts)


def to_lp_text(model: MILPModel) -> str:
    """Render the model in CPLEX-style LP text (see README for the grammar)."""
    names = [_lp_name(v.tag) for v in model.variables]
    lines = [f"\\ objective constant: {_lp_num(model.objective.constant)}",
             "Maximize" if model.objective.sense == "max" else "Minimize",
             f" obj: {_lp_expr(model.objective.coeffs, names)}",
             "Subject To"]
    op = {"<=": "<=", ">=": ">=", "=": "="}
    for k, row in enumerate(model.constraints):
        lines.append(f" c{k}_{_lp_name(row.tag)}: {_lp_expr(row.coeffs, names)} "
                     f"{op[row.sense]} {_lp_num(row.rhs)}")
    lines.append("Bounds")
    for v in model.variables:
        if v.kind == BINARY and v.lb == 0 and v.ub == 1:
            continue
        lo = "-inf" if v.lb == -math.inf else _lp_num(v.lb)
        hi = "+inf" if v.ub == math.inf else _lp_num(v.ub)
        lines.append(f" {lo} <= {names[v.id]} <= {hi}")
    bins = [names[v.id] for v in model.variables if v.kind == BINARY]
    if bins:
        lines.append("Binaries")
        for k in range(0, len(bins), 8):
            lines.append(" " + " ".join(bins[k:k + 8]))
    lines.append("End")
    return "\n".join(lines) + "\n"
