"""Ramping capability, ramp-constrained scheduling and the sweep studies.

Sign convention: ``P_M > 0`` is import from the utility grid. A transition
``t`` is the change ``P_M[t] - P_M[t-1]``; transitions start at period 2
unless the instance carries an initial exchange ``P_M0``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .formulation import (RampBandError, add_ramp_band, build_base_model, set_cost_objective,
                          set_ramp_objective)
from .instance import FeederContext, InvalidInstanceError, MicrogridInstance, check_feeder
from .schedule import Schedule, certify_schedule, decode_schedule
from .solver import ERROR, INFEASIBLE, OPTIMAL, Backend, MILPSolution, SolveOptions, get_backend

LINE_TOL = 1e-6


class ScheduleInfeasible(Exception):
    """No schedule exists. ``kind`` is ``band`` (an empty ramp band at
    ``period``), ``balance`` (the components cannot meet demand at all) or
    ``bands`` (every band is non-empty but they cannot hold together)."""

    def __init__(self, kind: str, message: str, period: Optional[int] = None):
        self.kind = kind
        self.period = period
        super().__init__(message)


class SolverFailure(RuntimeError):
    """The solver stopped without a proven optimum (limit or numerical error)."""

    def __init__(self, solution: MILPSolution, what: str):
        self.solution = solution
        super().__init__(f"{what}: solver returned {solution.status}"
                         + (f" ({solution.message})" if solution.message else ""))


class CertificationError(RuntimeError):
    """A solver-optimal schedule failed the independent check (a bug)."""

    def __init__(self, issues: list[str]):
        self.issues = issues
        super().__init__("schedule failed certification: " + "; ".join(issues[:5]))


# -- capability -----------------------------------------------------------------

@dataclass(frozen=True)
class DirectionalSolve:
    period: int
    direction: str
    status: str
    value: float
    bound: float
    nodes: int
    wall_time: float
    line_bound_active: bool  # |P_M| at the transfer limit in t or t-1


@dataclass
class CapabilityResult:
    R: float
    ramp_up: dict[int, float]
    ramp_down: dict[int, float]
    argmin: int
    transfer_limit: float
    diagnostics: list[DirectionalSolve] = field(default_factory=list)

    @property
    def periods(self) -> list[int]:
        return sorted(self.ramp_up)

    def ramp(self, t: int) -> float:
        return max(self.ramp_up[t], self.ramp_down[t])

    @property
    def line_bound_active(self) -> bool:
        return any(d.line_bound_active for d in self.diagnostics)


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, items))


def _transitions(instance: MicrogridInstance) -> list[int]:
    first = 1 if instance.grid_link.initial_exchange is not None else 2
    return list(range(first, instance.T + 1))


def ramping_capability(instance: MicrogridInstance, options: SolveOptions = SolveOptions(),
                       backend: Optional[Backend] = None, workers: int = 1) -> CapabilityResult:
    """Min over transitions of the largest achievable exchange ramp.

    Each transition gets two independent MILPs (largest increase, largest
    decrease) over the full component model.
    """
    backend = backend or get_backend()
    base, vmap = build_base_model(instance)
    P0 = instance.grid_link.initial_exchange
    limit = instance.grid_link.transfer_limit
    jobs = [(t, d) for t in _transitions(instance) for d in ("up", "down")]

    def run(job) -> tuple[DirectionalSolve, MILPSolution]:
        t, direction = job
        model = set_ramp_objective(base, t, direction, P0)
        sol = backend.solve_milp(model, options)
        active = False
        if sol.has_solution:
            cur = sol.x[vmap.id("PM", t)]
            prev = sol.x[vmap.id("PM", t - 1)] if t > 1 else P0
            active = any(abs(p) >= limit - LINE_TOL for p in (cur, prev))
        return DirectionalSolve(t, direction, sol.status, sol.objective, sol.bound, sol.nodes,
                                sol.wall_time, active), sol

    results = _map(run, jobs, workers)
    for diag, sol in results:
        if diag.status == INFEASIBLE:
            raise ScheduleInfeasible(
                "balance", f"instance infeasible: no schedule meets the power balance and "
                           f"component limits (found while solving period {diag.period})")
        if diag.status != OPTIMAL:
            raise SolverFailure(sol, f"ramp {diag.direction} into period {diag.period}")
    up = {d.period: d.value for d, _ in results if d.direction == "up"}
    down = {d.period: d.value for d, _ in results if d.direction == "down"}
    per_t = {t: max(up[t], down[t]) for t in up}
    # min over t; ties go to the earliest period
    argmin = min(per_t, key=lambda t: (per_t[t], t))
    return CapabilityResult(per_t[argmin], up, down, argmin, limit, [d for d, _ in results])


# -- ramp-constrained scheduling ----------------------------------------------------

def compute_ramp_bounds(feeder: FeederContext) -> tuple[np.ndarray, np.ndarray]:
    """Per-period bounds on the exchange change so that the utility ramp
    stays within the target: ``low[t] <= P_M[t] - P_M[t-1] <= up[t]``.

    Index ``t-1`` holds transition t. Period 1 has no feeder predecessor and
    gets ``(-inf, inf)``.
    """
    load = np.asarray(feeder.customer_net_load, dtype=float)
    delta = np.asarray(feeder.ramp_targets(), dtype=float)
    step = np.zeros_like(load)
    step[1:] = load[1:] - load[:-1]
    with np.errstate(invalid="ignore"):
        low = -delta - step
        up = delta - step
    if load.size:
        low[0], up[0] = -math.inf, math.inf
    return low, up


@dataclass(frozen=True)
class UtilityProfile:
    exchange: tuple[float, ...]
    customer: tuple[float, ...]
    utility: tuple[float, ...]  # P_M + customer net load
    ramp: tuple[float, ...]  # nan in period 1

    @property
    def max_abs_ramp(self) -> float:
        vals = [abs(r) for r in self.ramp[1:]]
        return max(vals) if vals else 0.0


def utility_ramp_profile(schedule: Schedule, feeder: FeederContext) -> UtilityProfile:
    if len(feeder.customer_net_load) != schedule.T:
        raise ValueError(f"feeder has {len(feeder.customer_net_load)} periods, "
                         f"schedule has {schedule.T}")
    pu = [m + c for m, c in zip(schedule.exchange, feeder.customer_net_load)]
    ramp = [math.nan] + [pu[k] - pu[k - 1] for k in range(1, len(pu))]
    return UtilityProfile(tuple(schedule.exchange), tuple(feeder.customer_net_load), tuple(pu),
                          tuple(ramp))


def _check_feeder(instance: MicrogridInstance, feeder: FeederContext) -> None:
    report = check_feeder(feeder, instance.T)
    if not report.ok:
        raise InvalidInstanceError(report)


def build_schedule_model(instance: MicrogridInstance, feeder: Optional[FeederContext] = None,
                         R: float = math.inf, terminal_soc_at_least_initial: bool = False):
    """Cost-minimising model with the merged ramp bands; returns
    ``(model, vmap, base)`` where ``base`` has no ramp bands."""
    if math.isnan(R) or R < 0:
        raise ValueError(f"ramp capability must be non-negative, got {R}")
    base, vmap = build_base_model(instance, terminal_soc_at_least_initial)
    T = instance.T
    if feeder is not None:
        _check_feeder(instance, feeder)
        low, up = compute_ramp_bounds(feeder)
    else:
        low, up = np.full(T, -math.inf), np.full(T, math.inf)
    try:
        model = add_ramp_band(base, low, up, R, instance.grid_link.initial_exchange)
    except RampBandError as exc:
        raise ScheduleInfeasible("band", str(exc), exc.period) from None
    return set_cost_objective(model, instance), vmap, base


def optimal_schedule(instance: MicrogridInstance, feeder: Optional[FeederContext] = None,
                     R: float = math.inf, options: SolveOptions = SolveOptions(),
                     backend: Optional[Backend] = None,
                     terminal_soc_at_least_initial: bool = False) -> tuple[Schedule, float]:
    """Least-cost schedule with the exchange ramp kept inside the utility
    band and within ``[-R, R]``.

    Without a feeder (or with an infinite target) only the capability limit
    ``R`` applies; ``R = inf`` gives the unconstrained optimum.
    """
    backend = backend or get_backend()
    model, vmap, base = build_schedule_model(instance, feeder, R, terminal_soc_at_least_initial)
    sol = backend.solve_milp(model, options)
    if sol.status == INFEASIBLE:
        free = backend.solve_milp(set_cost_objective(base, instance), options)
        if free.status == INFEASIBLE:
            raise ScheduleInfeasible("balance", "no schedule meets the power balance and "
                                                "component limits, even without ramp bands")
        raise ScheduleInfeasible("bands", "each ramp band is non-empty, but the component "
                                          "constraints cannot follow all of them together")
    if sol.status != OPTIMAL:
        raise SolverFailure(sol, "optimal schedule")
    schedule = decode_schedule(instance, vmap, sol.x, sol.objective)
    issues = certify_schedule(schedule, instance, feeder, R)
    if issues:
        raise CertificationError(issues)
    return schedule, sol.objective


# -- sweeps -------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    parameter: float
    value: float  # R for line-capacity sweeps, cost for ramp-limit sweeps
    cost: float
    status: str
    line_bound_active: Optional[bool] = None
    message: str = ""


@dataclass
class SweepCurve:
    kind: str  # "line_capacity" or "ramp_limit"
    points: list[SweepPoint]

    def feasible(self) -> list[SweepPoint]:
        return [p for p in self.points if p.status == OPTIMAL]


def _check_increasing(values: Sequence[float], what: str) -> list[float]:
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError(f"{what}: at least one value is required")
    if any(math.isnan(v) or v < 0 for v in vals):
        raise ValueError(f"{what}: values must be non-negative")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ValueError(f"{what}: values must be strictly increasing")
    return vals


def _failure_status(exc: Exception) -> str:
    if isinstance(exc, ScheduleInfeasible):
        return INFEASIBLE
    if isinstance(exc, SolverFailure):
        return exc.solution.status
    return ERROR


def capability_vs_line_capacity(instance: MicrogridInstance, capacities: Sequence[float],
                                options: SolveOptions = SolveOptions(),
                                backend: Optional[Backend] = None, workers: int = 1) -> SweepCurve:
    """R and the unconstrained optimal cost for each transfer limit."""
    caps = _check_increasing(capacities, "capacities")
    backend = backend or get_backend()

    def point(cap: float) -> SweepPoint:
        inst = instance.with_transfer_limit(cap)
        try:
            cap_res = ramping_capability(inst, options, backend)
            _, cost = optimal_schedule(inst, None, math.inf, options, backend)
        except (ScheduleInfeasible, SolverFailure, CertificationError) as exc:
            return SweepPoint(cap, math.nan, math.nan, _failure_status(exc), None, str(exc))
        return SweepPoint(cap, cap_res.R, cost, OPTIMAL, cap_res.line_bound_active)

    return SweepCurve("line_capacity", _map(point, caps, workers))


def cost_vs_ramp_limit(instance: MicrogridInstance, feeder: FeederContext, R: float,
                       deltas: Sequence[float], options: SolveOptions = SolveOptions(),
                       backend: Optional[Backend] = None, workers: int = 1) -> SweepCurve:
    """Optimal cost for each scalar utility ramp target."""
    vals = _check_increasing(deltas, "deltas")
    backend = backend or get_backend()

    def point(delta: float) -> SweepPoint:
        try:
            _, cost = optimal_schedule(instance, feeder.with_ramp_target(delta), R, options,
                                       backend)
        except (ScheduleInfeasible, SolverFailure, CertificationError) as exc:
            return SweepPoint(delta, math.nan, math.nan, _failure_status(exc), None, str(exc))
        return SweepPoint(delta, cost, cost, OPTIMAL)

    return SweepCurve("ramp_limit", _map(point, vals, workers))

