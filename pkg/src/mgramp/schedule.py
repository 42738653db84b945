"""Decoded schedules and an independent feasibility checker.

The checker works from the instance data and the decoded decisions only; it
never looks at the MILP rows, so it catches formulation mistakes as well as
solver ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .formulation import VariableMap
from .instance import FeederContext, MicrogridInstance

TOL = 1e-6


@dataclass(frozen=True)
class CostBreakdown:
    generation: float  # marginal + no-load
    startup_shutdown: float
    energy_purchase: float  # negative when the microgrid sells

    @property
    def total(self) -> float:
        return self.generation + self.startup_shutdown + self.energy_purchase


@dataclass
class Schedule:
    """One value per period (index 0 is period 1) for every decision."""

    T: int
    unit_ids: list[str]
    unit_power: dict[str, tuple[float, ...]]
    unit_commitment: dict[str, tuple[int, ...]]
    storage_ids: list[str]
    storage_discharge: dict[str, tuple[float, ...]]
    storage_charge: dict[str, tuple[float, ...]]
    soc: dict[str, tuple[float, ...]]
    discharging: dict[str, tuple[int, ...]]
    charging: dict[str, tuple[int, ...]]
    load_ids: list[str]
    load_power: dict[str, tuple[float, ...]]
    load_state: dict[str, tuple[int, ...]]
    exchange: tuple[float, ...]
    costs: CostBreakdown
    objective: float = math.nan  # as reported by the solver
    notes: list[str] = field(default_factory=list)

    @property
    def storage_power(self) -> dict[str, tuple[float, ...]]:
        """Net storage output (discharge minus charge)."""
        return {s: tuple(d - c for d, c in zip(self.storage_discharge[s], self.storage_charge[s]))
                for s in self.storage_ids}


def _clean(v: float) -> float:
    # drop round-off noise so CSV output is stable
    r = round(v, 9)
    return 0.0 if r == 0 else r


def schedule_costs(instance: MicrogridInstance, unit_power, unit_commitment, exchange
                   ) -> CostBreakdown:
    tau = instance.tau
    gen = switching = 0.0
    for g in instance.dispatchable_units:
        P, I = unit_power[g.id], unit_commitment[g.id]
        prev = 1 if g.initial_committed else 0
        for t in range(instance.T):
            gen += (g.marginal_cost * P[t] + g.no_load_cost * I[t]) * tau
            if I[t] and not prev:
                switching += g.startup_cost
            elif prev and not I[t]:
                switching += g.shutdown_cost
            prev = I[t]
    prices = instance.grid_link.market_price
    purchase = sum(prices[t] * exchange[t] * tau for t in range(instance.T))
    return CostBreakdown(gen, switching, purchase)


def decode_schedule(instance: MicrogridInstance, vmap: VariableMap, x: Sequence[float],
                    objective: float = math.nan) -> Schedule:
    x = np.asarray(x, dtype=float)
    T = instance.T
    periods = range(1, T + 1)

    def cont(name, owner):
        return tuple(_clean(float(x[vmap.id(name, owner, t)])) for t in periods)

    def flag(name, owner):
        return tuple(int(round(float(x[vmap.id(name, owner, t)]))) for t in periods)

    units = instance.dispatchable_units
    stores = instance.storage_units
    loads = instance.adjustable_loads
    unit_power = {g.id: cont("P", g.id) for g in units}
    unit_commitment = {g.id: flag("I", g.id) for g in units}
    exchange = tuple(_clean(float(x[vmap.id("PM", t)])) for t in periods)
    return Schedule(
        T=T,
        unit_ids=[g.id for g in units],
        unit_power=unit_power,
        unit_commitment=unit_commitment,
        storage_ids=[s.id for s in stores],
        storage_discharge={s.id: cont("Pdch", s.id) for s in stores},
        storage_charge={s.id: cont("Pch", s.id) for s in stores},
        soc={s.id: cont("C", s.id) for s in stores},
        discharging={s.id: flag("u", s.id) for s in stores},
        charging={s.id: flag("v", s.id) for s in stores},
        load_ids=[d.id for d in loads],
        load_power={d.id: cont("D", d.id) for d in loads},
        load_state={d.id: flag("z", d.id) for d in loads},
        exchange=exchange,
        costs=schedule_costs(instance, unit_power, unit_commitment, exchange),
        objective=objective,
    )


# -- checker ------------------------------------------------------------------

def _min_run(seq, initial: int, initial_duration: Optional[int], K: int, value: int):
    """Periods (1-based) where a run of ``value`` is cut shorter than K."""
    bad = []
    T = len(seq)
    if initial == value and initial_duration is not None and initial_duration < K:
        for t in range(1, min(K - initial_duration, T) + 1):
            if seq[t - 1] != value:
                bad.append(t)
    prev = initial
    for t in range(1, T + 1):
        if seq[t - 1] == value and prev != value:
            for s in range(t, min(t + K - 1, T) + 1):
                if seq[s - 1] != value:
                    bad.append(s)
                    break
        prev = seq[t - 1]
    return bad


def certify_schedule(schedule: Schedule, instance: MicrogridInstance,
                     feeder: Optional[FeederContext] = None, capability: float = math.inf,
                     tol: float = TOL) -> list[str]:
    """Re-check every component, balance, line and ramp limit; returns the
    list of violations (empty when the schedule is valid)."""
    out: list[str] = []
    T, tau = instance.T, instance.tau

    def need(ok: bool, what: str) -> None:
        if not ok:
            out.append(what)

    for name, seqs in (("I", schedule.unit_commitment), ("u", schedule.discharging),
                       ("v", schedule.charging), ("z", schedule.load_state)):
        for owner, seq in seqs.items():
            for t, val in enumerate(seq, 1):
                need(val in (0, 1), f"{name}[{owner},{t}] not binary")

    for g in instance.dispatchable_units:
        P, I = schedule.unit_power[g.id], schedule.unit_commitment[g.id]
        prev = g.initial_power
        for t in range(1, T + 1):
            p = P[t - 1]
            need(g.p_min * I[t - 1] - tol <= p <= g.p_max * I[t - 1] + tol,
                 f"{g.id} t={t}: power {p:g} outside commitment limits")
            need(p - prev <= g.ramp_up + tol, f"{g.id} t={t}: ramp up exceeded")
            need(prev - p <= g.ramp_down + tol, f"{g.id} t={t}: ramp down exceeded")
            prev = p
        init = 1 if g.initial_committed else 0
        for t in _min_run(I, init, g.initial_state_duration, g.min_up, 1):
            out.append(f"{g.id} t={t}: minimum up time violated")
        for t in _min_run(I, init, g.initial_state_duration, g.min_down, 0):
            out.append(f"{g.id} t={t}: minimum down time violated")

    for s in instance.storage_units:
        Pd, Pc = schedule.storage_discharge[s.id], schedule.storage_charge[s.id]
        u, v, C = schedule.discharging[s.id], schedule.charging[s.id], schedule.soc[s.id]
        energy = s.initial_energy
        for t in range(1, T + 1):
            k = t - 1
            need(s.p_dch_min * u[k] - tol <= Pd[k] <= s.p_dch_max * u[k] + tol,
                 f"{s.id} t={t}: discharge outside limits")
            need(s.p_ch_min * v[k] - tol <= Pc[k] <= s.p_ch_max * v[k] + tol,
                 f"{s.id} t={t}: charge outside limits")
            need(u[k] + v[k] <= 1, f"{s.id} t={t}: charging and discharging at once")
            energy = energy - Pd[k] * tau / s.efficiency + Pc[k] * tau
            need(abs(C[k] - energy) <= tol * max(1.0, abs(energy)), f"{s.id} t={t}: SOC mismatch")
            need(s.cap_min - tol <= C[k] <= s.cap_max + tol, f"{s.id} t={t}: SOC outside capacity")
            energy = C[k]
        v0 = 1 if s.initial_mode == "charging" else 0
        u0 = 1 if s.initial_mode == "discharging" else 0
        for t in _min_run(v, v0, s.initial_mode_duration if v0 else None, s.min_charge_time, 1):
            out.append(f"{s.id} t={t}: minimum charging time violated")
        for t in _min_run(u, u0, s.initial_mode_duration if u0 else None, s.min_discharge_time, 1):
            out.append(f"{s.id} t={t}: minimum discharging time violated")

    for d in instance.adjustable_loads:
        D, z = schedule.load_power[d.id], schedule.load_state[d.id]
        for t in range(1, T + 1):
            k = t - 1
            if d.window_start <= t <= d.window_end:
                need(d.d_min[k] * z[k] - tol <= D[k] <= d.d_max[k] * z[k] + tol,
                     f"{d.id} t={t}: consumption outside limits")
            else:
                need(abs(D[k]) <= tol and z[k] == 0, f"{d.id} t={t}: operating outside window")
        init = 1 if d.initial_operating else 0
        for t in _min_run(z, init, d.initial_on_duration if init else None, d.min_on, 1):
            out.append(f"{d.id} t={t}: minimum operating time violated")
        total = sum(D) * tau
        need(abs(total - d.energy) <= tol * max(1.0, d.energy),
             f"{d.id}: energy {total:g} != {d.energy:g}")

    fp = instance.fixed_profiles
    limit = instance.grid_link.transfer_limit
    for t in range(1, T + 1):
        k = t - 1
        supply = sum(schedule.unit_power[g][k] for g in schedule.unit_ids)
        supply += sum(schedule.storage_discharge[s][k] - schedule.storage_charge[s][k]
                      for s in schedule.storage_ids)
        supply += schedule.exchange[k] + fp.nondispatchable_gen[k]
        demand = fp.fixed_load[k] + sum(schedule.load_power[d][k] for d in schedule.load_ids)
        need(abs(supply - demand) <= tol * max(1.0, abs(demand)), f"t={t}: power balance off")
        need(abs(schedule.exchange[k]) <= limit + tol, f"t={t}: transfer limit exceeded")

    P0 = instance.grid_link.initial_exchange
    prev = P0
    for t in range(1, T + 1):
        cur = schedule.exchange[t - 1]
        if prev is not None:
            need(abs(cur - prev) <= capability + tol, f"t={t}: exchange ramp beyond capability")
        prev = cur
    if feeder is not None:
        targets = feeder.ramp_targets()
        pu = [schedule.exchange[k] + feeder.customer_net_load[k] for k in range(T)]
        for t in range(2, T + 1):
            need(abs(pu[t - 1] - pu[t - 2]) <= targets[t - 1] + tol,
                 f"t={t}: utility ramp {pu[t - 1] - pu[t - 2]:g} beyond target {targets[t - 1]:g}")

    if not math.isnan(schedule.objective):
        total = schedule.costs.total
        need(abs(total - schedule.objective) <= tol * max(1.0, abs(schedule.objective)),
             f"cost components sum to {total:.6f}, objective is {schedule.objective:.6f}")
    return out
