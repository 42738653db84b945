"""Microgrid instance types and input validation.

Sign convention: grid exchange ``P_M > 0`` is import from the utility into the
microgrid. Periods are 1-based; period 0 denotes the initial conditions.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

STORAGE_MODES = ("idle", "charging", "discharging")


@dataclass(frozen=True)
class TimeGrid:
    periods: int = 24
    step: float = 1.0  # hours


@dataclass(frozen=True)
class DispatchableUnit:
    id: str
    p_min: float
    p_max: float
    marginal_cost: float  # $/MWh
    ramp_up: float  # MW per period
    ramp_down: float
    no_load_cost: float = 0.0  # $/h while committed
    startup_cost: float = 0.0
    shutdown_cost: float = 0.0
    min_up: int = 1
    min_down: int = 1
    initial_committed: bool = False
    initial_power: float = 0.0
    # periods already spent in the initial on/off state; None = long enough
    # that no minimum up/down obligation carries into the horizon
    initial_state_duration: Optional[int] = None


@dataclass(frozen=True)
class StorageUnit:
    id: str
    p_dch_max: float
    p_ch_max: float
    cap_max: float  # MWh
    initial_energy: float
    p_dch_min: float = 0.0
    p_ch_min: float = 0.0
    cap_min: float = 0.0
    efficiency: float = 1.0
    min_charge_time: int = 1
    min_discharge_time: int = 1
    initial_mode: str = "idle"
    initial_mode_duration: Optional[int] = None


@dataclass(frozen=True)
class AdjustableLoad:
    id: str
    d_min: tuple[float, ...]
    d_max: tuple[float, ...]
    energy: float  # MWh over the operating window
    window_start: int  # first period of the window (1-based, inclusive)
    window_end: int  # last period of the window (inclusive)
    min_on: int = 1
    initial_operating: bool = False
    initial_on_duration: Optional[int] = None


@dataclass(frozen=True)
class FixedProfiles:
    fixed_load: tuple[float, ...]
    nondispatchable_gen: tuple[float, ...]


@dataclass(frozen=True)
class GridLink:
    transfer_limit: float
    market_price: tuple[float, ...]
    initial_exchange: Optional[float] = None


@dataclass(frozen=True)
class FeederContext:
    """Aggregate net load of the other customers on the feeder plus the
    utility's ramp target (scalar, or one value per period)."""

    customer_net_load: tuple[float, ...]
    ramp_target: Union[float, tuple[float, ...]] = math.inf

    def ramp_targets(self) -> tuple[float, ...]:
        """Ramp target per period, scalars broadcast."""
        if isinstance(self.ramp_target, tuple):
            return self.ramp_target
        return (float(self.ramp_target),) * len(self.customer_net_load)

    def with_ramp_target(self, delta) -> "FeederContext":
        if isinstance(delta, (list, tuple)):
            delta = tuple(float(v) for v in delta)
        else:
            delta = float(delta)
        return dataclasses.replace(self, ramp_target=delta)


@dataclass(frozen=True)
class MicrogridInstance:
    time_grid: TimeGrid
    fixed_profiles: FixedProfiles
    grid_link: GridLink
    dispatchable_units: tuple[DispatchableUnit, ...] = ()
    storage_units: tuple[StorageUnit, ...] = ()
    adjustable_loads: tuple[AdjustableLoad, ...] = ()

    @property
    def T(self) -> int:
        return self.time_grid.periods

    @property
    def tau(self) -> float:
        return self.time_grid.step

    def with_transfer_limit(self, limit: float) -> "MicrogridInstance":
        link = dataclasses.replace(self.grid_link, transfer_limit=float(limit))
        return dataclasses.replace(self, grid_link=link)


@dataclass(frozen=True)
class Issue:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


@dataclass
class ValidationReport:
    violations: list[Issue] = field(default_factory=list)
    warnings: list[Issue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def lines(self) -> list[str]:
        out = [f"error: {v}" for v in self.violations]
        out += [f"warning: {w}" for w in self.warnings]
        return out


class InvalidInstanceError(ValueError):
    def __init__(self, report: ValidationReport):
        self.report = report
        super().__init__("; ".join(str(v) for v in report.violations))


def _finite(x) -> bool:
    try:
        return math.isfinite(float(x))
    except (TypeError, ValueError):
        return False


class _Checker:
    def __init__(self) -> None:
        self.report = ValidationReport()

    def error(self, path: str, message: str) -> None:
        self.report.violations.append(Issue(path, message))

    def warn(self, path: str, message: str) -> None:
        self.report.warnings.append(Issue(path, message))

    def numbers(self, path: str, obj, names: Sequence[str]) -> bool:
        ok = True
        for name in names:
            if not _finite(getattr(obj, name)):
                self.error(f"{path}.{name}", "must be a finite number")
                ok = False
        return ok

    def profile(self, path: str, values, T: int, nonneg: bool = True) -> bool:
        if len(values) != T:
            self.error(path, f"length {len(values)} does not match {T} periods")
            return False
        ok = True
        for k, v in enumerate(values):
            if not _finite(v):
                self.error(f"{path}[{k}]", "must be a finite number")
                ok = False
            elif nonneg and v < 0:
                self.error(f"{path}[{k}]", "must be non-negative")
                ok = False
        return ok

    def count(self, path: str, value, minimum: int = 1) -> None:
        if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
            self.error(path, f"must be an integer >= {minimum}")

    def duration(self, path: str, value) -> None:
        if value is not None and (not isinstance(value, int) or value < 0):
            self.error(path, "must be a non-negative integer or null")


def _check_unit(c: _Checker, path: str, g: DispatchableUnit) -> None:
    fields_ = ("p_min", "p_max", "marginal_cost", "no_load_cost", "startup_cost",
               "shutdown_cost", "ramp_up", "ramp_down", "initial_power")
    if not c.numbers(path, g, fields_):
        return
    if g.p_min < 0:
        c.error(f"{path}.p_min", "must be non-negative")
    if g.p_min > g.p_max:
        c.error(f"{path}.p_min", "p_min exceeds p_max")
    for name in ("ramp_up", "ramp_down", "marginal_cost", "no_load_cost",
                 "startup_cost", "shutdown_cost"):
        if getattr(g, name) < 0:
            c.error(f"{path}.{name}", "must be non-negative")
    c.count(f"{path}.min_up", g.min_up)
    c.count(f"{path}.min_down", g.min_down)
    c.duration(f"{path}.initial_state_duration", g.initial_state_duration)
    if g.initial_committed:
        if not g.p_min <= g.initial_power <= g.p_max:
            c.error(f"{path}.initial_power", "committed unit must start within [p_min, p_max]")
    elif g.initial_power != 0:
        c.error(f"{path}.initial_power", "uncommitted unit must start at 0 MW")
    if g.p_min > g.ramp_up:
        c.warn(f"{path}.ramp_up",
               "p_min exceeds ramp_up; a cold start is infeasible under the ramp limits")


def _check_storage(c: _Checker, path: str, s: StorageUnit) -> None:
    fields_ = ("p_dch_min", "p_dch_max", "p_ch_min", "p_ch_max", "cap_min",
               "cap_max", "efficiency", "initial_energy")
    if not c.numbers(path, s, fields_):
        return
    if not 0 <= s.p_dch_min <= s.p_dch_max:
        c.error(f"{path}.p_dch_min", "need 0 <= p_dch_min <= p_dch_max")
    if not 0 <= s.p_ch_min <= s.p_ch_max:
        c.error(f"{path}.p_ch_min", "need 0 <= p_ch_min <= p_ch_max")
    if not 0 <= s.cap_min <= s.cap_max:
        c.error(f"{path}.cap_min", "need 0 <= cap_min <= cap_max")
    if not s.cap_min <= s.initial_energy <= s.cap_max:
        c.error(f"{path}.initial_energy", "initial energy outside [cap_min, cap_max]")
    if not 0 < s.efficiency <= 1:
        c.error(f"{path}.efficiency", "must lie in (0, 1]")
    c.count(f"{path}.min_charge_time", s.min_charge_time)
    c.count(f"{path}.min_discharge_time", s.min_discharge_time)
    if s.initial_mode not in STORAGE_MODES:
        c.error(f"{path}.initial_mode", f"must be one of {', '.join(STORAGE_MODES)}")
    c.duration(f"{path}.initial_mode_duration", s.initial_mode_duration)


def _check_load(c: _Checker, path: str, d: AdjustableLoad, T: int, tau: float) -> None:
    ok = c.profile(f"{path}.d_min", d.d_min, T) & c.profile(f"{path}.d_max", d.d_max, T)
    if not c.numbers(path, d, ("energy",)):
        ok = False
    c.count(f"{path}.min_on", d.min_on)
    c.duration(f"{path}.initial_on_duration", d.initial_on_duration)
    for name in ("window_start", "window_end"):
        v = getattr(d, name)
        if not isinstance(v, int) or isinstance(v, bool) or not 1 <= v <= T:
            c.error(f"{path}.{name}", f"must be a period index in 1..{T}")
            ok = False
    if not ok:
        return
    if d.window_start > d.window_end:
        c.error(f"{path}.window_start", "window_start exceeds window_end")
        return
    for k in range(T):
        if d.d_min[k] > d.d_max[k]:
            c.error(f"{path}.d_min[{k}]", "d_min exceeds d_max")
            return
    window = range(d.window_start - 1, d.window_end)
    lo = sum(d.d_min[k] for k in window) * tau
    hi = sum(d.d_max[k] for k in window) * tau
    if not lo - 1e-9 <= d.energy <= hi + 1e-9:
        c.error(f"{path}.energy", f"energy {d.energy} outside achievable range [{lo}, {hi}]")
    elif math.isclose(d.energy, lo, abs_tol=1e-9) or math.isclose(d.energy, hi, abs_tol=1e-9):
        c.warn(f"{path}.energy", "energy sits at an endpoint of its achievable range")
    if d.initial_operating:
        carried = d.min_on - (d.initial_on_duration if d.initial_on_duration is not None else d.min_on)
        if carried > 0 and d.window_start > 1:
            c.error(f"{path}.initial_operating",
                    "carried minimum operating time falls outside the operating window")


def validate_instance(instance: MicrogridInstance) -> ValidationReport:
    """Check every invariant of ``instance``; never raises."""
    c = _Checker()
    tg = instance.time_grid
    if not isinstance(tg.periods, int) or isinstance(tg.periods, bool) or tg.periods < 1:
        c.error("time_grid.periods", "must be an integer >= 1")
        return c.report
    if not _finite(tg.step) or tg.step <= 0:
        c.error("time_grid.step", "must be a positive number")
        return c.report
    T, tau = tg.periods, float(tg.step)

    fp = instance.fixed_profiles
    c.profile("fixed_profiles.fixed_load", fp.fixed_load, T)
    c.profile("fixed_profiles.nondispatchable_gen", fp.nondispatchable_gen, T)

    gl = instance.grid_link
    if not _finite(gl.transfer_limit) or gl.transfer_limit < 0:
        c.error("grid_link.transfer_limit", "must be a non-negative number")
    c.profile("grid_link.market_price", gl.market_price, T, nonneg=False)
    if gl.initial_exchange is not None and not _finite(gl.initial_exchange):
        c.error("grid_link.initial_exchange", "must be a finite number or null")

    seen: set[str] = set()
    groups = (("dispatchable_units", instance.dispatchable_units),
              ("storage_units", instance.storage_units),
              ("adjustable_loads", instance.adjustable_loads))
    for section, items in groups:
        for k, item in enumerate(items):
            path = f"{section}[{k}]"
            if not isinstance(item.id, str) or not item.id:
                c.error(f"{path}.id", "must be a non-empty string")
            elif item.id in seen:
                c.error(f"{path}.id", f"duplicate id {item.id!r}")
            seen.add(item.id)
            if section == "dispatchable_units":
                _check_unit(c, path, item)
            elif section == "storage_units":
                _check_storage(c, path, item)
            else:
                _check_load(c, path, item, T, tau)
    return c.report


def check_feeder(feeder: FeederContext, T: int) -> ValidationReport:
    c = _Checker()
    c.profile("customer_net_load", feeder.customer_net_load, T, nonneg=False)
    targets = feeder.ramp_target
    if isinstance(targets, tuple):
        if len(targets) != T:
            c.error("ramp_target", f"length {len(targets)} does not match {T} periods")
        elif any(math.isnan(v) or v < 0 for v in targets):
            c.error("ramp_target", "must be non-negative")
    elif math.isnan(targets) or targets < 0:
        c.error("ramp_target", "must be non-negative")
    return c.report
