"""Instance/feeder documents (JSON) and CSV result tables."""

from __future__ import annotations

import csv
import io
import json
import math
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict, ValidationError

from .instance import (AdjustableLoad, DispatchableUnit, FeederContext, FixedProfiles, GridLink,
                       MicrogridInstance, StorageUnit, TimeGrid)

FORMAT_VERSION = 1
BUNDLED = "bundled"
Profile = Union[list[float], float]


class DocumentError(ValueError):
    """Unreadable or malformed document; ``errors`` holds path-qualified lines."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class _Doc(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True)


class TimeGridDoc(_Doc):
    periods: int
    step: float = 1.0


class UnitDoc(_Doc):
    id: str
    p_min: float
    p_max: float
    marginal_cost: float
    ramp_up: float
    ramp_down: float
    no_load_cost: float = 0.0
    startup_cost: float = 0.0
    shutdown_cost: float = 0.0
    min_up: int = 1
    min_down: int = 1
    initial_committed: bool = False
    initial_power: float = 0.0
    initial_state_duration: Optional[int] = None


class StorageDoc(_Doc):
    id: str
    p_dch_max: float
    p_ch_max: float
    cap_max: float
    initial_energy: float
    p_dch_min: float = 0.0
    p_ch_min: float = 0.0
    cap_min: float = 0.0
    efficiency: float = 1.0
    min_charge_time: int = 1
    min_discharge_time: int = 1
    initial_mode: str = "idle"
    initial_mode_duration: Optional[int] = None


class LoadDoc(_Doc):
    id: str
    d_min: Profile
    d_max: Profile
    energy: float
    window_start: int
    window_end: int
    min_on: int = 1
    initial_operating: bool = False
    initial_on_duration: Optional[int] = None


class FixedProfilesDoc(_Doc):
    fixed_load: list[float]
    nondispatchable_gen: list[float]


class GridLinkDoc(_Doc):
    transfer_limit: float
    market_price: list[float]
    initial_exchange: Optional[float] = None


class InstanceDoc(_Doc):
    version: int
    time_grid: TimeGridDoc
    dispatchable_units: list[UnitDoc]
    storage_units: list[StorageDoc]
    adjustable_loads: list[LoadDoc]
    fixed_profiles: FixedProfilesDoc
    grid_link: GridLinkDoc


class FeederDoc(_Doc):
    version: int
    customer_net_load: list[float]
    # null means no ramp target
    ramp_target: Optional[Profile] = None


_UNION_LABELS = {"float", "int", "list[float]", "str", "bool", "none", "None"}


def _format_errors(exc: ValidationError) -> list[str]:
    out = []
    for err in exc.errors():
        path = ""
        for part in err["loc"]:
            if isinstance(part, int):
                path += f"[{part}]"
            elif part in _UNION_LABELS:
                continue
            else:
                path += f".{part}" if path else str(part)
        line = f"{path or '<root>'}: {err['msg']}"
        if line not in out:
            out.append(line)
    return out


def _parse(model: type[_Doc], text: str) -> _Doc:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError([f"<root>: invalid JSON ({exc})"]) from None
    if not isinstance(raw, dict):
        raise DocumentError(["<root>: expected a JSON object"])
    try:
        doc = model.model_validate(raw)
    except ValidationError as exc:
        raise DocumentError(_format_errors(exc)) from None
    if doc.version != FORMAT_VERSION:
        raise DocumentError([f"version: unsupported version {doc.version}, expected {FORMAT_VERSION}"])
    return doc


def _profile(value: Profile, T: int) -> tuple[float, ...]:
    if isinstance(value, list):
        return tuple(float(v) for v in value)
    return (float(value),) * T


def instance_from_doc(doc: InstanceDoc) -> MicrogridInstance:
    T = doc.time_grid.periods
    loads = []
    for d in doc.adjustable_loads:
        data = d.model_dump()
        data["d_min"] = _profile(d.d_min, T)
        data["d_max"] = _profile(d.d_max, T)
        loads.append(AdjustableLoad(**data))
    fp = doc.fixed_profiles
    gl = doc.grid_link
    return MicrogridInstance(
        time_grid=TimeGrid(T, doc.time_grid.step),
        fixed_profiles=FixedProfiles(tuple(fp.fixed_load), tuple(fp.nondispatchable_gen)),
        grid_link=GridLink(gl.transfer_limit, tuple(gl.market_price), gl.initial_exchange),
        dispatchable_units=tuple(DispatchableUnit(**u.model_dump()) for u in doc.dispatchable_units),
        storage_units=tuple(StorageUnit(**s.model_dump()) for s in doc.storage_units),
        adjustable_loads=tuple(loads),
    )


def parse_instance(text: str) -> MicrogridInstance:
    return instance_from_doc(_parse(InstanceDoc, text))


def instance_to_dict(inst: MicrogridInstance) -> dict:
    def plain(obj) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in vars(obj).items()}

    return {
        "version": FORMAT_VERSION,
        "time_grid": plain(inst.time_grid),
        "dispatchable_units": [plain(u) for u in inst.dispatchable_units],
        "storage_units": [plain(s) for s in inst.storage_units],
        "adjustable_loads": [plain(d) for d in inst.adjustable_loads],
        "fixed_profiles": plain(inst.fixed_profiles),
        "grid_link": plain(inst.grid_link),
    }


def serialize_instance(inst: MicrogridInstance) -> str:
    return json.dumps(instance_to_dict(inst), indent=2) + "\n"


def parse_feeder(text: str) -> FeederContext:
    doc = _parse(FeederDoc, text)
    target = doc.ramp_target
    if target is None:
        target = math.inf
    elif isinstance(target, list):
        target = tuple(float(v) for v in target)
    return FeederContext(tuple(doc.customer_net_load), target)


def serialize_feeder(feeder: FeederContext) -> str:
    target = feeder.ramp_target
    if isinstance(target, tuple):
        target = list(target)
    elif math.isinf(target):
        target = None
    data = {"version": FORMAT_VERSION, "customer_net_load": list(feeder.customer_net_load),
            "ramp_target": target}
    return json.dumps(data, indent=2) + "\n"


def _read(path: Union[str, Path], bundled_name: str) -> str:
    if str(path) == BUNDLED:
        return resources.files("mgramp").joinpath("data").joinpath(bundled_name).read_text()
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise DocumentError([f"{path}: cannot read file ({exc.strerror})"]) from None


def load_instance(path: Union[str, Path]) -> MicrogridInstance:
    """Read an instance file; the literal path ``bundled`` selects the
    packaged 24-hour instance."""
    return parse_instance(_read(path, "instance.json"))


def load_feeder(path: Union[str, Path]) -> FeederContext:
    return parse_feeder(_read(path, "feeder.json"))


# -- CSV tables -------------------------------------------------------------

def fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    v = float(value)
    if math.isnan(v):
        return ""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    s = f"{v:.6f}"
    return "0.000000" if s == "-0.000000" else s


def render_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def schedule_table(schedule) -> tuple[list[str], list[list]]:
    header = ["t"]
    cols = []
    for uid in schedule.unit_ids:
        header += [f"P_{uid}", f"I_{uid}"]
        cols += [schedule.unit_power[uid], schedule.unit_commitment[uid]]
    for sid in schedule.storage_ids:
        header += [f"P_{sid}", f"C_{sid}", f"u_{sid}", f"v_{sid}"]
        cols += [schedule.storage_power[sid], schedule.soc[sid], schedule.discharging[sid],
                 schedule.charging[sid]]
    for lid in schedule.load_ids:
        header += [f"D_{lid}", f"z_{lid}"]
        cols += [schedule.load_power[lid], schedule.load_state[lid]]
    header.append("P_M")
    cols.append(schedule.exchange)
    rows = [[t + 1] + [c[t] for c in cols] for t in range(schedule.T)]
    return header, rows


def schedule_csv(schedule) -> str:
    return render_csv(*schedule_table(schedule))


def utility_csv(profile) -> str:
    header = ["t", "P_M", "customer_net_load", "P_u", "ramp"]
    rows = [[t + 1, profile.exchange[t], profile.customer[t], profile.utility[t],
             profile.ramp[t]] for t in range(len(profile.utility))]
    return render_csv(header, rows)


def capability_csv(result) -> str:
    rows = [[t, result.ramp_up[t], result.ramp_down[t]] for t in result.periods]
    return render_csv(["t", "R_up", "R_down"], rows)


def curve_csv(curve) -> str:
    if curve.kind == "line_capacity":
        return render_csv(["parameter", "R", "cost", "status"],
                          [[p.parameter, p.value, p.cost, p.status] for p in curve.points])
    return render_csv(["parameter", "cost", "status"],
                      [[p.parameter, p.value, p.status] for p in curve.points])
