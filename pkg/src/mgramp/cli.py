"""Command-line entry point: ``mgramp validate|capability|schedule|sweep-ramp``.

Exit codes: 0 success, 1 infeasible model, 2 invalid input or flags,
3 solver failure or limit.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import io
from .formulation import to_lp_text
from .instance import InvalidInstanceError, check_feeder, validate_instance
from .ramp import (CertificationError, ScheduleInfeasible, SolverFailure, build_schedule_model,
                   capability_vs_line_capacity, cost_vs_ramp_limit, optimal_schedule,
                   ramping_capability, utility_ramp_profile)
from .solver import OPTIMAL, SolveOptions, backend_names, get_backend

EXIT_OK, EXIT_INFEASIBLE, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 as well; keep the message format ours
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"error: {message}\n")


def _number(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise UsageError(f"not a number: {text!r}") from None
    if math.isnan(v):
        raise UsageError("NaN is not allowed")
    return v


def parse_range(text: str) -> list[float]:
    """``lo:hi:step`` inclusive of both ends."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"expected lo:hi:step, got {text!r}")
    lo, hi, step = (_number(p) for p in parts)
    if step <= 0 or hi < lo:
        raise UsageError(f"empty or invalid range {text!r}")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + k * step, 10) for k in range(n)]


def parse_list(text: str) -> list[float]:
    """Comma-separated numbers, or a ``lo:hi:step`` range."""
    if ":" in text:
        return parse_range(text)
    return [_number(p) for p in text.split(",") if p.strip()]


def _increasing(vals: list[float], what: str) -> list[float]:
    if not vals:
        raise UsageError(f"{what}: no values")
    if any(v < 0 for v in vals):
        raise UsageError(f"{what}: values must be non-negative")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise UsageError(f"{what}: values must be strictly increasing")
    return vals


def _options(args) -> SolveOptions:
    try:
        return SolveOptions(gap_tol=args.gap, node_limit=args.node_limit,
                            time_limit=args.time_limit, workers=1)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _side_path(path: str, suffix: str) -> str:
    p = Path(path)
    return str(p.with_name(f"{p.stem}_{suffix}{p.suffix or '.csv'}"))


def _load_instance(path: str):
    inst = io.load_instance(path)
    report = validate_instance(inst)
    if not report.ok:
        raise InvalidInstanceError(report)
    return inst


def _load_feeder(path: str, T: int):
    feeder = io.load_feeder(path)
    report = check_feeder(feeder, T)
    if not report.ok:
        raise InvalidInstanceError(report)
    return feeder


# -- subcommands ----------------------------------------------------------------

def cmd_validate(args) -> int:
    inst = io.load_instance(args.instance)
    report = validate_instance(inst)
    for line in report.lines():
        print(line)
    if report.ok:
        print(f"ok: {inst.T} periods, {len(inst.dispatchable_units)} units, "
              f"{len(inst.storage_units)} storage, {len(inst.adjustable_loads)} adjustable loads")
        return EXIT_OK
    return EXIT_INVALID


def cmd_capability(args) -> int:
    inst = _load_instance(args.instance)
    opts, backend = _options(args), get_backend(args.backend)
    if args.sweep is not None:
        if args.line_cap is not None:
            raise UsageError("--line-cap and --sweep are mutually exclusive")
        caps = _increasing(parse_range(args.sweep), "--sweep")
        curve = capability_vs_line_capacity(inst, caps, opts, backend, args.workers)
        for p in curve.points:
            print(f"line {p.parameter:g} MW: R = {io.fmt(p.value)} cost = {io.fmt(p.cost)} "
                  f"[{p.status}]")
        if args.output:
            _write(args.output, io.curve_csv(curve))
        statuses = {p.status for p in curve.points}
        if OPTIMAL in statuses:
            return EXIT_OK
        return EXIT_INFEASIBLE if statuses == {"infeasible"} else EXIT_SOLVER
    if args.line_cap is not None:
        if args.line_cap < 0:
            raise UsageError("--line-cap must be non-negative")
        inst = inst.with_transfer_limit(args.line_cap)
    res = ramping_capability(inst, opts, backend, args.workers)
    print(f"R = {io.fmt(res.R)} MW per period (binding transition t={res.argmin}, "
          f"line limit {res.transfer_limit:g} MW"
          f"{', line bound active' if res.line_bound_active else ''})")
    if args.output:
        _write(args.output, io.capability_csv(res))
    return EXIT_OK


def _ramp_cap(text: str, inst, opts, backend, workers) -> float:
    if text == "auto":
        res = ramping_capability(inst, opts, backend, workers)
        print(f"ramp capability R = {io.fmt(res.R)} MW per period")
        return res.R
    if text in ("inf", "none"):
        return math.inf
    v = _number(text)
    if v < 0:
        raise UsageError("--ramp-cap must be non-negative")
    return v


def cmd_schedule(args) -> int:
    inst = _load_instance(args.instance)
    feeder = _load_feeder(args.feeder, inst.T)
    if args.delta is not None:
        if args.delta < 0:
            raise UsageError("--delta must be non-negative")
        feeder = feeder.with_ramp_target(args.delta)
    opts, backend = _options(args), get_backend(args.backend)
    R = _ramp_cap(args.ramp_cap, inst, opts, backend, args.workers)
    if args.dump_lp:
        model, _, _ = build_schedule_model(inst, feeder, R)
        Path(args.dump_lp).write_text(to_lp_text(model))
    schedule, cost = optimal_schedule(inst, feeder, R, opts, backend)
    profile = utility_ramp_profile(schedule, feeder)
    c = schedule.costs
    print(f"cost = {io.fmt(cost)} (generation {io.fmt(c.generation)}, start/stop "
          f"{io.fmt(c.startup_shutdown)}, energy purchase {io.fmt(c.energy_purchase)})")
    print(f"max utility ramp = {io.fmt(profile.max_abs_ramp)} MW per period")
    if args.output:
        _write(args.output, io.schedule_csv(schedule))
        if args.output != "-":
            _write(_side_path(args.output, "utility"), io.utility_csv(profile))
    return EXIT_OK


def cmd_sweep_ramp(args) -> int:
    inst = _load_instance(args.instance)
    feeder = _load_feeder(args.feeder, inst.T)
    deltas = _increasing(parse_list(args.deltas), "--deltas")
    opts, backend = _options(args), get_backend(args.backend)
    R = _ramp_cap(args.ramp_cap, inst, opts, backend, args.workers)
    curve = cost_vs_ramp_limit(inst, feeder, R, deltas, opts, backend, args.workers)
    for p in curve.points:
        print(f"delta {p.parameter:g}: cost = {io.fmt(p.value)} [{p.status}]")
    if args.output:
        _write(args.output, io.curve_csv(curve))
    statuses = {p.status for p in curve.points}
    if OPTIMAL in statuses:
        return EXIT_OK
    return EXIT_INFEASIBLE if statuses == {"infeasible"} else EXIT_SOLVER


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mgramp", description="Microgrid ramping capability and "
                                                "ramp-constrained scheduling.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, solver=True):
        p.add_argument("instance", help="instance JSON file, or 'bundled'")
        if not solver:
            return
        p.add_argument("--backend", choices=backend_names(), default=None,
                       help="MILP backend (default: $MGRAMP_BACKEND or builtin)")
        p.add_argument("--workers", type=int, default=1, help="parallel independent solves")
        p.add_argument("--gap", type=float, default=1e-6, help="relative MILP gap tolerance")
        p.add_argument("--node-limit", type=int, default=None)
        p.add_argument("--time-limit", type=float, default=None, help="seconds per MILP")

    p = sub.add_parser("validate", help="check an instance file")
    common(p, solver=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("capability", help="ramping capability, or a line-capacity sweep")
    common(p)
    p.add_argument("--line-cap", type=float, default=None, help="override the transfer limit")
    p.add_argument("--sweep", default=None, metavar="LO:HI:STEP",
                   help="sweep the transfer limit (inclusive)")
    p.add_argument("-o", "--output", default=None, help="CSV output path ('-' for stdout)")
    p.set_defaults(func=cmd_capability)

    p = sub.add_parser("schedule", help="ramp-constrained optimal schedule")
    common(p)
    p.add_argument("--feeder", required=True, help="feeder JSON file, or 'bundled'")
    p.add_argument("--delta", type=float, default=None,
                   help="utility ramp target (overrides the feeder file)")
    p.add_argument("--ramp-cap", default="inf", metavar="R|auto|inf",
                   help="capability limit on exchange ramps (default: none)")
    p.add_argument("--dump-lp", default=None, metavar="PATH", help="write the model in LP format")
    p.add_argument("-o", "--output", default=None,
                   help="schedule CSV; the utility profile goes to <name>_utility.csv")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("sweep-ramp", help="cost versus utility ramp target")
    common(p)
    p.add_argument("--feeder", required=True, help="feeder JSON file, or 'bundled'")
    p.add_argument("--deltas", required=True, help="comma list or LO:HI:STEP, increasing")
    p.add_argument("--ramp-cap", default="inf", metavar="R|auto|inf")
    p.add_argument("-o", "--output", default=None, help="curve CSV output path")
    p.set_defaults(func=cmd_sweep_ramp)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        if isinstance(exc, InvalidInstanceError):
            for line in exc.report.lines():
                print(line, file=sys.stderr)
            return EXIT_INVALID
        if isinstance(exc, io.DocumentError):
            for line in exc.errors:
                print(f"error: {line}", file=sys.stderr)
            return EXIT_INVALID
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ScheduleInfeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SolverFailure, CertificationError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
