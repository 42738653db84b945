"""Acceptance criteria, one test each. Every test prints a single
``CRITERION n PASS|FAIL`` line (visible without ``-s``)."""

import math
import time

import numpy as np
import pytest

from mgramp.instance import FeederContext
from mgramp.ramp import (ScheduleInfeasible, capability_vs_line_capacity, compute_ramp_bounds,
                         cost_vs_ramp_limit, optimal_schedule, ramping_capability,
                         utility_ramp_profile)
from mgramp.schedule import certify_schedule
from mgramp.solver import OPTIMAL, solve_lp, solve_milp
from oracles import enumerate_capability, enumerate_cost, random_instance, vertex_lp

REL = 1e-6
# every schedule produced here, re-checked by criterion 5
CERTIFIED = []


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return emit


def close(a, b, rel=REL):
    return abs(a - b) <= rel * max(1.0, abs(b))


def keep(instance, feeder, R, schedule):
    CERTIFIED.append((instance, feeder, R, schedule))
    return schedule


def test_criterion_1_oracle_equivalence(report):
    rng = np.random.default_rng(20240611)
    start = time.perf_counter()
    checked = mismatches = 0
    notes = []
    for k in range(50):
        inst = random_instance(rng, max_patterns=48)
        ref_cap = enumerate_capability(inst)
        try:
            cap = ramping_capability(inst)
        except ScheduleInfeasible:
            cap = None
        ok = (cap is None) == (ref_cap is None)
        if ok and cap is not None:
            ok = close(cap.R, ref_cap[0]) and all(close(cap.ramp(t), v)
                                                  for t, v in ref_cap[1].items())
        cases = [(None, math.inf)]
        if ref_cap is not None:
            load = tuple(float(v) for v in rng.integers(0, 10, inst.T))
            cases.append((FeederContext(load, float(rng.integers(1, 5))), ref_cap[0]))
        for feeder, R in cases:
            bands = compute_ramp_bounds(feeder) if feeder else None
            ref = enumerate_cost(inst, bands, R)
            try:
                schedule, cost = optimal_schedule(inst, feeder, R)
                keep(inst, feeder, R, schedule)
            except ScheduleInfeasible:
                cost = None
            ok &= (cost is None) == (ref is None) and (cost is None or close(cost, ref))
            checked += 1
        if not ok:
            mismatches += 1
            notes.append(k)
    elapsed = time.perf_counter() - start
    report(1, mismatches == 0 and elapsed < 60,
           f"50 instances, {checked} schedule solves + 50 capability runs, "
           f"{mismatches} mismatches {notes}, {elapsed:.1f} s (< 60 s)")


@pytest.mark.slow
def test_criterion_2_line_capacity_trend(bundled, report):
    start = time.perf_counter()
    curve = capability_vs_line_capacity(bundled, list(range(2, 16)))
    elapsed = time.perf_counter() - start
    pts = curve.points
    R = [p.value for p in pts]
    cost = [p.cost for p in pts]
    all_ok = all(p.status == OPTIMAL for p in pts)
    nondecreasing = all(b >= a - 1e-9 for a, b in zip(R, R[1:]))
    strict_start = R[1] > R[0] + 1e-6
    # plateau: from some capacity on R stays exactly constant (equal within 1e-6)
    first_flat = next(k for k in range(len(R)) if all(abs(r - R[k]) <= 1e-6 for r in R[k:]))
    plateau = first_flat <= len(R) - 2 and first_flat > 0
    cost_ok = all(b <= a + 1e-6 * max(1.0, abs(a)) for a, b in zip(cost, cost[1:]))
    report(2, all_ok and nondecreasing and strict_start and plateau and cost_ok and elapsed < 300,
           f"R = {[round(r, 4) for r in R]}, plateau from {pts[first_flat].parameter:g} MW, "
           f"cost {cost[0]:.2f} -> {cost[-1]:.2f} non-increasing={cost_ok}, {elapsed:.0f} s (< 300 s)")


@pytest.fixture(scope="module")
def delta_sweep(bundled, feeder):
    R = ramping_capability(bundled).R
    deltas = [1, 2, 3, 4, 5, 6, 7, 8]
    results = {}
    for d in deltas:
        f = feeder.with_ramp_target(d)
        schedule, cost = optimal_schedule(bundled, f, R)
        results[d] = (keep(bundled, f, R, schedule), cost)
    free_schedule, free = optimal_schedule(bundled)
    keep(bundled, None, math.inf, free_schedule)
    return R, results, free_schedule, free


def test_criterion_3_ramp_limit_trend(delta_sweep, bundled, feeder, report):
    R, results, free_schedule, free = delta_sweep
    costs = [results[d][1] for d in sorted(results)]
    nonincreasing = all(b <= a + 1e-6 * max(1.0, abs(a)) for a, b in zip(costs, costs[1:]))
    # a band binds iff the unconstrained utility ramp exceeds the target somewhere
    free_ramp = utility_ramp_profile(free_schedule, feeder).max_abs_ramp
    slack = [d for d in sorted(results) if free_ramp <= d + 1e-9]
    # past the last binding target the curve must stay flat, not merely touch
    tail = cost_vs_ramp_limit(bundled, feeder, R, [8, 10, 12])
    flat = [p.value for p in tail.points]
    levels_off = bool(slack) and all(close(results[d][1], free) for d in slack) and \
        all(p.status == OPTIMAL for p in tail.points) and all(close(v, free) for v in flat)
    at_largest = close(costs[-1], free)
    report(3, nonincreasing and levels_off and at_largest,
           f"R = {R:.4f}, costs {[round(c, 2) for c in costs]}, unconstrained {free:.2f} "
           f"(max free utility ramp {free_ramp:.2f}); flat for delta >= "
           f"{slack[0] if slack else 'none'}, delta 8/10/12 -> {[round(v, 2) for v in flat]}")


def test_criterion_4_utility_profile(delta_sweep, bundled, feeder, report):
    R, results, free_schedule, _ = delta_sweep
    schedule, _ = results[2]
    f2 = feeder.with_ramp_target(2)
    constrained = utility_ramp_profile(schedule, f2)
    issues = certify_schedule(schedule, bundled, f2, R)
    free = utility_ramp_profile(free_schedule, f2)
    jump = next(t for t in range(2, len(feeder.customer_net_load) + 1)
                if feeder.customer_net_load[t - 1] - feeder.customer_net_load[t - 2] == 7)
    violated = abs(free.ramp[jump - 1]) > 2 + 1e-6
    ok = constrained.max_abs_ramp <= 2 + 1e-6 and not issues and violated
    report(4, ok, f"delta=2 max |ramp| {constrained.max_abs_ramp:.6f}; unconstrained ramp at the "
                  f"7 MW jump (t={jump}) {free.ramp[jump - 1]:.4f}")


def test_criterion_5_certification(delta_sweep, small, report):
    # optimal_schedule refuses to return an uncertified schedule; re-check
    # everything gathered above with the independent checker
    schedule, _ = optimal_schedule(small, FeederContext((3.0, 5.0, 4.0), 2.0), 5.0)
    keep(small, FeederContext((3.0, 5.0, 4.0), 2.0), 5.0, schedule)
    violations = sum(len(certify_schedule(s, inst, f, R)) for inst, f, R, s in CERTIFIED)
    # and the checker is not blind: a nudged exchange must be caught
    import dataclasses
    nudged = dataclasses.replace(schedule, exchange=(schedule.exchange[0] + 1e-3,)
                                 + schedule.exchange[1:])
    sees = bool(certify_schedule(nudged, small))
    report(5, violations == 0 and sees and len(CERTIFIED) >= 10,
           f"{len(CERTIFIED)} schedules re-checked, {violations} violations; perturbation caught={sees}")


def test_criterion_6_solver_correctness(bundled, report):
    from test_simplex import lp  # dense-model helper

    rng = np.random.default_rng(6)
    worst = 0.0
    lp_ok = True
    for _ in range(60):
        n = int(rng.integers(1, 11))
        m = int(rng.integers(1, 4))
        c = rng.integers(-5, 6, n).tolist()
        A = rng.integers(-4, 5, (m, n))
        A[~A.any(axis=1), 0] = 1
        senses = [["<=", ">=", "="][k] for k in rng.integers(0, 3, m)]
        b = rng.integers(-8, 9, m).tolist()
        lb = rng.integers(-3, 1, n)
        ub = lb + rng.integers(0, 6, n)
        model = lp(c, list(zip(A.tolist(), senses, b)), list(zip(lb.tolist(), ub.tolist())))
        ref = vertex_lp(c, A, senses, b, lb, ub)
        sol = solve_lp(model)
        if ref is None:
            lp_ok &= sol.status == "infeasible"
            continue
        lp_ok &= sol.status == OPTIMAL
        if sol.status == OPTIMAL:
            worst = max(worst, abs(sol.objective - ref[0]) / max(1.0, abs(ref[0])))
    lp_ok &= worst <= 1e-9

    from mgramp.ramp import build_schedule_model
    model, _, _ = build_schedule_model(bundled, FeederContext((0.0,) * 24, 3.0))
    sol = solve_milp(model)
    hist = sol.bound_history
    monotone = all(b >= a - 1e-9 for a, b in zip(hist, hist[1:]))
    milp_ok = sol.status == OPTIMAL and sol.gap <= 1e-6 and monotone

    from test_golden import CASES, GOLDEN, produce
    import tempfile
    golden_ok = True
    with tempfile.TemporaryDirectory() as tmp:
        for name in CASES:
            for fname, data in produce(name, f"{tmp}/{name}").items():
                golden_ok &= data == (GOLDEN / fname).read_bytes()
    report(6, lp_ok and milp_ok and golden_ok,
           f"LP worst rel. error {worst:.1e} (<= 1e-9); MILP gap {sol.gap:.1e}, "
           f"{len(hist)} monotone bounds={monotone}; golden files identical={golden_ok}")


def test_criterion_7_ramp_bound_arithmetic(feeder, report):
    low, up = compute_ramp_bounds(feeder.with_ramp_target(2))
    load = feeder.customer_net_load
    t = next(t for t in range(2, len(load) + 1) if load[t - 1] - load[t - 2] == 7)
    ok = up[t - 1] == -5 and low[t - 1] == -9
    report(7, ok, f"feeder jump 7 into t={t}, delta 2: delta_up = {up[t - 1]:g}, "
                  f"delta_low = {low[t - 1]:g}")
