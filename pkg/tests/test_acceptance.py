"""End-to-end acceptance gate.

Each test prints one PASS/FAIL verdict line directly to the real stdout
(bypassing capture) and then asserts.  Three verdicts are expected to
FAIL and are left failing on purpose: the bundled aircraft scaling map
is not an invariance transformation of the bundled dynamics (the x3/x4
conditions carry O(1) residuals), so the tight invariance bound, the
conservation of its candidate law, and the fourth-order drift reduction
built on that law cannot hold.  The checkers' verdicts, the residual
structure, and the matching law drift are locked in by the unit suites;
see the README for the analysis.
"""

import sys
import time

import numpy as np
import pytest

from symoc import aircraft
from symoc import expr as ex
from symoc.extremal import (check_hamiltonian_identity, check_law,
                            detect_switches, integrate_extremal, shoot)
from symoc.model import (Multipliers, build_hamiltonian,
                         dynamics_input_names)
from symoc.noether import ConservationLaw, law_p
from symoc.pareto import filter_dominated, map_multipliers, scalarize
from symoc.symmetry import check_invariance_p, generator

from conftest import (brute_force_kept, central_difference,
                      corrupted_scaling_group, lq_control, lq_problem,
                      random_expr, toy_control, toy_nonautonomous)

SCALING_LAW_TEXT = "psi1*x1 + 2*psi2*x2 + psi3*x3 + 2*psi4*x4"

THRUSTING = (np.array([0.0, 0.0, 1.0, 1.0, 3.0]),
             np.array([0.3, -0.2, 1.0, 0.5, -0.5]),
             (-0.1, -0.5))


def _verdict(name: str, ok: bool, detail: str):
    mark = "PASS" if ok else "FAIL"
    print(f"[acceptance] {name}: {mark} ({detail})",
          file=sys.__stdout__, flush=True)


def _thrusting_trajectory(p, ctl, steps=1000):
    x0, psi0, lam = THRUSTING
    return integrate_extremal(p, "p", Multipliers.for_p(lam), x0, psi0,
                              steps, ctl)


def test_scaling_invariance_to_checker_tolerance():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(10):
        c1, c2 = rng.uniform(0.5, 5.0, size=2)
        cfg = aircraft.AircraftConfig(c1=float(c1), c2=float(c2))
        report = check_invariance_p(aircraft.build_problem(cfg),
                                    aircraft.builtin_groups()[2],
                                    aircraft.sample_config(cfg))
        worst = max(worst, report.worst())
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 5.0
    _verdict("scaling map passes invariance check at 1e-10",
             ok, f"worst residual {worst:.3e}, {elapsed:.2f}s")
    assert ok, f"worst normalized residual {worst:.3e} exceeds 1e-10"


def test_scaling_law_symbolic_reproduction():
    p = aircraft.build_problem()
    groups = aircraft.builtin_groups()
    law = law_p(p, groups[2])
    ref = ex.parse(SCALING_LAW_TEXT)
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        env = {nm: float(rng.uniform(-5, 5)) for nm in law.input_names}
        a, b = law.expr.eval(env), ref.eval(env)
        worst = max(worst, abs(a - b) / max(1.0, abs(b)))
    trivial = (str(law_p(p, groups[0])), str(law_p(p, groups[1])))
    ok = worst <= 1e-12 and trivial == ("psi1", "psi2")
    _verdict("scaling and translation laws match their reference forms",
             ok, f"worst relative gap {worst:.3e}, trivial laws {trivial}")
    assert ok


def test_laws_conserved_along_random_extremals():
    p = aircraft.build_problem()
    ctl = aircraft.control_law_for_problem(p)
    groups = aircraft.builtin_groups()
    scale_law = law_p(p, groups[2])
    psi1_law = law_p(p, groups[0])
    psi2_law = law_p(p, groups[1])
    h_law = ConservationLaw(expr=build_hamiltonian(p, "p").expr, form="p",
                            input_names=dynamics_input_names(p, "p"))
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    worst = {"scale": 0.0, "psi1": 0.0, "psi2": 0.0, "H": 0.0}
    for _ in range(5):
        x0 = rng.uniform(-5, 5, size=5)
        x0[4] = rng.uniform(2.0, 10.0)
        psi0 = rng.uniform(-5, 5, size=5)
        lam = tuple(rng.uniform(-1.0, 0.0, size=2))
        traj = integrate_extremal(p, "p", Multipliers.for_p(lam), x0, psi0,
                                  1000, ctl)
        worst["scale"] = max(worst["scale"],
                             check_law(p, scale_law, traj).drift)
        worst["psi1"] = max(worst["psi1"], check_law(p, psi1_law, traj).drift)
        worst["psi2"] = max(worst["psi2"], check_law(p, psi2_law, traj).drift)
        worst["H"] = max(worst["H"], check_law(p, h_law, traj).drift)
    elapsed = time.perf_counter() - t0
    ok = (worst["scale"] <= 1e-6 and worst["psi1"] <= 1e-13
          and worst["psi2"] <= 1e-13 and worst["H"] <= 1e-6
          and elapsed < 10.0)
    _verdict("laws conserved along 5 random extremals", ok,
             f"drifts scale={worst['scale']:.3e} psi1={worst['psi1']:.3e} "
             f"psi2={worst['psi2']:.3e} H={worst['H']:.3e}, {elapsed:.2f}s")
    assert worst["psi1"] <= 1e-13 and worst["psi2"] <= 1e-13
    assert worst["H"] <= 1e-6 and elapsed < 10.0
    assert worst["scale"] <= 1e-6, \
        f"scaling-law drift {worst['scale']:.3e} exceeds 1e-6"


def test_doubling_steps_cuts_scaling_law_drift_eightfold():
    p = aircraft.build_problem()
    ctl = aircraft.control_law_for_problem(p)
    law = law_p(p, aircraft.builtin_groups()[2])
    instances = (
        ((0.0, 0.0, 1.0, 1.0, 3.0), (0.3, -0.2, 1.0, 0.5, -0.5),
         (-0.1, -0.5)),
        ((0.5, -0.5, 2.0, 1.0, 4.0), (0.6, -0.4, 2.0, 1.0, -1.0),
         (-0.1, -0.5)),
        ((0.0, 0.0, 1.0, 1.0, 5.0), (0.15, -0.1, 0.5, 0.25, -0.25),
         (-0.05, -0.5)),
    )
    ratios = []
    for x0, psi0, lam in instances:
        drifts = []
        for steps in (500, 1000):
            traj = integrate_extremal(p, "p", Multipliers.for_p(lam),
                                      np.array(x0), np.array(psi0), steps,
                                      ctl)
            assert not detect_switches(p, traj, ctl).times, \
                "instance must be switch-free"
            drifts.append(check_law(p, law, traj).drift)
        ratios.append(drifts[0] / drifts[1])
    ok = all(r >= 8.0 for r in ratios)
    _verdict("doubling steps cuts scaling-law drift by 8x", ok,
             "ratios " + ", ".join(f"{r:.2f}" for r in ratios))
    assert ok, (
        f"drift ratios {[f'{r:.3f}' for r in ratios]} show a converged "
        "nonzero drift, not integration error")


def test_corrupted_group_is_rejected_everywhere():
    p = aircraft.build_problem()
    bad_group = corrupted_scaling_group()
    report = check_invariance_p(p, bad_group, aircraft.sample_config())
    invariance_caught = (not report.passed) and report.worst() > 1e-3

    ctl = aircraft.control_law_for_problem(p)
    traj = _thrusting_trajectory(p, ctl)
    bad_law = law_p(p, bad_group)
    law_caught = check_law(p, bad_law, traj).drift > 1e-2

    probe = ConservationLaw(expr=ex.parse("x3"), form="p",
                            input_names=dynamics_input_names(p, "p"))
    probe_caught = not check_law(p, probe, traj, tolerance=1e-6).passed

    ok = invariance_caught and law_caught and probe_caught
    _verdict("corrupted group and bogus laws are rejected", ok,
             f"invariance worst {report.worst():.3e}, law drift "
             f"{check_law(p, bad_law, traj).drift:.3e}, probe caught "
             f"{probe_caught}")
    assert ok


def test_hamiltonian_identity_along_extremals():
    toy = toy_nonautonomous()
    toy_traj = integrate_extremal(toy, "p1", Multipliers.for_p1(-1.0, ()),
                                  np.array([0.5]), np.array([1.5]), 1000,
                                  toy_control())
    toy_res = check_hamiltonian_identity(toy, toy_traj,
                                         toy_control()).max_residual

    p = aircraft.build_problem()
    ctl = aircraft.control_law_for_problem(p)
    air_res = check_hamiltonian_identity(
        p, _thrusting_trajectory(p, ctl), ctl).max_residual

    ok = toy_res <= 1e-4 and air_res <= 1e-4
    _verdict("total dH/dt matches partial dH/dt at h=1e-3", ok,
             f"toy residual {toy_res:.3e}, aircraft residual {air_res:.3e}")
    assert ok


def test_scalarized_hamiltonian_equals_vector_hamiltonian():
    p = aircraft.build_problem()
    rng = np.random.default_rng(7)
    worst = 0.0
    for index, psi0_mult, lam_rest in ((1, -0.3, -0.7), (2, -0.4, -0.6)):
        q = scalarize(p, index, (0.7, 1.0))
        h_scalar = build_hamiltonian(q, "p1")
        h_vector = build_hamiltonian(p, "p")
        merged = map_multipliers(p, index, Multipliers.for_p1(psi0_mult,
                                                             (lam_rest,)))
        for _ in range(50):
            env = {nm: float(rng.uniform(-3, 3))
                   for nm in h_vector.input_names}
            env["x5"] = float(rng.uniform(0.5, 5.0))
            env.update(p.constants)
            a = h_scalar.expr.eval(
                dict(env, psi0=psi0_mult, lambda1=lam_rest))
            b = h_vector.expr.eval(
                dict(env, lambda1=merged.lam[0], lambda2=merged.lam[1]))
            worst = max(worst, abs(a - b))
    ok = worst <= 1e-12
    _verdict("scalarized and vector Hamiltonians agree", ok,
             f"worst gap {worst:.3e} over 100 points")
    assert ok


def test_dominance_filter_matches_brute_force():
    rng = np.random.default_rng(8)
    mismatches = 0
    duplicate_rows_kept = True
    for _ in range(500):
        m = int(rng.integers(1, 13))
        N = int(rng.integers(2, 4))
        costs = [tuple(float(v) for v in rng.integers(0, 5, size=N))
                 for _ in range(m)]
        if m >= 2 and rng.random() < 0.5:
            costs[1] = costs[0]                 # force an exact duplicate
        kept = filter_dominated(costs)
        expect = brute_force_kept(costs, 1e-9)
        got = []
        pool = list(kept)
        for c in costs:
            if c in pool:
                pool.remove(c)
                got.append(True)
            else:
                got.append(False)
        if got != expect:
            mismatches += 1
        if costs[0] == costs[min(1, m - 1)] and expect[0]:
            # equal vectors never dominate each other
            if not (got[0] and got[min(1, m - 1)]):
                duplicate_rows_kept = False
    ok = mismatches == 0 and duplicate_rows_kept
    _verdict("dominance filter equals brute force on 500 instances", ok,
             f"{mismatches} mismatches, duplicates kept: "
             f"{duplicate_rows_kept}")
    assert ok


def test_symbolic_derivatives_match_difference_quotients():
    rng = np.random.default_rng(9)
    names = ("x1", "x2", "u1", "t")
    checked = 0
    worst = 0.0
    while checked < 200:
        e = random_expr(rng, names, 4)
        name = str(rng.choice(names))
        env = {nm: float(rng.uniform(-2, 2)) for nm in names}
        exact = e.diff(name).eval(env)
        if abs(exact) > 1e6:
            continue
        h = 1e-5 * (1.0 + abs(env[name]))
        fd = central_difference(e, env, name, h)
        worst = max(worst, abs(fd - exact) / max(1.0, abs(exact)))
        checked += 1

    p = aircraft.build_problem()
    gen = generator(p, aircraft.builtin_groups()[2])
    angle_gap = 0.0
    for u2 in np.linspace(-1.5, 1.5, 50):
        got = gen.upsilon[1].eval({"u2": float(u2)})
        want = float(np.sin(u2) * np.cos(u2))
        angle_gap = max(angle_gap, abs(got - want))

    ok = worst <= 1e-6 and angle_gap <= 1e-9
    _verdict("symbolic derivatives verified against finite differences",
             ok, f"worst FD gap {worst:.3e} over 200 expressions, "
                 f"angle-rate gap {angle_gap:.3e}")
    assert ok


def test_shooting_recovers_unit_control():
    result = shoot(lq_problem(), "p1", Multipliers.for_p1(-1.0, ()),
                   lq_control())
    gap = float(np.max(np.abs(result.trajectory.u - 1.0)))
    ok = gap <= 1e-8
    _verdict("shooting reproduces the constant-control extremal", ok,
             f"max |u - 1| = {gap:.3e} in {result.iterations} iteration(s)")
    assert ok
