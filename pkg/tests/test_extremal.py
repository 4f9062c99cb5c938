"""Extremal integration: control maximization, RK4 flow, conservation
and Hamiltonian checks, switch detection, and costate shooting."""

import io

import numpy as np
import pytest

from symoc import aircraft
from symoc import expr as ex
from symoc.extremal import (AnalyticLaw, GridSearchLaw, IntegrationError,
                            ShootingError, audit_control_law, check_law,
                            check_hamiltonian_identity, detect_switches,
                            integrate_extremal, maximize_h, shoot,
                            write_trajectory_csv)
from symoc.model import ControlProblem, Multipliers, ValidationError
from symoc.noether import law_p, law_p1
from symoc.symmetry import OneParamGroup

from conftest import (lq_control, lq_problem, oscillator_control,
                      oscillator_problem, rotation_group, toy_control,
                      toy_nonautonomous)

THRUSTING = dict(x0=(0.0, 0.0, 1.0, 1.0, 3.0),
                 psi0=(0.3, -0.2, 1.0, 0.5, -0.5),
                 lam=(-0.1, -0.5))
SWITCHING = dict(x0=(0.0, 0.0, 0.5, 0.2, 2.0),
                 psi0=(0.8, 0.1, 1.0, 0.2, 0.1),
                 lam=(-0.3, -0.5))


def _air_traj(air_problem, air_control, case, steps=500):
    return integrate_extremal(air_problem, "p",
                              Multipliers.for_p(case["lam"]),
                              np.array(case["x0"]), np.array(case["psi0"]),
                              steps, air_control)


# -- control maximization ---------------------------------------------------

def test_grid_search_matches_analytic_maximizer(air_problem, air_control):
    mult = Multipliers.for_p((-0.1, -0.5))
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(40):
        x = rng.uniform(-2, 2, size=5)
        x[4] = rng.uniform(0.5, 5.0)
        psi = rng.uniform(-2, 2, size=5)
        gap = audit_control_law(air_problem, "p", mult, air_control,
                                0.0, x, psi)
        worst = max(worst, abs(gap))
    assert worst <= 5e-7


def test_grid_search_ties_break_to_low_corner(air_problem):
    # psi = 0 and zero cost weights make H constant in u
    mult = Multipliers.for_p((0.0, -1.0))
    u = maximize_h(air_problem, "p", mult, 0.0,
                   np.array([0.0, 0.0, 1.0, 1.0, 3.0]), np.zeros(5))
    assert u[0] == 0.0
    assert u[1] == -1.2


def test_grid_search_needs_finite_bounds():
    with pytest.raises(ValidationError):
        integrate_extremal(lq_problem(), "p1", Multipliers.for_p1(-1.0, ()),
                           np.zeros(1), np.full(1, 2.0), 10,
                           GridSearchLaw())


# -- integration basics -----------------------------------------------------

def test_lq_flow_is_exact():
    p = lq_problem()
    traj = integrate_extremal(p, "p1", Multipliers.for_p1(-1.0, ()),
                              np.zeros(1), np.full(1, 2.0), 50, lq_control())
    assert traj.t.shape == (51,)
    assert traj.step_size == pytest.approx(0.02)
    assert np.allclose(traj.u, 1.0, atol=1e-15)
    assert np.allclose(traj.psi, 2.0, atol=1e-15)
    assert traj.x[-1, 0] == pytest.approx(1.0, abs=1e-14)


def test_states_and_costates_stay_finite_and_shaped(air_problem, air_control):
    traj = _air_traj(air_problem, air_control, THRUSTING, steps=100)
    assert traj.x.shape == (101, 5)
    assert traj.u.shape == (101, 2)
    assert traj.psi.shape == (101, 5)
    assert np.isfinite(traj.x).all()
    assert np.isfinite(traj.psi).all()
    assert (traj.u[:, 0] == 1.0).all()          # thrust never switches off


def test_integration_error_carries_partial_trajectory(air_problem,
                                                      air_control):
    case = dict(THRUSTING, x0=(0.0, 0.0, 1.0, 1.0, 0.4))
    with pytest.raises(IntegrationError) as err:
        _air_traj(air_problem, air_control, case, steps=200)
    partial = err.value.trajectory
    assert partial is not None
    assert partial.t[-1] < 0.5                  # stopped near fuel-out
    assert np.isfinite(partial.x).all()


def test_expression_control_is_clamped_within_tolerance():
    p = ControlProblem(n=1, r=1, a=0.0, b=1.0,
                       phi=(ex.parse("u1"),), L=(ex.parse("u1^2"),),
                       omega=((0.0, 1.0),))
    near = AnalyticLaw(exprs=(ex.parse("1 + 1e-12"),))
    traj = integrate_extremal(p, "p1", Multipliers.for_p1(-1.0, ()),
                              np.zeros(1), np.zeros(1), 10, near)
    assert (traj.u <= 1.0).all()
    over = AnalyticLaw(exprs=(ex.parse("1.1"),))
    with pytest.raises(IntegrationError):
        integrate_extremal(p, "p1", Multipliers.for_p1(-1.0, ()),
                           np.zeros(1), np.zeros(1), 10, over)


# -- conservation checks ----------------------------------------------------

def test_costate_laws_exactly_conserved(air_problem, air_groups,
                                        air_control):
    traj = _air_traj(air_problem, air_control, THRUSTING)
    for k in range(2):
        law = law_p(air_problem, air_groups[k])
        report = check_law(air_problem, law, traj, tolerance=1e-13)
        assert report.passed
        assert report.max_deviation == 0.0


def test_scaling_pseudo_law_drifts(air_problem, air_groups, air_control):
    traj = _air_traj(air_problem, air_control, THRUSTING, steps=1000)
    law = law_p(air_problem, air_groups[2])
    report = check_law(air_problem, law, traj, tolerance=1e-6)
    assert not report.passed
    assert report.drift > 1e-2                  # far beyond integrator error


def test_rotation_law_conserved_at_fourth_order():
    p = oscillator_problem()
    law = law_p1(p, rotation_group())
    mult = Multipliers.for_p1(-1.0, ())
    x0 = np.array([1.0, 0.3, -0.2, 0.8])
    psi0 = np.array([0.4, -0.7, 0.5, 0.9])
    drifts = []
    for steps in (100, 200):
        traj = integrate_extremal(p, "p1", mult, x0, psi0, steps,
                                  oscillator_control())
        drifts.append(check_law(p, law, traj, tolerance=1e-6).drift)
    assert drifts[0] <= 1e-6
    assert drifts[0] / drifts[1] >= 8.0         # h^4 scaling


def test_check_law_rejects_mismatches(air_problem, air_groups, air_control):
    traj = _air_traj(air_problem, air_control, THRUSTING, steps=50)
    law = law_p(air_problem, air_groups[0])
    wrong_form = law.__class__(expr=law.expr, form="p1",
                               input_names=law.input_names)
    with pytest.raises(ValidationError):
        check_law(air_problem, wrong_form, traj)
    alien = law.__class__(expr=ex.parse("psi1 + z9"), form="p",
                          input_names=law.input_names)
    with pytest.raises(ValidationError):
        check_law(air_problem, alien, traj)


# -- Hamiltonian identity ---------------------------------------------------

def test_dhdt_holds_on_nonautonomous_toy():
    p = toy_nonautonomous()
    traj = integrate_extremal(p, "p1", Multipliers.for_p1(-1.0, ()),
                              np.array([0.5]), np.array([1.5]), 1000,
                              toy_control())
    report = check_hamiltonian_identity(p, traj, toy_control())
    assert report.passed
    assert report.max_residual <= 1e-4
    assert report.checked > 900


def test_dhdt_holds_on_switch_free_aircraft_arc(air_problem, air_control):
    traj = _air_traj(air_problem, air_control, THRUSTING, steps=1000)
    report = check_hamiltonian_identity(air_problem, traj, air_control)
    assert report.passed
    assert report.max_residual <= 1e-12
    assert report.excluded == 2                 # stencil endpoints only


def test_dhdt_excludes_switch_neighborhoods(air_problem, air_control):
    traj = _air_traj(air_problem, air_control, SWITCHING, steps=1000)
    report = check_hamiltonian_identity(air_problem, traj, air_control)
    assert report.excluded > 2
    assert report.passed


# -- switch detection -------------------------------------------------------

def test_detect_switches_refines_crossing(air_problem, air_control):
    traj = _air_traj(air_problem, air_control, SWITCHING, steps=1000)
    report = detect_switches(air_problem, traj, air_control)
    assert not report.singular
    assert len(report.times) == 1
    assert report.times[0] == pytest.approx(0.255669, abs=1e-4)
    # thrust drops from full to zero across the crossing
    k = np.searchsorted(traj.t, report.times[0])
    assert traj.u[k - 2, 0] == 1.0
    assert traj.u[k + 2, 0] == 0.0


def test_detect_switches_flags_singular_arc(air_problem):
    # psi3 = psi4 = 0 freezes psi5, so sigma = lambda1 - psi5 stays 0
    law = aircraft.control_law_for_problem(air_problem)
    traj = integrate_extremal(air_problem, "p",
                              Multipliers.for_p((-0.5, -0.5)),
                              np.array([0.0, 0.0, 1.0, 1.0, 3.0]),
                              np.array([0.0, 0.0, 0.0, 0.0, -0.5]),
                              200, law)
    report = detect_switches(air_problem, traj, law)
    assert report.singular
    assert report.times == ()


def test_no_switches_on_thrusting_arc(air_problem, air_control):
    traj = _air_traj(air_problem, air_control, THRUSTING, steps=500)
    report = detect_switches(air_problem, traj, air_control)
    assert not report.singular
    assert report.times == ()


# -- shooting ---------------------------------------------------------------

def test_shoot_recovers_lq_extremal():
    result = shoot(lq_problem(), "p1", Multipliers.for_p1(-1.0, ()),
                   lq_control())
    assert result.residual_norm <= 1e-10
    assert result.psi_a[0] == pytest.approx(2.0, abs=1e-8)
    assert np.max(np.abs(result.trajectory.u - 1.0)) <= 1e-8


def test_shoot_accepts_explicit_target():
    result = shoot(lq_problem(), "p1", Multipliers.for_p1(-1.0, ()),
                   lq_control(), target=np.array([2.0]))
    assert result.psi_a[0] == pytest.approx(4.0, abs=1e-7)


def test_shoot_reports_best_iterate_on_failure():
    with pytest.raises(ShootingError) as err:
        shoot(lq_problem(), "p1", Multipliers.for_p1(-1.0, ()),
              lq_control(), tolerance=1e-16, max_iterations=1)
    e = err.value
    assert e.iterations == 1
    assert e.residual_norm < 1e-6
    assert e.trajectory is not None


def test_shoot_requires_boundary_data():
    p = oscillator_problem()         # has neither alpha nor beta
    with pytest.raises(ValidationError):
        shoot(p, "p1", Multipliers.for_p1(-1.0, ()), oscillator_control())


# -- CSV emission -----------------------------------------------------------

def test_trajectory_csv_round_trips(air_problem, air_control):
    traj = _air_traj(air_problem, air_control, THRUSTING, steps=20)
    buf = io.StringIO()
    write_trajectory_csv(traj, buf, header_lines=("alpha", "beta"))
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# alpha" and lines[1] == "# beta"
    assert lines[2].split(",") == [
        "t", "x1", "x2", "x3", "x4", "x5", "u1", "u2",
        "psi1", "psi2", "psi3", "psi4", "psi5"]
    assert len(lines) == 3 + 21
    row = [float(v) for v in lines[10].split(",")]
    k = 7
    assert row[0] == traj.t[k]
    assert row[1:6] == list(traj.x[k])          # %.17g preserves doubles
