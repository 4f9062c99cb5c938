"""Pontryagin extremals: forward integration, control maximization,
shooting, and along-trajectory verification of candidate first integrals.

The pseudo-Hamiltonian system ``xdot = phi``, ``psidot = -dH/dx`` is
integrated with classical fixed-step fourth-order Runge-Kutta; the
control is re-maximized at every stage evaluation, either by a
deterministic grid search with golden-section refinement or by a
user-supplied closed-form law.  Candidate laws are then evaluated at
every node and judged by their normalized drift
``max_k |C(t_k) - C(t_0)| / (1 + |C(t_0)|)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .expr import Expr
from ._core import Program, compile_program
from .model import (ControlProblem, Multipliers, ValidationError,
                    adjoint_rhs, build_hamiltonian, dynamics_input_names,
                    hamiltonian_dt, multiplier_values, substitute_constants,
                    u_names, validate_multipliers, x_names)
from .noether import ConservationLaw

_OMEGA_TOL = 1e-9          # analytic controls may overshoot bounds by this
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class IntegrationError(Exception):
    """Evaluation failure along the flow; carries the partial trajectory."""

    def __init__(self, message: str, trajectory: "Trajectory | None" = None):
        super().__init__(message)
        self.trajectory = trajectory


class ShootingError(Exception):
    """Shooting non-convergence; carries the best iterate found."""

    def __init__(self, message: str, psi_a=None, residual_norm=math.inf,
                 iterations: int = 0, trajectory: "Trajectory | None" = None):
        super().__init__(message)
        self.psi_a = psi_a
        self.residual_norm = residual_norm
        self.iterations = iterations
        self.trajectory = trajectory


# -- trajectories -----------------------------------------------------------

@dataclass
class Trajectory:
    """Uniform-grid samples of one extremal candidate."""

    t: np.ndarray                      # (m+1,)
    x: np.ndarray                      # (m+1, n)
    u: np.ndarray                      # (m+1, r)
    psi: np.ndarray                    # (m+1, n)
    form: str
    multipliers: Multipliers

    @property
    def steps(self) -> int:
        return len(self.t) - 1

    @property
    def step_size(self) -> float:
        return float(self.t[1] - self.t[0])


def trajectory_rows(p: ControlProblem, traj: Trajectory) -> np.ndarray:
    """Node matrix in the canonical slot order (t, x, u, psi, multipliers)."""
    m1 = len(traj.t)
    mv = multiplier_values(p, traj.form, traj.multipliers)
    rows = np.empty((m1, 1 + p.n + p.r + p.n + len(mv)))
    rows[:, 0] = traj.t
    rows[:, 1:1 + p.n] = traj.x
    rows[:, 1 + p.n:1 + p.n + p.r] = traj.u
    rows[:, 1 + p.n + p.r:1 + 2 * p.n + p.r] = traj.psi
    rows[:, 1 + 2 * p.n + p.r:] = mv
    return rows


def evaluate_on_trajectory(p: ControlProblem, traj: Trajectory,
                           exprs) -> np.ndarray:
    """Evaluate expressions (in t, x, u, psi, multipliers, constants) at
    every node; raises IntegrationError on any domain failure."""
    names = dynamics_input_names(p, traj.form)
    prog = compile_program([substitute_constants(p, e) for e in exprs], names)
    rows = trajectory_rows(p, traj)
    Y, status, errcode = prog.eval_many(rows)
    bad = np.nonzero(status >= 0)[0]
    if bad.size:
        k = int(bad[0])
        raise IntegrationError(
            f"evaluation failed at node {k} (t={traj.t[k]:.6g}): "
            + prog.error_text(status[k], errcode[k]), trajectory=traj)
    return Y


def write_trajectory_csv(traj: Trajectory, fh, header_lines=()):
    """CSV with 17-significant-digit floats; extra header comment lines
    are written first, prefixed with '# '."""
    n = traj.x.shape[1]
    r = traj.u.shape[1]
    for line in header_lines:
        fh.write(f"# {line}\n")
    cols = ("t",) + x_names(n) + u_names(r) + tuple(
        f"psi{i}" for i in range(1, n + 1))
    fh.write(",".join(cols) + "\n")
    for k in range(len(traj.t)):
        vals = [traj.t[k], *traj.x[k], *traj.u[k], *traj.psi[k]]
        fh.write(",".join("%.17g" % v for v in vals) + "\n")


# -- control laws -----------------------------------------------------------

@dataclass(frozen=True)
class GridSearchLaw:
    """Derivative-free maximization: per-dimension grid (endpoints
    included) then golden-section refinement accepting only strict
    improvements.  Ties break to the first grid point in row-major
    order, i.e. toward the smallest control lexicographically."""

    resolution: int = 64
    refinements: int = 20


@dataclass(frozen=True)
class AnalyticLaw:
    """Closed-form maximizer: either r expressions in
    (t, x, psi, multipliers) or a native callable
    ``func(t, x, psi, mult_values) -> r floats``.  Optional switching
    expressions (same variables) drive switch detection."""

    exprs: tuple[Expr, ...] | None = None
    func: object | None = None
    switching: tuple[Expr, ...] = ()
    name: str = "analytic"

    def __post_init__(self):
        if (self.exprs is None) == (self.func is None):
            raise ValidationError(
                "analytic law needs exactly one of exprs or func")
        if self.exprs is not None:
            object.__setattr__(self, "exprs", tuple(self.exprs))
        object.__setattr__(self, "switching", tuple(self.switching))


def _finite_omega(p: ControlProblem):
    bounds = []
    for j, (lo, hi) in enumerate(p.omega, start=1):
        if lo is None or hi is None:
            raise ValidationError(
                f"grid search needs finite bounds for u{j}; "
                f"declare omega or use an analytic law")
        bounds.append((float(lo), float(hi)))
    return bounds


class _Maximizer:
    """Grid + golden-section argmax of H over the control box."""

    def __init__(self, p: ControlProblem, form: str, law: GridSearchLaw):
        if law.resolution < 2:
            raise ValidationError("grid resolution must be at least 2")
        self.bounds = _finite_omega(p)
        r = p.r
        if law.resolution ** r > 2_000_000:
            raise ValidationError(
                f"grid of {law.resolution}^{r} points is too large; "
                f"lower the resolution")
        self.p = p
        self.law = law
        names = dynamics_input_names(p, form)
        h = build_hamiltonian(p, form)
        self.prog = compile_program([substitute_constants(p, h.expr)], names)
        self.n, self.r = p.n, r
        self.mult = np.zeros(len(names) - (1 + 2 * p.n + r))
        axes = [np.linspace(lo, hi, law.resolution) for lo, hi in self.bounds]
        mesh = np.meshgrid(*axes, indexing="ij")
        grid_u = np.stack([m.ravel() for m in mesh], axis=1)
        self.rows = np.zeros((grid_u.shape[0], len(names)))
        self.rows[:, 1 + p.n:1 + p.n + r] = grid_u
        self.grid_u = grid_u
        self.cell = np.array([(hi - lo) / (law.resolution - 1)
                              for lo, hi in self.bounds])
        self.row = np.zeros((1, len(names)))

    def set_multipliers(self, mv):
        self.mult[:] = mv

    def _fill(self, buf, t, x, psi):
        n, r = self.n, self.r
        buf[:, 0] = t
        buf[:, 1:1 + n] = x
        buf[:, 1 + n + r:1 + 2 * n + r] = psi
        buf[:, 1 + 2 * n + r:] = self.mult

    def _h_at(self, u):
        self.row[0, 1 + self.n:1 + self.n + self.r] = u
        Y, status, _ = self.prog.eval_many(self.row)
        return -math.inf if status[0] >= 0 else float(Y[0, 0])

    def control(self, t, x, psi):
        self._fill(self.rows, t, x, psi)
        Y, status, errcode = self.prog.eval_many(self.rows)
        vals = Y[:, 0].copy()
        bad = status >= 0
        if bad.all():
            k = int(np.argmax(bad))
            raise IntegrationError(
                f"Hamiltonian not evaluable anywhere on the control grid "
                f"at t={t:.6g}: " + self.prog.error_text(status[k], errcode[k]))
        vals[bad] = -math.inf
        best = int(np.argmax(vals))
        u = self.grid_u[best].copy()
        h_best = float(vals[best])

        self._fill(self.row, t, x, psi)
        for j in range(self.r):
            lo, hi = self.bounds[j]
            a = max(lo, u[j] - self.cell[j])
            b = min(hi, u[j] + self.cell[j])
            if b <= a:
                continue
            keep = u[j]
            c = b - _GOLDEN * (b - a)
            d = a + _GOLDEN * (b - a)
            u[j] = c
            fc = self._h_at(u)
            u[j] = d
            fd = self._h_at(u)
            for _ in range(self.law.refinements):
                if fc > fd:
                    b, d, fd = d, c, fc
                    c = b - _GOLDEN * (b - a)
                    u[j] = c
                    fc = self._h_at(u)
                else:
                    a, c, fc = c, d, fd
                    d = a + _GOLDEN * (b - a)
                    u[j] = d
                    fd = self._h_at(u)
            v = 0.5 * (a + b)
            u[j] = v
            hv = self._h_at(u)
            if hv > h_best:
                h_best = hv
            else:
                u[j] = keep
        return u


class _ExprController:
    """Controller from r closed-form expressions (no control variables)."""

    def __init__(self, p: ControlProblem, form: str, law: AnalyticLaw):
        names = dynamics_input_names(p, form)
        forbidden = set(u_names(p.r))
        exprs = []
        for j, e in enumerate(law.exprs, start=1):
            bad = sorted(e.variables() & forbidden)
            if bad:
                raise ValidationError(
                    f"analytic control expression {j} references '{bad[0]}'; "
                    f"laws map (t, x, psi, multipliers) to controls")
            exprs.append(substitute_constants(p, e))
        if len(exprs) != p.r:
            raise ValidationError(
                f"analytic law has {len(exprs)} expressions, expected r={p.r}")
        self.p = p
        self.prog = compile_program(exprs, names)
        self.n, self.r = p.n, p.r
        self.mult = np.zeros(len(names) - (1 + 2 * p.n + p.r))
        self.row = np.zeros((1, len(names)))

    def set_multipliers(self, mv):
        self.mult[:] = mv

    def control(self, t, x, psi):
        n, r = self.n, self.r
        row = self.row
        row[0, 0] = t
        row[0, 1:1 + n] = x
        row[0, 1 + n + r:1 + 2 * n + r] = psi
        row[0, 1 + 2 * n + r:] = self.mult
        Y, status, errcode = self.prog.eval_many(row)
        if status[0] >= 0:
            raise IntegrationError(
                f"analytic control law failed at t={t:.6g}: "
                + self.prog.error_text(status[0], errcode[0]))
        return _into_omega(Y[0], self.p.omega, t)


class _FuncController:
    """Controller from a native callable."""

    def __init__(self, p: ControlProblem, form: str, law: AnalyticLaw):
        self.p = p
        self.func = law.func
        self.mult = np.zeros(
            len(dynamics_input_names(p, form)) - (1 + 2 * p.n + p.r))

    def set_multipliers(self, mv):
        self.mult[:] = mv

    def control(self, t, x, psi):
        u = np.asarray(self.func(t, x, psi, self.mult), dtype=float)
        if u.shape != (self.p.r,):
            raise IntegrationError(
                f"analytic control callable returned shape {u.shape}, "
                f"expected ({self.p.r},)")
        if not np.all(np.isfinite(u)):
            raise IntegrationError(
                f"analytic control callable returned a non-finite value "
                f"at t={t:.6g}")
        return _into_omega(u, self.p.omega, t)


def _into_omega(u, omega, t):
    out = np.array(u, dtype=float)
    for j, (lo, hi) in enumerate(omega):
        v = out[j]
        if lo is not None and v < lo - _OMEGA_TOL:
            raise IntegrationError(
                f"analytic control u{j + 1}={v:.6g} violates its lower "
                f"bound {lo} at t={t:.6g}")
        if hi is not None and v > hi + _OMEGA_TOL:
            raise IntegrationError(
                f"analytic control u{j + 1}={v:.6g} violates its upper "
                f"bound {hi} at t={t:.6g}")
        if lo is not None and v < lo:
            out[j] = lo
        if hi is not None and v > hi:
            out[j] = hi
    return out


def _make_controller(p: ControlProblem, form: str, law):
    if law is None:
        law = GridSearchLaw()
    if isinstance(law, GridSearchLaw):
        return _Maximizer(p, form, law)
    if isinstance(law, AnalyticLaw):
        if law.exprs is not None:
            return _ExprController(p, form, law)
        return _FuncController(p, form, law)
    raise ValidationError(f"unknown control law {law!r}")


def maximize_h(p: ControlProblem, form: str, mult: Multipliers,
               t: float, x, psi, law=None) -> np.ndarray:
    """One-shot control maximization at a single point."""
    validate_multipliers(p, form, mult)
    ctrl = _make_controller(p, form, law)
    ctrl.set_multipliers(multiplier_values(p, form, mult))
    return ctrl.control(float(t), np.asarray(x, float), np.asarray(psi, float))


def audit_control_law(p: ControlProblem, form: str, mult: Multipliers,
                      law: AnalyticLaw, t: float, x, psi,
                      grid: GridSearchLaw | None = None) -> float:
    """Hamiltonian value lost by the closed-form law versus grid search
    at one point: ``H(u_grid) - H(u_analytic)`` (positive means the
    closed form lost value; a correct argmax keeps this <= ~0)."""
    x = np.asarray(x, float)
    psi = np.asarray(psi, float)
    mv = multiplier_values(p, form, mult)
    gc = _make_controller(p, form, grid or GridSearchLaw())
    gc.set_multipliers(mv)
    ac = _make_controller(p, form, law)
    ac.set_multipliers(mv)
    u_grid = gc.control(t, x, psi)
    u_law = ac.control(t, x, psi)
    h = build_hamiltonian(p, form)
    names = dynamics_input_names(p, form)
    prog = compile_program([substitute_constants(p, h.expr)], names)
    row = np.empty((1, len(names)))
    row[0, 0] = t
    row[0, 1:1 + p.n] = x
    row[0, 1 + p.n + p.r:1 + 2 * p.n + p.r] = psi
    row[0, 1 + 2 * p.n + p.r:] = mv
    vals = []
    for u in (u_grid, u_law):
        row[0, 1 + p.n:1 + p.n + p.r] = u
        Y, status, errcode = prog.eval_many(row)
        if status[0] >= 0:
            raise IntegrationError("Hamiltonian audit failed: "
                                   + prog.error_text(status[0], errcode[0]))
        vals.append(float(Y[0, 0]))
    return vals[0] - vals[1]


# -- integration ------------------------------------------------------------

def integrate_extremal(p: ControlProblem, form: str, mult: Multipliers,
                       x_a, psi_a, steps: int, law=None) -> Trajectory:
    """Fixed-step RK4 on the joint (x, psi) system with the control
    re-maximized at every one of the four stage evaluations."""
    validate_multipliers(p, form, mult)
    if steps < 2:
        raise ValidationError("need at least 2 integration steps")
    x_a = np.asarray(x_a, dtype=float)
    psi_a = np.asarray(psi_a, dtype=float)
    if x_a.shape != (p.n,) or psi_a.shape != (p.n,):
        raise ValidationError(
            f"initial state and costate must have shape ({p.n},)")
    mv = multiplier_values(p, form, mult)
    if float(np.abs(psi_a).sum() + np.abs(mv).sum()) == 0.0:
        raise ValidationError(
            "trivial extremal: costate and all multipliers are zero")

    names = dynamics_input_names(p, form)
    h = build_hamiltonian(p, form)
    rhs_exprs = [substitute_constants(p, e).simplify() for e in p.phi]
    rhs_exprs += [substitute_constants(p, e).simplify()
                  for e in adjoint_rhs(p, h)]
    rhs = compile_program(rhs_exprs, names)
    ctrl = _make_controller(p, form, law)
    ctrl.set_multipliers(mv)

    n, r = p.n, p.r
    m = steps
    t_grid = np.linspace(p.a, p.b, m + 1)
    hstep = (p.b - p.a) / m
    x = np.empty((m + 1, n))
    psi = np.empty((m + 1, n))
    u = np.full((m + 1, r), np.nan)
    x[0] = x_a
    psi[0] = psi_a
    row = np.empty((1, len(names)))
    row[0, 1 + 2 * n + r:] = mv

    def partial(k):
        return Trajectory(t=t_grid[:k + 1].copy(), x=x[:k + 1].copy(),
                          u=u[:k + 1].copy(), psi=psi[:k + 1].copy(),
                          form=form, multipliers=mult)

    def f(tk, xk, pk, k):
        uk = ctrl.control(tk, xk, pk)
        row[0, 0] = tk
        row[0, 1:1 + n] = xk
        row[0, 1 + n:1 + n + r] = uk
        row[0, 1 + n + r:1 + 2 * n + r] = pk
        Y, status, errcode = rhs.eval_many(row)
        if status[0] >= 0:
            raise IntegrationError(
                f"dynamics evaluation failed at t={tk:.6g}: "
                + rhs.error_text(status[0], errcode[0]), trajectory=partial(k))
        return Y[0, :n], Y[0, n:], uk

    half = 0.5 * hstep
    for k in range(m):
        tk = t_grid[k]
        xk, pk = x[k], psi[k]
        try:
            k1x, k1p, uk = f(tk, xk, pk, k)
            u[k] = uk
            k2x, k2p, _ = f(tk + half, xk + half * k1x, pk + half * k1p, k)
            k3x, k3p, _ = f(tk + half, xk + half * k2x, pk + half * k2p, k)
            k4x, k4p, _ = f(tk + hstep, xk + hstep * k3x, pk + hstep * k3p, k)
        except IntegrationError as err:
            if err.trajectory is None:
                err.trajectory = partial(k)
            raise
        x[k + 1] = xk + (hstep / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        psi[k + 1] = pk + (hstep / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    try:
        u[m] = ctrl.control(t_grid[m], x[m], psi[m])
    except IntegrationError as err:
        if err.trajectory is None:
            err.trajectory = partial(m - 1)
        raise
    return Trajectory(t=t_grid, x=x, u=u, psi=psi, form=form,
                      multipliers=mult)


# -- conservation and Hamiltonian checks ------------------------------------

@dataclass
class ConservationReport:
    c0: float
    max_deviation: float
    drift: float                       # max deviation / (1 + |C(t0)|)
    worst_index: int
    tolerance: float
    passed: bool
    values: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"c0": self.c0, "max_deviation": self.max_deviation,
                "drift": self.drift, "worst_index": self.worst_index,
                "tolerance": self.tolerance, "passed": self.passed}


def check_law(p: ControlProblem, law: ConservationLaw, traj: Trajectory,
              tolerance: float = 1e-6) -> ConservationReport:
    """Evaluate the candidate law at every node and measure its drift."""
    if law.form != traj.form:
        raise ValidationError(
            f"law is for form '{law.form}' but trajectory is '{traj.form}'")
    known = set(law.input_names) | set(p.constants)
    bad = sorted(law.expr.variables() - known)
    if bad:
        raise ValidationError(f"law references unknown symbol '{bad[0]}'")
    values = evaluate_on_trajectory(p, traj, [law.expr])[:, 0]
    c0 = float(values[0])
    dev = np.abs(values - c0)
    worst = int(np.argmax(dev))
    max_dev = float(dev[worst])
    drift = max_dev / (1.0 + abs(c0))
    return ConservationReport(c0=c0, max_deviation=max_dev, drift=drift,
                              worst_index=worst, tolerance=tolerance,
                              passed=drift <= tolerance, values=values)


@dataclass
class HamiltonianReport:
    max_residual: float
    worst_index: int
    checked: int
    excluded: int
    tolerance: float
    passed: bool
    h_values: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"max_residual": self.max_residual,
                "worst_index": self.worst_index, "checked": self.checked,
                "excluded": self.excluded, "tolerance": self.tolerance,
                "passed": self.passed}


def check_hamiltonian_identity(p: ControlProblem, traj: Trajectory,
                               law=None, tolerance: float = 1e-4
                               ) -> HamiltonianReport:
    """Central-difference d/dt of H along the trajectory against the
    symbolic partial dH/dt.  Endpoints are excluded, as is every node
    within two grid steps of a detected control switch (the identity
    holds only on intervals where the control is continuous)."""
    h = build_hamiltonian(p, traj.form)
    Y = evaluate_on_trajectory(p, traj, [h.expr, hamiltonian_dt(h)])
    hv, ht = Y[:, 0], Y[:, 1]
    m = len(traj.t) - 1
    hstep = traj.step_size

    switch_times = []
    singular = False
    if isinstance(law, AnalyticLaw) and law.switching:
        sw = detect_switches(p, traj, law)
        switch_times = list(sw.times)
        singular = sw.singular

    fd = (hv[2:] - hv[:-2]) / (2.0 * hstep)
    residual = np.abs(fd - ht[1:-1])
    include = np.ones(m - 1, dtype=bool)
    for ts in switch_times:
        include &= np.abs(traj.t[1:-1] - ts) > 2.0 * hstep + 1e-15
    checked = int(include.sum())
    excluded = (m + 1) - checked
    if checked == 0:
        return HamiltonianReport(max_residual=0.0, worst_index=-1, checked=0,
                                 excluded=excluded, tolerance=tolerance,
                                 passed=not singular, h_values=hv)
    masked = np.where(include, residual, -1.0)
    worst = int(np.argmax(masked))
    return HamiltonianReport(max_residual=float(residual[worst]),
                             worst_index=worst + 1, checked=checked,
                             excluded=excluded, tolerance=tolerance,
                             passed=float(residual[worst]) <= tolerance,
                             h_values=hv)


# -- switching structure ----------------------------------------------------

@dataclass
class SwitchReport:
    times: tuple[float, ...]
    singular: bool
    values: np.ndarray = field(repr=False)


def detect_switches(p: ControlProblem, traj: Trajectory, law: AnalyticLaw,
                    refine_tol: float = 1e-10,
                    singular_tol: float = 1e-12) -> SwitchReport:
    """Zero crossings of the law's switching expressions along the
    trajectory, refined by bisection on linearly interpolated nodes.  A
    switching function that vanishes identically (singular arc) raises
    the ``singular`` flag instead of reporting crossings."""
    if not isinstance(law, AnalyticLaw) or not law.switching:
        raise ValidationError(
            "switch detection needs an analytic law with switching "
            "expressions")
    names = dynamics_input_names(p, traj.form)
    prog = compile_program(
        [substitute_constants(p, e) for e in law.switching], names)
    rows = trajectory_rows(p, traj)
    Y, status, errcode = prog.eval_many(rows)
    bad = np.nonzero(status >= 0)[0]
    if bad.size:
        k = int(bad[0])
        raise IntegrationError(
            f"switching function failed at node {k}: "
            + prog.error_text(status[k], errcode[k]), trajectory=traj)

    times: list[float] = []
    singular = False
    row = np.empty((1, rows.shape[1]))

    def sigma_at(c, tau, k):
        w = (tau - traj.t[k]) / (traj.t[k + 1] - traj.t[k])
        row[0] = (1.0 - w) * rows[k] + w * rows[k + 1]
        row[0, 0] = tau
        Yv, st, ec = prog.eval_many(row)
        if st[0] >= 0:
            raise IntegrationError(
                f"switching function failed during bisection at "
                f"t={tau:.6g}: " + prog.error_text(st[0], ec[0]),
                trajectory=traj)
        return float(Yv[0, c])

    for c in range(Y.shape[1]):
        sig = Y[:, c]
        if np.max(np.abs(sig)) <= singular_tol:
            singular = True
            continue
        for k in range(len(sig) - 1):
            if sig[k] == 0.0:
                times.append(float(traj.t[k]))
                continue
            if sig[k] * sig[k + 1] < 0.0:
                lo, hi = float(traj.t[k]), float(traj.t[k + 1])
                flo = float(sig[k])
                while hi - lo > refine_tol:
                    mid = 0.5 * (lo + hi)
                    fm = sigma_at(c, mid, k)
                    if fm == 0.0:
                        lo = hi = mid
                        break
                    if (flo < 0.0) == (fm < 0.0):
                        lo, flo = mid, fm
                    else:
                        hi = mid
                times.append(0.5 * (lo + hi))
        if sig[-1] == 0.0:
            times.append(float(traj.t[-1]))

    times.sort()
    merged: list[float] = []
    for ts in times:
        if not merged or ts - merged[-1] > 1e-9:
            merged.append(ts)
    return SwitchReport(times=tuple(merged), singular=singular, values=Y)


# -- shooting ---------------------------------------------------------------

@dataclass
class ShootResult:
    psi_a: np.ndarray
    trajectory: Trajectory
    residual_norm: float
    iterations: int


def shoot(p: ControlProblem, form: str, mult: Multipliers, law=None,
          steps: int = 100, x_a=None, target=None, psi_a0=None,
          tolerance: float = 1e-10, max_iterations: int = 50,
          fd_step: float = 1e-6) -> ShootResult:
    """Damped quasi-Newton on the initial costate so the terminal state
    hits the target: forward-difference sensitivities, halving line
    search, infinity-norm convergence test."""
    x_a = np.asarray(p.alpha if x_a is None else x_a, dtype=float) \
        if (x_a is not None or p.alpha is not None) else None
    if x_a is None:
        raise ValidationError("shooting needs an initial state "
                              "(problem alpha or explicit x_a)")
    beta = np.asarray(p.beta if target is None else target, dtype=float) \
        if (target is not None or p.beta is not None) else None
    if beta is None:
        raise ValidationError("shooting needs a target state "
                              "(problem beta or explicit target)")
    if x_a.shape != (p.n,) or beta.shape != (p.n,):
        raise ValidationError(f"boundary vectors must have shape ({p.n},)")
    psi = np.zeros(p.n) if psi_a0 is None else np.asarray(psi_a0, dtype=float)

    def residual(psi_a):
        traj = integrate_extremal(p, form, mult, x_a, psi_a, steps, law)
        return traj.x[-1] - beta, traj

    try:
        r0, traj = residual(psi)
    except IntegrationError as err:
        raise ShootingError(
            f"initial shot failed to integrate: {err}", psi_a=psi) from err
    rnorm = float(np.max(np.abs(r0)))
    if rnorm <= tolerance:
        return ShootResult(psi_a=psi, trajectory=traj, residual_norm=rnorm,
                           iterations=0)

    best = (psi.copy(), traj, rnorm)
    for it in range(1, max_iterations + 1):
        J = np.empty((p.n, p.n))
        for j in range(p.n):
            eps = fd_step * (1.0 + abs(psi[j]))
            bumped = psi.copy()
            bumped[j] += eps
            try:
                rj, _ = residual(bumped)
            except IntegrationError as err:
                raise ShootingError(
                    f"sensitivity evaluation failed at iteration {it}: {err}",
                    psi_a=best[0], residual_norm=best[2], iterations=it,
                    trajectory=best[1]) from err
            J[:, j] = (rj - r0) / eps
        try:
            step = np.linalg.solve(J, -r0)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(J, -r0, rcond=None)

        accepted = False
        alpha = 1.0
        for _ in range(25):
            cand = psi + alpha * step
            try:
                rc, traj_c = residual(cand)
            except IntegrationError:
                alpha *= 0.5
                continue
            cnorm = float(np.max(np.abs(rc)))
            if cnorm < rnorm:
                psi, r0, traj, rnorm = cand, rc, traj_c, cnorm
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            raise ShootingError(
                f"no residual decrease at iteration {it} "
                f"(best |residual| = {best[2]:.3e})",
                psi_a=best[0], residual_norm=best[2], iterations=it,
                trajectory=best[1])
        if rnorm < best[2]:
            best = (psi.copy(), traj, rnorm)
        if rnorm <= tolerance:
            return ShootResult(psi_a=psi, trajectory=traj,
                               residual_norm=rnorm, iterations=it)
    raise ShootingError(
        f"did not converge in {max_iterations} iterations "
        f"(best |residual| = {best[2]:.3e})",
        psi_a=best[0], residual_norm=best[2], iterations=max_iterations,
        trajectory=best[1])
