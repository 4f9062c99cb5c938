"""Vector-cost problems: scalarization, multiplier sweeps, dominance.

``scalarize`` turns a vector-cost problem into a scalar one whose extra
isoperimetric inequality constraints pin the remaining costs at a
reference outcome.  ``sweep`` integrates one extremal per multiplier
vector on the simplex ``{lambda <= 0, sum |lambda_j| = 1}`` and computes
all cost integrals by composite Simpson quadrature on the integration
grid.  ``filter_dominated`` keeps the outcomes no other outcome strictly
improves; points with identical costs all survive.  The sweep output is
labeled what it is — extremal outcomes, dominance-filtered — since the
underlying conditions are necessary, not sufficient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from .extremal import (IntegrationError, Trajectory, evaluate_on_trajectory,
                       integrate_extremal)
from .model import (ControlProblem, IsoConstraint, Multipliers,
                    ValidationError)

DOMINANCE_TOL = 1e-9


# -- scalarization ----------------------------------------------------------

def scalarize(p: ControlProblem, index: int, reference) -> ControlProblem:
    """Scalar-form problem: minimize cost ``index`` subject to the other
    costs staying at or below their reference levels."""
    if p.constraints:
        raise ValidationError("can only scalarize a constraint-free problem")
    if p.N < 2:
        raise ValidationError("nothing to scalarize: problem has one cost")
    if not 1 <= index <= p.N:
        raise ValidationError(
            f"cost index {index} out of range 1..{p.N}")
    levels = _reference_costs(reference, p.N)
    constraints = tuple(
        IsoConstraint(g=p.L[j], xi=levels[j], kind="ineq")
        for j in range(p.N) if j != index - 1)
    return ControlProblem(
        n=p.n, r=p.r, a=p.a, b=p.b, phi=p.phi, L=(p.L[index - 1],),
        constraints=constraints, omega=p.omega, constants=dict(p.constants),
        alpha=p.alpha, beta=p.beta)


def _reference_costs(reference, N: int):
    costs = getattr(reference, "costs", reference)
    if costs is None:
        raise ValidationError("reference outcome has no costs")
    vals = tuple(float(v) for v in costs)
    if len(vals) != N:
        raise ValidationError(
            f"reference has {len(vals)} costs, expected {N}")
    return vals


def map_multipliers(p: ControlProblem, index: int,
                    m: Multipliers) -> Multipliers:
    """Translate scalarized-problem multipliers (psi0 and one lambda per
    retained cost) back to vector-form multipliers of the original
    problem, with psi0 landing in slot ``index``."""
    if m.psi0 is None:
        raise ValidationError("expected scalar-form multipliers (with psi0)")
    if len(m.lam) != p.N - 1:
        raise ValidationError(
            f"expected {p.N - 1} constraint multipliers, got {len(m.lam)}")
    lam = list(m.lam)
    lam.insert(index - 1, m.psi0)
    return Multipliers.for_p(lam)


# -- multiplier grids -------------------------------------------------------

def simplex_grid(N: int, count: int) -> tuple[tuple[float, ...], ...]:
    """Deterministic lattice on ``{lambda <= 0, sum |lambda_j| = 1}``:
    all sign-flipped compositions of ``count - 1`` into N parts, in
    lexicographic order.  For N = 2 this is ``count`` evenly spaced
    points."""
    if N < 1:
        raise ValidationError("need at least one cost")
    if count < 2:
        raise ValidationError("need a grid of at least 2 points")
    q = count - 1
    out = []
    for bars in combinations_with_replacement(range(N), q):
        k = [0] * N
        for b in bars:
            k[b] += 1
        out.append(tuple(-ki / q for ki in k))
    out.sort()
    return tuple(out)


# -- sweep ------------------------------------------------------------------

@dataclass
class OutcomePoint:
    lam: tuple[float, ...]
    costs: tuple[float, ...] | None
    trajectory: Trajectory | None
    failure: str = ""

    @property
    def ok(self) -> bool:
        return self.failure == ""


def simpson_integrals(p: ControlProblem, traj: Trajectory) -> tuple[float, ...]:
    """Composite Simpson of every cost integrand on the trajectory grid
    (needs an even step count).  Computed as
    ``(b - a) * (sum w_k L_k) / (3 m)`` so a constant integrand
    integrates exactly."""
    m = traj.steps
    if m % 2 != 0:
        raise ValidationError("Simpson quadrature needs an even step count")
    vals = evaluate_on_trajectory(p, traj, p.L)
    w = np.ones(m + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    span = float(traj.t[-1] - traj.t[0])
    return tuple(float(span * (w @ vals[:, i]) / (3.0 * m))
                 for i in range(vals.shape[1]))


def sweep(p: ControlProblem, x_a, psi_a, lam_grid, steps: int,
          law=None) -> list[OutcomePoint]:
    """One extremal per multiplier vector; failures are recorded and the
    sweep continues.  ``psi_a`` may be a vector (reused for every point)
    or a callable ``lam -> psi_a``."""
    if not lam_grid:
        raise ValidationError("empty multiplier grid")
    if p.constraints:
        raise ValidationError("sweep needs a constraint-free problem")
    if steps % 2 != 0:
        steps += 1
    points: list[OutcomePoint] = []
    for lam in lam_grid:
        psi0 = psi_a(lam) if callable(psi_a) else psi_a
        try:
            mult = Multipliers.for_p(lam)
            traj = integrate_extremal(p, "p", mult, x_a, psi0, steps, law)
            costs = simpson_integrals(p, traj)
            points.append(OutcomePoint(lam=tuple(lam), costs=costs,
                                       trajectory=traj))
        except (IntegrationError, ValidationError) as err:
            points.append(OutcomePoint(lam=tuple(lam), costs=None,
                                       trajectory=None, failure=str(err)))
    return points


# -- dominance --------------------------------------------------------------

def dominates(a, b, tol: float = DOMINANCE_TOL) -> bool:
    """Minimization dominance: a is nowhere worse (within tol) and
    strictly better (beyond tol) somewhere."""
    a = tuple(a)
    b = tuple(b)
    if len(a) != len(b):
        raise ValidationError("cost vectors of different lengths")
    return all(ai <= bi + tol for ai, bi in zip(a, b)) and \
        any(ai < bi - tol for ai, bi in zip(a, b))


def filter_dominated(points, tol: float = DOMINANCE_TOL):
    """Keep the points no other point dominates; order preserved,
    duplicate cost vectors all kept."""
    pts = list(points)
    costs = []
    for q in pts:
        c = getattr(q, "costs", q)
        if c is None:
            raise ValidationError(
                "cannot dominance-filter a failed outcome point")
        c = tuple(float(v) for v in c)
        if costs and len(c) != len(costs[0]):
            raise ValidationError("outcome points of mixed cost dimension")
        costs.append(c)
    kept = []
    for i, q in enumerate(pts):
        if not any(dominates(costs[j], costs[i], tol)
                   for j in range(len(pts)) if j != i):
            kept.append(q)
    return kept


def write_sweep_csv(points, kept_flags, fh, header_lines=()):
    """CSV: one row per sweep point with its multipliers, costs, kept
    flag, and failure text; 17-significant-digit floats."""
    if len(kept_flags) != len(points):
        raise ValidationError("kept flags do not match points")
    for line in header_lines:
        fh.write(f"# {line}\n")
    if points:
        N = len(points[0].lam)
    else:
        N = 0
    cols = [f"lambda{j}" for j in range(1, N + 1)]
    cols += [f"I{j}" for j in range(1, N + 1)]
    cols += ["kept", "failure"]
    fh.write(",".join(cols) + "\n")
    for pt, kept in zip(points, kept_flags):
        row = ["%.17g" % v for v in pt.lam]
        if pt.costs is None:
            row += [""] * N
        else:
            row += ["%.17g" % v for v in pt.costs]
        row.append("1" if kept else "0")
        failure = pt.failure.replace("\n", " ").replace(",", ";")
        row.append(failure)
        fh.write(",".join(row) + "\n")
