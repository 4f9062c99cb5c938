"""One-parameter transformation groups and invariance checking.

A group ``h^s`` maps ``(t, x, u)`` to ``(T, X, U)`` with ``h^0`` the
identity.  Two checkers are provided:

* the finite-parameter check evaluates the exact invariance residuals

  - ``L_j - (L_j o h^s) * dT/dt``
  - ``d/dt X_i - (phi_i o h^s) * dT/dt``
  - ``g_j - (g_j o h^s) * dT/dt``  (scalar form)

  at low-discrepancy samples of a user box in ``(t, x, u, s)``;

* the infinitesimal check evaluates the same conditions linearized at
  ``s = 0``, using only the group generator ``(tau, xi, upsilon)``.

Total time derivatives are taken along trajectories of the dynamics
(``d/dt e = e_t + e_x . phi + e_u . uDot``); a group whose ``T`` or ``X``
references a control must declare ``uDot``.  Residuals are normalized by
``1 + |anchor|`` where the anchor is the transformed right-hand side
(finite check) or the condition's leading magnitude (infinitesimal
check).  Control bounds are ignored by these pointwise checks; reports
say so.  The identity-at-zero property and evaluability in ``s`` are
enforced before any sampling runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .expr import Expr
from ._core import compile_program
from .model import (ControlProblem, ValidationError, check_input_names,
                    substitute_constants, u_names, x_names)
from .sampling import sample_box

_IGNORED_OMEGA_NOTE = "control bounds (omega) are ignored by pointwise checks"


@dataclass(frozen=True)
class OneParamGroup:
    """Transformation ``(T, X, U)`` in variables (t, x, u, s), valid for
    the parameter ``s`` in (-epsilon, epsilon)."""

    T: Expr
    X: tuple[Expr, ...]
    U: tuple[Expr, ...]
    epsilon: float = 0.5
    u_dot: tuple[Expr, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "X", tuple(self.X))
        object.__setattr__(self, "U", tuple(self.U))
        if self.u_dot is not None:
            object.__setattr__(self, "u_dot", tuple(self.u_dot))


@dataclass(frozen=True)
class Generator:
    """Infinitesimal generator: s-derivatives of (T, X, U) at s = 0."""

    tau: Expr
    xi: tuple[Expr, ...]
    upsilon: tuple[Expr, ...]


@dataclass(frozen=True)
class SampleConfig:
    """Sampling box and tolerances for the checkers.

    ``intervals`` maps variable names to (lo, hi); the key "default"
    covers any variable without its own entry.  An "s" entry overrides
    the group's (-epsilon, epsilon) range.
    """

    intervals: dict[str, tuple[float, float]] = field(default_factory=dict)
    samples: int = 1000
    seed: int = 0
    tolerance: float = 1e-9
    skip_domain_errors: bool = False

    def interval(self, name: str, fallback: tuple[float, float] | None = None):
        iv = self.intervals.get(name) or self.intervals.get("default") or fallback
        if iv is None:
            raise ValidationError(f"no sample interval for '{name}' "
                                  f"(add it or a 'default' entry)")
        lo, hi = float(iv[0]), float(iv[1])
        if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
            raise ValidationError(f"bad sample interval for '{name}': [{lo}, {hi}]")
        return lo, hi


@dataclass
class ConditionResult:
    label: str
    worst: float
    sample: dict[str, float] | None
    passed: bool


@dataclass
class InvarianceReport:
    kind: str
    conditions: list[ConditionResult]
    samples: int
    skipped: int
    domain_errors: list[tuple[dict[str, float], str]]
    tolerance: float
    passed: bool
    notes: tuple[str, ...] = ()

    def worst(self) -> float:
        vals = [c.worst for c in self.conditions]
        return max(vals) if vals else 0.0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "passed": self.passed,
            "tolerance": self.tolerance,
            "samples": self.samples,
            "skipped": self.skipped,
            "worst": self.worst(),
            "conditions": [
                {"label": c.label, "worst": c.worst, "passed": c.passed,
                 "sample": c.sample}
                for c in self.conditions
            ],
            "domain_errors": [
                {"sample": s, "error": msg} for s, msg in self.domain_errors
            ],
            "notes": list(self.notes),
        }


# -- structure and group validation ----------------------------------------

def validate_group(p: ControlProblem, grp: OneParamGroup):
    """Shape and variable checks; no sampling."""
    if len(grp.X) != p.n:
        raise ValidationError(f"group has {len(grp.X)} state maps, expected n={p.n}")
    if len(grp.U) != p.r:
        raise ValidationError(f"group has {len(grp.U)} control maps, expected r={p.r}")
    if not (math.isfinite(grp.epsilon) and grp.epsilon > 0.0):
        raise ValidationError(f"epsilon must be positive, got {grp.epsilon}")
    allowed = set(("t", "s") + x_names(p.n) + u_names(p.r)) | set(p.constants)
    for label, e in _group_exprs(grp):
        bad = sorted(e.variables() - allowed)
        if bad:
            raise ValidationError(f"{label} references unknown variable '{bad[0]}'")
    if grp.u_dot is not None:
        if len(grp.u_dot) != p.r:
            raise ValidationError(
                f"uDot has {len(grp.u_dot)} components, expected r={p.r}")
        allowed_ud = allowed - {"s"}
        for j, e in enumerate(grp.u_dot, start=1):
            bad = sorted(e.variables() - allowed_ud)
            if bad:
                raise ValidationError(
                    f"uDot[{j}] references unknown variable '{bad[0]}'")


def _group_exprs(grp: OneParamGroup):
    yield "T", grp.T
    for i, e in enumerate(grp.X, start=1):
        yield f"X[{i}]", e
    for j, e in enumerate(grp.U, start=1):
        yield f"U[{j}]", e


def _check_box(p: ControlProblem, grp: OneParamGroup, cfg: SampleConfig):
    """Bounds for the (t, x..., u..., s) sample columns."""
    names = check_input_names(p)
    s_range = (-grp.epsilon, grp.epsilon)
    return names, [cfg.interval(nm, s_range if nm == "s" else None)
                   for nm in names]


def verify_identity_at_zero(p: ControlProblem, grp: OneParamGroup,
                            cfg: SampleConfig | None = None,
                            n: int = 100, tol: float = 1e-12,
                            seed: int = 7):
    """Check ``h^0 = id`` numerically; raises ValidationError on failure.

    Sample points come from the config box (with s fixed at 0) when one
    is given, else from [-1, 1] per variable.
    """
    validate_group(p, grp)
    zero = {"s": ex.const(0.0)}
    exprs = [grp.T.subst(zero) - ex.var("t")]
    exprs += [Xi.subst(zero) - ex.var(nm) for Xi, nm in zip(grp.X, x_names(p.n))]
    exprs += [Uj.subst(zero) - ex.var(nm) for Uj, nm in zip(grp.U, u_names(p.r))]
    names = ("t",) + x_names(p.n) + u_names(p.r)
    prog = compile_program([substitute_constants(p, e.simplify()) for e in exprs],
                           names)
    if cfg is not None:
        bounds = [cfg.interval(nm, (-1.0, 1.0)) for nm in names]
    else:
        bounds = [(-1.0, 1.0)] * len(names)
    X = sample_box(bounds, 8 * n, seed)
    Y, status, _ = prog.eval_many(X)
    ok = status == -1
    if ok.sum() < n:
        raise ValidationError(
            "identity-at-zero check could not evaluate the group on the sample box")
    worst_rows = np.abs(Y[ok][:n])
    worst = float(worst_rows.max()) if worst_rows.size else 0.0
    if worst > tol:
        flat = int(np.argmax(worst_rows))
        which = flat % worst_rows.shape[1]
        labels = ["T"] + [f"X[{i}]" for i in range(1, p.n + 1)] + \
                 [f"U[{j}]" for j in range(1, p.r + 1)]
        raise ValidationError(
            f"group is not the identity at s=0: {labels[which]} deviates "
            f"by {worst:.3e} (tolerance {tol:.1e})")


def _verify_s_evaluability(p: ControlProblem, grp: OneParamGroup,
                           cfg: SampleConfig, points: int = 8):
    """Smoothness sanity: the group must evaluate at sampled (t, x, u)
    across an s-grid spanning its declared range."""
    names, bounds = _check_box(p, grp, cfg)
    exprs = [substitute_constants(p, e) for _, e in _group_exprs(grp)]
    prog = compile_program(exprs, names)
    base = sample_box(bounds[:-1], points, cfg.seed + 1)
    s_grid = np.linspace(-0.9 * grp.epsilon, 0.9 * grp.epsilon, 7)
    rows = np.empty((points * len(s_grid), len(names)))
    k = 0
    for i in range(points):
        for s in s_grid:
            rows[k, :-1] = base[i]
            rows[k, -1] = s
            k += 1
    _, status, errcode = prog.eval_many(rows)
    bad = np.nonzero(status >= 0)[0]
    if bad.size:
        b = int(bad[0])
        raise ValidationError(
            "group is not evaluable across its s-range on the sample box: "
            + prog.error_text(status[b], errcode[b]))


def verify_group(p: ControlProblem, grp: OneParamGroup, cfg: SampleConfig):
    """All pre-check gates: structure, identity at zero, s-evaluability."""
    validate_group(p, grp)
    verify_identity_at_zero(p, grp, cfg)
    _verify_s_evaluability(p, grp, cfg)


# -- generator and total derivatives ---------------------------------------

def generator(p: ControlProblem, grp: OneParamGroup) -> Generator:
    """Differentiate the group in s at s = 0."""
    validate_group(p, grp)
    zero = {"s": ex.const(0.0)}

    def d0(e: Expr) -> Expr:
        out = e.diff("s").subst(zero).simplify()
        assert "s" not in out.variables()
        return out

    return Generator(
        tau=d0(grp.T),
        xi=tuple(d0(Xi) for Xi in grp.X),
        upsilon=tuple(d0(Uj) for Uj in grp.U),
    )


def total_time_derivative(e: Expr, p: ControlProblem,
                          u_dot: tuple[Expr, ...] | None = None) -> Expr:
    """``d/dt e`` along trajectories: ``e_t + e_x . phi + e_u . uDot``.

    Raises ValidationError if ``e`` depends on a control and no ``uDot``
    was declared.
    """
    terms = [e.diff("t").simplify()]
    for nm, f in zip(x_names(p.n), p.phi):
        d = e.diff(nm).simplify()
        if not _is_zero(d):
            terms.append((d * f).simplify())
    for j, nm in enumerate(u_names(p.r)):
        d = e.diff(nm).simplify()
        if _is_zero(d):
            continue
        if u_dot is None:
            raise ValidationError(
                f"'{e}' references {nm}; declare uDot to take its time derivative")
        terms.append((d * u_dot[j]).simplify())
    out = terms[0]
    for term in terms[1:]:
        out = out + term
    return out.simplify()


def _is_zero(e: Expr) -> bool:
    return e.kind == "const" and e.value == 0.0


# -- checkers ---------------------------------------------------------------

def check_invariance_p(p: ControlProblem, grp: OneParamGroup,
                       cfg: SampleConfig) -> InvarianceReport:
    """Finite-parameter invariance for the vector (multiobjective) form:
    all cost conditions plus all dynamics conditions."""
    if p.constraints:
        raise ValidationError("vector-form check does not take constraints; "
                              "use the scalar-form check")
    conditions = _finite_conditions(p, grp, include_constraints=False)
    return _run_sampled_check(p, grp, cfg, conditions, kind="invariance-p")


def check_invariance_p1(p: ControlProblem, grp: OneParamGroup,
                        cfg: SampleConfig) -> InvarianceReport:
    """Finite-parameter invariance for the scalar form: the cost
    condition, one condition per isoperimetric integrand, and the
    dynamics conditions."""
    if p.N != 1:
        raise ValidationError(
            f"scalar-form check needs exactly one cost integrand, problem has {p.N}")
    conditions = _finite_conditions(p, grp, include_constraints=True)
    return _run_sampled_check(p, grp, cfg, conditions, kind="invariance-p1")


def check_infinitesimal(p: ControlProblem, grp: OneParamGroup,
                        cfg: SampleConfig) -> InvarianceReport:
    """Linearized (s -> 0) invariance conditions from the generator only."""
    gen = generator(p, grp)
    dtau = total_time_derivative(gen.tau, p, grp.u_dot)

    def lie(e: Expr) -> Expr:
        out = (e.diff("t").simplify() * gen.tau).simplify()
        for nm, xi_i in zip(x_names(p.n), gen.xi):
            out = out + (e.diff(nm).simplify() * xi_i)
        for nm, up_j in zip(u_names(p.r), gen.upsilon):
            out = out + (e.diff(nm).simplify() * up_j)
        return (out + e * dtau).simplify()

    conditions = []
    for j, L in enumerate(p.L, start=1):
        conditions.append((f"L[{j}]", lie(L), L))
    for j, c in enumerate(p.constraints, start=1):
        conditions.append((f"g[{j}]", lie(c.g), c.g))
    for i, (nm, f) in enumerate(zip(x_names(p.n), p.phi), start=1):
        dxi = total_time_derivative(gen.xi[i - 1], p, grp.u_dot)
        res = (lie(f) - dxi).simplify()
        conditions.append((f"X[{i}]", res, dxi))
    return _run_sampled_check(p, grp, cfg, conditions, kind="infinitesimal")


def _finite_conditions(p: ControlProblem, grp: OneParamGroup,
                       include_constraints: bool):
    sub: dict[str, Expr] = {"t": grp.T}
    sub.update({nm: Xi for nm, Xi in zip(x_names(p.n), grp.X)})
    sub.update({nm: Uj for nm, Uj in zip(u_names(p.r), grp.U)})
    dT = total_time_derivative(grp.T, p, grp.u_dot)

    conditions = []
    for j, L in enumerate(p.L, start=1):
        rhs = (L.subst(sub) * dT).simplify()
        conditions.append((f"L[{j}]", (L - rhs).simplify(), rhs))
    if include_constraints:
        for j, c in enumerate(p.constraints, start=1):
            rhs = (c.g.subst(sub) * dT).simplify()
            conditions.append((f"g[{j}]", (c.g - rhs).simplify(), rhs))
    for i, (Xi, f) in enumerate(zip(grp.X, p.phi), start=1):
        dX = total_time_derivative(Xi, p, grp.u_dot)
        rhs = (f.subst(sub) * dT).simplify()
        conditions.append((f"X[{i}]", (dX - rhs).simplify(), rhs))
    return conditions


def _run_sampled_check(p: ControlProblem, grp: OneParamGroup,
                       cfg: SampleConfig, conditions,
                       kind: str) -> InvarianceReport:
    verify_group(p, grp, cfg)
    names, bounds = _check_box(p, grp, cfg)
    flat: list[Expr] = []
    for _, res, scale in conditions:
        flat.append(substitute_constants(p, res))
        flat.append(substitute_constants(p, scale))
    prog = compile_program(flat, names)
    X = sample_box(bounds, cfg.samples, cfg.seed)
    Y, status, errcode = prog.eval_many(X)
    ok = status == -1

    domain_errors: list[tuple[dict[str, float], str]] = []
    for row in np.nonzero(~ok)[0][:5]:
        sample = {nm: float(v) for nm, v in zip(names, X[row])}
        domain_errors.append((sample, prog.error_text(status[row], errcode[row])))
    n_bad = int((~ok).sum())

    results: list[ConditionResult] = []
    for c, (label, _, _) in enumerate(conditions):
        if ok.any():
            res = np.abs(Y[ok, 2 * c])
            scale = np.abs(Y[ok, 2 * c + 1])
            norm = res / (1.0 + scale)
            w = int(np.argmax(norm))
            worst = float(norm[w])
            sample_row = X[ok][w]
            sample = {nm: float(v) for nm, v in zip(names, sample_row)}
        else:
            worst, sample = math.inf, None
        results.append(ConditionResult(label=label, worst=worst, sample=sample,
                                       passed=worst <= cfg.tolerance))

    passed = all(c.passed for c in results)
    if n_bad and not cfg.skip_domain_errors:
        passed = False
    notes = [_IGNORED_OMEGA_NOTE]
    if n_bad and cfg.skip_domain_errors:
        notes.append(f"{n_bad} sample(s) skipped on domain errors")
    return InvarianceReport(
        kind=kind, conditions=results, samples=cfg.samples, skipped=n_bad,
        domain_errors=domain_errors, tolerance=cfg.tolerance, passed=passed,
        notes=tuple(notes),
    )


# -- serialization ----------------------------------------------------------

def group_to_dict(grp: OneParamGroup) -> dict:
    d = {
        "T": str(grp.T),
        "X": [str(e) for e in grp.X],
        "U": [str(e) for e in grp.U],
        "epsilon": grp.epsilon,
    }
    if grp.u_dot is not None:
        d["uDot"] = [str(e) for e in grp.u_dot]
    return d


def group_from_dict(d: dict) -> OneParamGroup:
    try:
        return OneParamGroup(
            T=ex.parse(d["T"]),
            X=tuple(ex.parse(s) for s in d["X"]),
            U=tuple(ex.parse(s) for s in d["U"]),
            epsilon=float(d.get("epsilon", 0.5)),
            u_dot=tuple(ex.parse(s) for s in d["uDot"]) if "uDot" in d else None,
        )
    except KeyError as k:
        raise ValidationError(f"group file is missing key {k}") from None
    except ex.ParseError as pe:
        raise ValidationError(f"bad expression in group file: {pe}") from None


def load_group(path) -> OneParamGroup:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as je:
            raise ValidationError(f"{path}: not valid JSON ({je})") from None
    return group_from_dict(d)


def save_group(grp: OneParamGroup, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(group_to_dict(grp), fh, indent=2, sort_keys=True)
        fh.write("\n")


def sample_config_to_dict(cfg: SampleConfig) -> dict:
    return {
        "intervals": {k: [v[0], v[1]] for k, v in cfg.intervals.items()},
        "samples": cfg.samples,
        "seed": cfg.seed,
        "tolerance": cfg.tolerance,
        "skip_domain_errors": cfg.skip_domain_errors,
    }


def sample_config_from_dict(d: dict) -> SampleConfig:
    intervals = {str(k): (float(v[0]), float(v[1]))
                 for k, v in d.get("intervals", {}).items()}
    return SampleConfig(
        intervals=intervals,
        samples=int(d.get("samples", 1000)),
        seed=int(d.get("seed", 0)),
        tolerance=float(d.get("tolerance", 1e-9)),
        skip_domain_errors=bool(d.get("skip_domain_errors", False)),
    )


def load_sample_config(path) -> SampleConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as je:
            raise ValidationError(f"{path}: not valid JSON ({je})") from None
    return sample_config_from_dict(d)


def default_sample_config(p: ControlProblem, grp: OneParamGroup,
                          samples: int = 1000, seed: int = 0,
                          tolerance: float = 1e-9) -> SampleConfig:
    """Derived box when the user supplies none: t spans [a, b], states
    span [-5, 5], controls their bounds clipped to [-5, 5], s the group's
    declared range."""
    intervals: dict[str, tuple[float, float]] = {"t": (p.a, p.b)}
    for nm in x_names(p.n):
        intervals[nm] = (-5.0, 5.0)
    for nm, (lo, hi) in zip(u_names(p.r), p.omega):
        intervals[nm] = (max(lo, -5.0) if lo is not None else -5.0,
                         min(hi, 5.0) if hi is not None else 5.0)
    intervals["s"] = (-grp.epsilon, grp.epsilon)
    return SampleConfig(intervals=intervals, samples=samples, seed=seed,
                        tolerance=tolerance)
