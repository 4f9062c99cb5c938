"""Control-problem data model, Hamiltonians and adjoint systems.

Two problem formulations share one container:

* scalar form ("p1"): one integral cost, optional isoperimetric
  constraints (integral of g equals / stays below a level xi), with the
  pseudo-Hamiltonian ``H = psi0*L + psi.phi + lambda.g``;
* vector form ("p"): N integral costs, no constraints, with
  ``H = lambda.L + psi.phi``.

Variables follow a fixed naming scheme: ``t``, states ``x1..xn``,
controls ``u1..ur``, group parameter ``s``, costate ``psi1..psin``,
``psi0`` and ``lambda1..lambdaN`` multipliers, plus user-declared
constants.  Control sets are per-component boxes.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

from . import expr as ex
from .expr import Expr

FORMS = ("p1", "p")

_NAME_RE = re.compile(r"^[a-zA-Z][a-zA-Z0-9]*$")
_RESERVED_RE = re.compile(r"^(t|s|x[0-9]+|u[0-9]+|psi[0-9]+|lambda[0-9]+)$")


class ValidationError(Exception):
    """Raised for structurally invalid problems, groups or multipliers."""


def x_names(n: int) -> tuple[str, ...]:
    return tuple(f"x{i}" for i in range(1, n + 1))


def u_names(r: int) -> tuple[str, ...]:
    return tuple(f"u{j}" for j in range(1, r + 1))


def psi_names(n: int) -> tuple[str, ...]:
    return tuple(f"psi{i}" for i in range(1, n + 1))


def lambda_names(count: int) -> tuple[str, ...]:
    return tuple(f"lambda{j}" for j in range(1, count + 1))


@dataclass(frozen=True)
class IsoConstraint:
    """Isoperimetric constraint: the integral of ``g`` over [a, b] is
    pinned to (kind "eq") or bounded by (kind "ineq") the level ``xi``."""

    g: Expr
    xi: float
    kind: str = "ineq"


@dataclass(frozen=True)
class ControlProblem:
    n: int
    r: int
    a: float
    b: float
    phi: tuple[Expr, ...]
    L: tuple[Expr, ...]
    constraints: tuple[IsoConstraint, ...] = ()
    omega: tuple[tuple[float | None, float | None], ...] = ()
    constants: dict[str, float] = field(default_factory=dict)
    alpha: tuple[float, ...] | None = None
    beta: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(self.phi))
        object.__setattr__(self, "L", tuple(self.L))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        omega = tuple(self.omega) if self.omega else tuple([None] * self.r)
        omega = tuple(
            (None, None) if w is None else (w[0], w[1]) for w in omega)
        object.__setattr__(self, "omega", omega)
        if self.alpha is not None:
            object.__setattr__(self, "alpha", tuple(float(v) for v in self.alpha))
        if self.beta is not None:
            object.__setattr__(self, "beta", tuple(float(v) for v in self.beta))
        _validate_problem(self)

    @property
    def N(self) -> int:
        return len(self.L)

    def state_vars(self) -> tuple[str, ...]:
        return x_names(self.n)

    def control_vars(self) -> tuple[str, ...]:
        return u_names(self.r)


def _validate_problem(p: ControlProblem):
    if p.n < 1:
        raise ValidationError("need at least one state (n >= 1)")
    if p.r < 1:
        raise ValidationError("need at least one control (r >= 1)")
    if not (math.isfinite(p.a) and math.isfinite(p.b) and p.b > p.a):
        raise ValidationError(f"bad time interval [{p.a}, {p.b}]")
    if len(p.phi) != p.n:
        raise ValidationError(f"phi has {len(p.phi)} components, expected n={p.n}")
    if len(p.L) < 1:
        raise ValidationError("need at least one cost integrand")
    if len(p.omega) != p.r:
        raise ValidationError(f"omega has {len(p.omega)} entries, expected r={p.r}")
    for j, (lo, hi) in enumerate(p.omega, start=1):
        if lo is not None and hi is not None and not lo <= hi:
            raise ValidationError(f"omega[{j}]: lo {lo} > hi {hi}")
    for which, vec in (("alpha", p.alpha), ("beta", p.beta)):
        if vec is not None and len(vec) != p.n:
            raise ValidationError(f"{which} has {len(vec)} entries, expected n={p.n}")
    for name in p.constants:
        if not _NAME_RE.match(name):
            raise ValidationError(f"constant name '{name}' does not match the grammar")
        if _RESERVED_RE.match(name) or name in ex.FUNCTIONS:
            raise ValidationError(f"constant name '{name}' is reserved")
    allowed = set(("t",) + x_names(p.n) + u_names(p.r)) | set(p.constants)
    for label, e in _problem_exprs(p):
        bad = sorted(e.variables() - allowed)
        if bad:
            raise ValidationError(f"{label} references unknown variable '{bad[0]}'")
    for c in p.constraints:
        if c.kind not in ("eq", "ineq"):
            raise ValidationError(f"constraint kind '{c.kind}' is not 'eq' or 'ineq'")
        if not math.isfinite(c.xi):
            raise ValidationError("constraint level xi must be finite")


def _problem_exprs(p: ControlProblem):
    for i, e in enumerate(p.phi, start=1):
        yield f"phi[{i}]", e
    for i, e in enumerate(p.L, start=1):
        yield f"L[{i}]", e
    for i, c in enumerate(p.constraints, start=1):
        yield f"constraints[{i}].g", c.g


def substitute_constants(p: ControlProblem, e: Expr) -> Expr:
    """Replace the problem's named constants with their values."""
    if not p.constants:
        return e
    return e.subst({k: ex.const(v) for k, v in p.constants.items()})


# -- multipliers ------------------------------------------------------------

@dataclass(frozen=True)
class Multipliers:
    """Constant multipliers attached to a trajectory: ``psi0`` (scalar
    form only) and the lambda vector (constraint multipliers in scalar
    form, cost multipliers in vector form)."""

    psi0: float | None
    lam: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lam", tuple(float(v) for v in self.lam))
        if self.psi0 is not None:
            object.__setattr__(self, "psi0", float(self.psi0))

    @classmethod
    def for_p1(cls, psi0: float, lam=()) -> "Multipliers":
        return cls(psi0=psi0, lam=tuple(lam))

    @classmethod
    def for_p(cls, lam) -> "Multipliers":
        return cls(psi0=None, lam=tuple(lam))


def validate_multipliers(p: ControlProblem, form: str, m: Multipliers):
    """Enforce the sign conventions of the maximality-based minimum
    principle: psi0 <= 0, and lambda <= 0 where the multiplier belongs to
    an inequality (scalar form) or to a cost (vector form)."""
    if form not in FORMS:
        raise ValidationError(f"unknown form '{form}'")
    if form == "p1":
        if m.psi0 is None:
            raise ValidationError("scalar form needs psi0")
        if not (math.isfinite(m.psi0) and m.psi0 <= 0.0):
            raise ValidationError(f"psi0 must be <= 0, got {m.psi0}")
        if len(m.lam) != len(p.constraints):
            raise ValidationError(
                f"expected {len(p.constraints)} constraint multipliers, got {len(m.lam)}")
        for lj, c in zip(m.lam, p.constraints):
            if not math.isfinite(lj):
                raise ValidationError("multipliers must be finite")
            if c.kind == "ineq" and lj > 0.0:
                raise ValidationError(
                    f"inequality multiplier must be <= 0, got {lj}")
    else:
        if m.psi0 is not None:
            raise ValidationError("vector form has no psi0")
        if len(m.lam) != p.N:
            raise ValidationError(
                f"expected {p.N} cost multipliers, got {len(m.lam)}")
        for lj in m.lam:
            if not (math.isfinite(lj) and lj <= 0.0):
                raise ValidationError(f"cost multipliers must be <= 0, got {lj}")


def multiplier_names(p: ControlProblem, form: str) -> tuple[str, ...]:
    if form == "p1":
        return ("psi0",) + lambda_names(len(p.constraints))
    return lambda_names(p.N)


def multiplier_values(p: ControlProblem, form: str, m: Multipliers) -> tuple[float, ...]:
    if form == "p1":
        return (m.psi0,) + m.lam
    return m.lam


def dynamics_input_names(p: ControlProblem, form: str) -> tuple[str, ...]:
    """Canonical slot order for along-trajectory evaluation."""
    return (("t",) + x_names(p.n) + u_names(p.r) + psi_names(p.n)
            + multiplier_names(p, form))


def check_input_names(p: ControlProblem) -> tuple[str, ...]:
    """Canonical slot order for pointwise invariance checks."""
    return ("t",) + x_names(p.n) + u_names(p.r) + ("s",)


# -- Hamiltonians -----------------------------------------------------------

@dataclass(frozen=True)
class Hamiltonian:
    expr: Expr
    form: str
    input_names: tuple[str, ...]

    def __str__(self) -> str:
        return str(self.expr)


def build_hamiltonian_p1(p: ControlProblem) -> Hamiltonian:
    """Scalar-form pseudo-Hamiltonian ``psi0*L + psi.phi + lambda.g``."""
    if p.N != 1:
        raise ValidationError(
            f"scalar form needs exactly one cost integrand, problem has {p.N}")
    h = ex.var("psi0") * p.L[0]
    for name, f in zip(psi_names(p.n), p.phi):
        h = h + ex.var(name) * f
    for name, c in zip(lambda_names(len(p.constraints)), p.constraints):
        h = h + ex.var(name) * c.g
    return Hamiltonian(expr=h.simplify(), form="p1",
                       input_names=dynamics_input_names(p, "p1"))


def build_hamiltonian_p(p: ControlProblem) -> Hamiltonian:
    """Vector-form Hamiltonian ``lambda.L + psi.phi`` (no constraints)."""
    if p.constraints:
        raise ValidationError("vector form does not take constraints")
    h = None
    for name, f in zip(lambda_names(p.N), p.L):
        term = ex.var(name) * f
        h = term if h is None else h + term
    for name, f in zip(psi_names(p.n), p.phi):
        h = h + ex.var(name) * f
    return Hamiltonian(expr=h.simplify(), form="p",
                       input_names=dynamics_input_names(p, "p"))


def build_hamiltonian(p: ControlProblem, form: str) -> Hamiltonian:
    if form == "p1":
        return build_hamiltonian_p1(p)
    if form == "p":
        return build_hamiltonian_p(p)
    raise ValidationError(f"unknown form '{form}'")


def adjoint_rhs(p: ControlProblem, h: Hamiltonian) -> tuple[Expr, ...]:
    """Costate dynamics ``psidot_i = -dH/dx_i``, simplified."""
    return tuple((-h.expr.diff(name)).simplify() for name in x_names(p.n))


def hamiltonian_dt(h: Hamiltonian) -> Expr:
    """Explicit time derivative ``dH/dt`` (partial), simplified."""
    return h.expr.diff("t").simplify()


# -- JSON problem format ----------------------------------------------------

def problem_to_dict(p: ControlProblem) -> dict:
    d: dict = {
        "n": p.n,
        "r": p.r,
        "N": p.N,
        "a": p.a,
        "b": p.b,
        "constants": dict(p.constants),
        "phi": [str(e) for e in p.phi],
        "L": [str(e) for e in p.L],
        "constraints": [
            {"g": str(c.g), "xi": c.xi, "kind": c.kind} for c in p.constraints
        ],
        "omega": [
            None if lo is None and hi is None
            else {k: v for k, v in (("lo", lo), ("hi", hi)) if v is not None}
            for lo, hi in p.omega
        ],
    }
    if p.alpha is not None:
        d["alpha"] = list(p.alpha)
    if p.beta is not None:
        d["beta"] = list(p.beta)
    return d


def problem_from_dict(d: dict) -> ControlProblem:
    try:
        n = int(d["n"])
        r = int(d["r"])
        a = float(d["a"])
        b = float(d["b"])
        phi = tuple(ex.parse(s) for s in d["phi"])
        L = tuple(ex.parse(s) for s in d["L"])
    except KeyError as k:
        raise ValidationError(f"problem file is missing key {k}") from None
    except ex.ParseError as pe:
        raise ValidationError(f"bad expression in problem file: {pe}") from None
    constraints = tuple(
        IsoConstraint(g=ex.parse(c["g"]), xi=float(c["xi"]),
                      kind=str(c.get("kind", "ineq")))
        for c in d.get("constraints", ()))
    omega = []
    for w in d.get("omega", [None] * r):
        if w is None:
            omega.append((None, None))
        else:
            omega.append((
                float(w["lo"]) if w.get("lo") is not None else None,
                float(w["hi"]) if w.get("hi") is not None else None,
            ))
    constants = {str(k): float(v) for k, v in d.get("constants", {}).items()}
    alpha = d.get("alpha")
    beta = d.get("beta")
    p = ControlProblem(
        n=n, r=r, a=a, b=b, phi=phi, L=L, constraints=constraints,
        omega=tuple(omega), constants=constants,
        alpha=tuple(alpha) if alpha is not None else None,
        beta=tuple(beta) if beta is not None else None,
    )
    if "N" in d and int(d["N"]) != p.N:
        raise ValidationError(
            f"problem file says N={d['N']} but lists {p.N} cost integrands")
    return p


def load_problem(path) -> ControlProblem:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as je:
            raise ValidationError(f"{path}: not valid JSON ({je})") from None
    return problem_from_dict(d)


def save_problem(p: ControlProblem, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(problem_to_dict(p), fh, indent=2, sort_keys=True)
        fh.write("\n")
