"""Shared problem builders and oracles for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from symoc import aircraft
from symoc import expr as ex
from symoc.extremal import AnalyticLaw
from symoc.model import ControlProblem
from symoc.symmetry import OneParamGroup


# -- reference problems -----------------------------------------------------

def lq_problem() -> ControlProblem:
    """Single integrator with quadratic effort cost: the closed-form
    extremal from x(0)=0 to x(1)=1 is u = 1, psi1 = 2."""
    return ControlProblem(n=1, r=1, a=0.0, b=1.0,
                          phi=(ex.parse("u1"),), L=(ex.parse("u1^2"),),
                          alpha=(0.0,), beta=(1.0,))


def lq_control() -> AnalyticLaw:
    """Maximizer of -u^2 + psi*u."""
    return AnalyticLaw(exprs=(ex.parse("psi1/2"),))


def oscillator_problem() -> ControlProblem:
    """Steered planar oscillator with a cubic radial restoring force.

    The nonlinearity makes the adjoint flow state-dependent, so RK4
    conservation errors actually scale like h^4 (a linear model would
    conserve the rotation law to rounding and hide the order).
    """
    r2 = "(x1^2 + x2^2)"
    return ControlProblem(
        n=4, r=2, a=0.0, b=1.0,
        phi=(ex.parse("x3"), ex.parse("x4"),
             ex.parse(f"-x1*{r2} + u1"), ex.parse(f"-x2*{r2} + u2")),
        L=(ex.parse("u1^2 + u2^2"),))


def oscillator_control() -> AnalyticLaw:
    """With psi0 = -1 the maximum condition gives u = (psi3/2, psi4/2)."""
    return AnalyticLaw(exprs=(ex.parse("psi3/2"), ex.parse("psi4/2")))


def rotation_group() -> OneParamGroup:
    """Simultaneous rotation of positions, velocities, and controls."""
    def rot(a: str, b: str) -> tuple[str, str]:
        return (f"cos(s)*{a} - sin(s)*{b}", f"sin(s)*{a} + cos(s)*{b}")

    x12 = rot("x1", "x2")
    x34 = rot("x3", "x4")
    u12 = rot("u1", "u2")
    return OneParamGroup(T=ex.parse("t"),
                        X=tuple(ex.parse(s) for s in x12 + x34),
                        U=tuple(ex.parse(s) for s in u12),
                        epsilon=1.0)


ROTATION_LAW = "psi1*(-x2) + psi2*x1 + psi3*(-x4) + psi4*x3"


def toy_nonautonomous() -> ControlProblem:
    """Explicitly time-dependent integrand on t in [1, 2]; the maximum
    condition with psi0 = -1 gives u = psi1/(2 t)."""
    return ControlProblem(n=1, r=1, a=1.0, b=2.0,
                          phi=(ex.parse("u1"),),
                          L=(ex.parse("t*u1^2 + x1^2"),))


def toy_control() -> AnalyticLaw:
    return AnalyticLaw(exprs=(ex.parse("psi1/(2*t)"),))


def corrupted_scaling_group() -> OneParamGroup:
    """The aircraft scaling map with the x4 exponent bumped from 2 to 3."""
    grp = aircraft.builtin_groups()[2]
    X = list(grp.X)
    X[3] = ex.parse("exp(3*s)*x4")
    return OneParamGroup(T=grp.T, X=tuple(X), U=grp.U, epsilon=grp.epsilon)


# -- random expressions with a guaranteed-safe domain -----------------------

_LEAF_CONSTS = (-2.0, -0.5, 0.5, 1.0, 2.0, 3.0)


def random_expr(rng: np.random.Generator, names, depth: int) -> ex.Expr:
    """Random smooth expression over ``names``.

    Arguments of ln/sqrt are shifted positive and divisors bounded away
    from zero, so any point with the variables in [-3, 3] evaluates
    without domain errors and with moderate magnitudes — which keeps
    central differences a valid oracle for the symbolic derivative.
    """
    if depth <= 0 or rng.random() < 0.22:
        if rng.random() < 0.75:
            return ex.var(str(rng.choice(names)))
        return ex.const(float(rng.choice(_LEAF_CONSTS)))
    kind = rng.choice(("add", "sub", "mul", "div", "pow", "neg",
                       "sin", "cos", "atan", "exp", "ln", "sqrt"))
    a = random_expr(rng, names, depth - 1)
    if kind == "add":
        return a + random_expr(rng, names, depth - 1)
    if kind == "sub":
        return a - random_expr(rng, names, depth - 1)
    if kind == "mul":
        return a * random_expr(rng, names, depth - 1)
    if kind == "div":
        b = random_expr(rng, names, depth - 1)
        return a / (ex.const(2.0) + b * b)
    if kind == "pow":
        return a ** ex.const(float(rng.integers(2, 4)))
    if kind == "neg":
        return -a
    if kind == "sin":
        return ex.sin(a)
    if kind == "cos":
        return ex.cos(a)
    if kind == "atan":
        return ex.atan(a)
    if kind == "exp":
        return ex.exp(ex.const(0.1) * a)
    if kind == "ln":
        return ex.ln(ex.const(1.5) + a * a)
    return ex.sqrt(ex.const(1.5) + a * a)


def central_difference(e: ex.Expr, env: dict, name: str, h: float) -> float:
    hi = dict(env, **{name: env[name] + h})
    lo = dict(env, **{name: env[name] - h})
    return (e.eval(hi) - e.eval(lo)) / (2.0 * h)


# -- brute-force dominance oracle -------------------------------------------

def brute_force_kept(costs, tol: float) -> list[bool]:
    """``kept[i]`` iff no other point strictly dominates point i."""
    def dom(p, q):
        return (all(pi <= qi + tol for pi, qi in zip(p, q))
                and any(pi < qi - tol for pi, qi in zip(p, q)))

    return [not any(dom(q, p) for j, q in enumerate(costs) if j != i)
            for i, p in enumerate(costs)]


# -- fixtures ---------------------------------------------------------------

@pytest.fixture(scope="session")
def air_problem():
    return aircraft.build_problem()


@pytest.fixture(scope="session")
def air_groups():
    return aircraft.builtin_groups()


@pytest.fixture(scope="session")
def air_config():
    return aircraft.sample_config()


@pytest.fixture(scope="session")
def air_control(air_problem):
    return aircraft.control_law_for_problem(air_problem)
