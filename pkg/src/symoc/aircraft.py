"""Built-in planar aircraft model: fuel-vs-time vector cost, symmetry
groups, and the closed-form Hamiltonian maximizer.

State: horizontal/vertical position (x1, x2), velocities (x3, x4), fuel
mass x5 (must stay positive — every thrust term divides by it).
Controls: throttle u1 in [0, u1_max] and thrust angle u2, kept strictly
inside (-pi/2, pi/2) so tan(u2) is defined.  Dynamics::

    x1' = x3            x3' = c1*u1/x5*cos(u2)
    x2' = x4            x4' = c1*u1/x5*sin(u2) - c2
    x5' = -u1

with cost integrands L1 = u1 (fuel) and L2 = 1 (flight time).  The
numeric constants are tool defaults, not physical data.

Three candidate transformation groups ship with the model: translations
of x1 and of x2, and a planar scaling that stretches positions and
velocities while remapping the thrust angle through atan(exp(s)*tan u2).
Note: the two translations verify cleanly, but the scaling map does not
satisfy the invariance conditions for these dynamics — the checkers
report O(1) residuals on the x3 and x4 conditions, and its candidate law
psi1*x1 + 2*psi2*x2 + psi3*x3 + 2*psi4*x4 drifts along thrusting
extremals.  It is kept as shipped so the checkers have a nontrivial
negative to report on; see the README for the residual structure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from . import expr as ex
from .extremal import AnalyticLaw, GridSearchLaw, IntegrationError, maximize_h
from .model import (ControlProblem, Multipliers, ValidationError,
                    save_problem)
from .symmetry import (OneParamGroup, SampleConfig, save_group,
                       sample_config_to_dict)

_DYNAMICS = ("x3", "x4", "c1*u1/x5*cos(u2)", "c1*u1/x5*sin(u2) - c2", "-u1")
_SWITCHING = "lambda1 + c1*sqrt(psi3^2 + psi4^2)/x5 - psi5"


@dataclass(frozen=True)
class AircraftConfig:
    c1: float = 1.0
    c2: float = 1.0
    u1_max: float = 1.0
    u2_max: float = 1.2
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.c1) and self.c1 > 0.0):
            raise ValidationError(f"c1 must be positive, got {self.c1}")
        if not (math.isfinite(self.c2) and self.c2 > 0.0):
            raise ValidationError(f"c2 must be positive, got {self.c2}")
        if not (math.isfinite(self.u1_max) and self.u1_max > 0.0):
            raise ValidationError(f"u1_max must be positive, got {self.u1_max}")
        if not 0.0 < self.u2_max < math.pi / 2:
            raise ValidationError(
                f"u2_max must lie strictly inside (0, pi/2), got {self.u2_max}")
        if not (math.isfinite(self.a) and math.isfinite(self.b)
                and self.b > self.a):
            raise ValidationError(f"bad horizon [{self.a}, {self.b}]")


def build_problem(cfg: AircraftConfig = AircraftConfig()) -> ControlProblem:
    """The vector-cost aircraft problem (n=5, r=2, N=2)."""
    return ControlProblem(
        n=5, r=2, a=cfg.a, b=cfg.b,
        phi=tuple(ex.parse(s) for s in _DYNAMICS),
        L=(ex.parse("u1"), ex.parse("1")),
        omega=((0.0, cfg.u1_max), (-cfg.u2_max, cfg.u2_max)),
        constants={"c1": cfg.c1, "c2": cfg.c2},
    )


def builtin_groups() -> tuple[OneParamGroup, OneParamGroup, OneParamGroup]:
    """x1-translation, x2-translation, and the planar scaling map."""
    ident_u = (ex.var("u1"), ex.var("u2"))
    states = tuple(ex.var(f"x{i}") for i in range(1, 6))
    trans1 = OneParamGroup(
        T=ex.var("t"),
        X=(ex.parse("x1 + s"),) + states[1:],
        U=ident_u, epsilon=0.5)
    trans2 = OneParamGroup(
        T=ex.var("t"),
        X=states[:1] + (ex.parse("x2 + s"),) + states[2:],
        U=ident_u, epsilon=0.5)
    scaling = OneParamGroup(
        T=ex.var("t"),
        X=tuple(ex.parse(s) for s in (
            "exp(s)*x1", "exp(2*s)*x2", "exp(s)*x3", "exp(2*s)*x4", "x5")),
        U=(ex.var("u1"), ex.parse("atan(exp(s)*tan(u2))")),
        epsilon=0.5)
    return (trans1, trans2, scaling)


GROUP_STEMS = ("translate_x1", "translate_x2", "scale")


def control_law(cfg: AircraftConfig = AircraftConfig()) -> AnalyticLaw:
    """Closed-form argmax of the aircraft Hamiltonian.

    The thrust angle maximizes ``psi3*cos(u2) + psi4*sin(u2)`` over the
    angle box (candidates: the clamped atan2 angle and both endpoints;
    ties go to the smaller angle).  The throttle is bang-bang on
    ``sigma = lambda1 + c1*(psi3*cos u2* + psi4*sin u2*)/x5 - psi5``:
    full throttle iff sigma > 0.  At psi3 = psi4 = 0 the angle drops out
    of the Hamiltonian and the law defers to a grid search.  The
    declared switching expression uses the interior-angle form
    ``sqrt(psi3^2 + psi4^2)``, exact whenever the angle is unclamped.
    """
    return _make_law(cfg.c1, 0.0, cfg.u1_max, -cfg.u2_max, cfg.u2_max,
                     build_problem(cfg))


def control_law_for_problem(p: ControlProblem) -> AnalyticLaw:
    """The same law, parametrized from an aircraft-shaped problem
    (n=5, r=2, constants c1/c2, bounded controls)."""
    if p.n != 5 or p.r != 2 or "c1" not in p.constants:
        raise ValidationError(
            "not an aircraft-shaped problem (need n=5, r=2, constant c1)")
    (u1_lo, u1_hi), (u2_lo, u2_hi) = p.omega
    if None in (u1_lo, u1_hi, u2_lo, u2_hi):
        raise ValidationError("aircraft law needs bounded controls")
    if not (-math.pi / 2 < u2_lo <= u2_hi < math.pi / 2):
        raise ValidationError(
            "aircraft law needs the angle box inside (-pi/2, pi/2)")
    return _make_law(p.constants["c1"], u1_lo, u1_hi, u2_lo, u2_hi, p)


def _make_law(c1, u1_lo, u1_hi, u2_lo, u2_hi, p: ControlProblem) -> AnalyticLaw:
    def func(t, x, psi, mult):
        x5 = x[4]
        if x5 <= 0.0:
            raise IntegrationError(
                f"fuel mass exhausted (x5 = {x5:.6g} <= 0) at t={t:.6g}")
        psi3, psi4, psi5 = psi[2], psi[3], psi[4]
        if psi3 == 0.0 and psi4 == 0.0:
            return maximize_h(p, "p", Multipliers.for_p(tuple(mult)),
                              t, x, psi, GridSearchLaw())
        base = math.atan2(psi4, psi3)
        candidates = sorted({min(max(base, u2_lo), u2_hi), u2_lo, u2_hi})
        best_u2, best_v = None, -math.inf
        for c in candidates:
            v = psi3 * math.cos(c) + psi4 * math.sin(c)
            if v > best_v:
                best_u2, best_v = c, v
        sigma = mult[0] + c1 * best_v / x5 - psi5
        u1 = u1_hi if sigma > 0.0 else u1_lo
        return (u1, best_u2)

    return AnalyticLaw(func=func, switching=(ex.parse(_SWITCHING),),
                       name="aircraft")


def sample_config(cfg: AircraftConfig = AircraftConfig()) -> SampleConfig:
    """The documented invariance-check box: positions, velocities, time
    and throttle span [-5, 5]; fuel mass stays in [0.1, 10]; the angle
    spans its control box; s spans the groups' declared range."""
    return SampleConfig(
        intervals={
            "default": (-5.0, 5.0),
            "x5": (0.1, 10.0),
            "u2": (-cfg.u2_max, cfg.u2_max),
            "s": (-0.5, 0.5),
        },
        samples=1000, seed=0, tolerance=1e-10)


def export(directory, cfg: AircraftConfig = AircraftConfig()) -> list[Path]:
    """Write the problem, the three group files, and the sample config
    as JSON into ``directory``; doubles as format documentation."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    problem_path = out / "aircraft.json"
    save_problem(build_problem(cfg), problem_path)
    paths.append(problem_path)
    for stem, grp in zip(GROUP_STEMS, builtin_groups()):
        path = out / f"group_{stem}.json"
        save_group(grp, path)
        paths.append(path)
    cfg_path = out / "sample_config.json"
    with open(cfg_path, "w", encoding="utf-8") as fh:
        json.dump(sample_config_to_dict(sample_config(cfg)), fh,
                  indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(cfg_path)
    return paths
