"""Conserved quantities induced by one-parameter symmetry groups.

For a group with generator ``(tau, xi, upsilon)`` and a Hamiltonian
``H``, the candidate first integral along extremals is::

    C(t, x, u, psi) = sum_i psi_i * xi_i  -  H * tau

Multiplier symbols (``psi0``, ``lambda1..``) stay symbolic in the
expression; along-trajectory evaluation supplies their values as extra
input slots.  Constructing a law performs no invariance check — pair it
with the checkers to know whether the candidate is actually conserved.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import expr as ex
from .expr import Expr
from .model import (ControlProblem, Hamiltonian, ValidationError,
                    build_hamiltonian, dynamics_input_names, psi_names)
from .symmetry import Generator, OneParamGroup, generator, validate_group


@dataclass(frozen=True)
class ConservationLaw:
    """Candidate first integral, with the slot order its expression is
    evaluated against and a free-text note on where it came from."""

    expr: Expr
    form: str
    input_names: tuple[str, ...]
    provenance: str = ""

    def __str__(self) -> str:
        return str(self.expr)

    def to_dict(self) -> dict:
        return {"expr": str(self.expr), "form": self.form,
                "provenance": self.provenance}


def law_from_components(p: ControlProblem, gen: Generator, h: Hamiltonian,
                        provenance: str = "") -> ConservationLaw:
    """Assemble ``psi . xi - H * tau`` from an explicit generator."""
    if len(gen.xi) != p.n:
        raise ValidationError(
            f"generator has {len(gen.xi)} state components, expected n={p.n}")
    c: Expr = ex.ZERO
    for name, xi_i in zip(psi_names(p.n), gen.xi):
        c = c + ex.var(name) * xi_i
    c = c - h.expr * gen.tau
    return ConservationLaw(expr=c.simplify(), form=h.form,
                           input_names=h.input_names, provenance=provenance)


def conservation_law(p: ControlProblem, form: str, grp: OneParamGroup,
                     provenance: str = "") -> ConservationLaw:
    """Differentiate the group at s = 0 and assemble its candidate law
    for the requested Hamiltonian form."""
    validate_group(p, grp)
    gen = generator(p, grp)
    h = build_hamiltonian(p, form)
    return law_from_components(p, gen, h, provenance=provenance)


def law_p1(p: ControlProblem, grp: OneParamGroup,
           provenance: str = "") -> ConservationLaw:
    return conservation_law(p, "p1", grp, provenance=provenance)


def law_p(p: ControlProblem, grp: OneParamGroup,
          provenance: str = "") -> ConservationLaw:
    return conservation_law(p, "p", grp, provenance=provenance)


def law_variables(law: ConservationLaw) -> tuple[str, ...]:
    """Names the law's expression actually references, in slot order."""
    used = law.expr.variables()
    return tuple(nm for nm in law.input_names if nm in used)
