"""Command-line front end.

Subcommands: ``check``, ``check-infinitesimal``, ``law``, ``extremal``,
``conserve``, ``dhdt``, ``shoot``, ``pareto``, ``aircraft export``.

Exit codes are a stable contract: 0 success/pass, 1 a check failed,
2 bad input, 3 integration failure, 4 shooting non-convergence.

Every emitted report embeds the tool version and an echo of the run
configuration (including the seed) — never a timestamp — so identical
invocations produce byte-identical output.  CSV floats carry 17
significant digits.  Values that may start with a minus sign are safest
passed in ``--flag=value`` form (e.g. ``--lambda=-1,-0.5``).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import aircraft as _aircraft
from . import expr as ex
from .extremal import (AnalyticLaw, GridSearchLaw, IntegrationError,
                       ShootingError, check_hamiltonian_identity, check_law,
                       integrate_extremal, shoot, write_trajectory_csv)
from .model import (Multipliers, ValidationError, load_problem,
                    validate_multipliers)
from .noether import conservation_law
from .pareto import filter_dominated, simplex_grid, sweep, write_sweep_csv
from .symmetry import (check_infinitesimal, check_invariance_p,
                       check_invariance_p1, default_sample_config, load_group,
                       load_sample_config, verify_identity_at_zero)


# -- small helpers ----------------------------------------------------------

def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}")


def _pick_form(p, requested: str) -> str:
    if requested != "auto":
        return requested
    if p.constraints or p.N == 1:
        return "p1"
    return "p"


def _config_echo(args, keys) -> dict:
    out = {}
    for key in keys:
        attr = "lam" if key == "lambda" else key.replace("-", "_")
        val = getattr(args, attr)
        if isinstance(val, Path):
            val = str(val)
        out[key] = val
    return out


def _emit_json(args, command: str, echo_keys, payload) -> None:
    doc = {
        "tool": "symoc",
        "version": __version__,
        "command": command,
        "config": _config_echo(args, echo_keys),
        "report": payload,
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if getattr(args, "output", None):
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _csv_header(args, command: str, echo_keys) -> list[str]:
    echo = _config_echo(args, echo_keys)
    parts = " ".join(f"{k}={echo[k]}" for k in echo)
    return [f"symoc {__version__}", f"command: {command}", f"config: {parts}"]


def _open_output(args):
    if getattr(args, "output", None):
        return open(args.output, "w", encoding="utf-8")
    return None


def _load_sample_cfg(args, p, grp):
    if args.sample_config:
        cfg = load_sample_config(args.sample_config)
    else:
        cfg = default_sample_config(p, grp)
    updates = {}
    if args.samples is not None:
        updates["samples"] = args.samples
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.tolerance is not None:
        updates["tolerance"] = args.tolerance
    if args.skip_domain_errors:
        updates["skip_domain_errors"] = True
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _multipliers(args, p, form: str) -> Multipliers:
    lam = _floats(args.lam) if args.lam else ()
    if form == "p1":
        m = Multipliers.for_p1(args.mult_psi0, lam)
    else:
        if not lam:
            raise ValidationError(
                "vector form needs cost multipliers: pass --lambda=v1,...,vN")
        m = Multipliers.for_p(lam)
    validate_multipliers(p, form, m)
    return m


def _control(args, p):
    kind = args.control
    if kind == "grid":
        return GridSearchLaw(resolution=args.grid_resolution,
                             refinements=args.grid_refinements)
    if kind == "aircraft":
        return _aircraft.control_law_for_problem(p)
    if kind == "exprs":
        if not args.control_expr:
            raise ValidationError(
                "--control exprs needs one --control-expr per control")
        exprs = tuple(ex.parse(s) for s in args.control_expr)
        switching = tuple(ex.parse(s) for s in (args.switching_expr or ()))
        return AnalyticLaw(exprs=exprs, switching=switching)
    raise ValidationError(f"unknown control scheme {kind!r}")


# -- subcommand handlers ----------------------------------------------------

_CHECK_ECHO = ("problem", "group", "sample-config", "samples", "seed",
               "tolerance", "skip-domain-errors", "form")


def _cmd_check(args, infinitesimal: bool) -> int:
    p = load_problem(args.problem)
    grp = load_group(args.group)
    cfg = _load_sample_cfg(args, p, grp)
    form = _pick_form(p, args.form)
    if infinitesimal:
        report = check_infinitesimal(p, grp, cfg)
    elif form == "p1":
        report = check_invariance_p1(p, grp, cfg)
    else:
        report = check_invariance_p(p, grp, cfg)
    command = "check-infinitesimal" if infinitesimal else "check"
    _emit_json(args, command, _CHECK_ECHO, report.to_dict())
    return 0 if report.passed else 1


def _cmd_law(args) -> int:
    p = load_problem(args.problem)
    grp = load_group(args.group)
    verify_identity_at_zero(p, grp)
    form = _pick_form(p, args.form)
    law = conservation_law(p, form, grp, provenance=str(args.group))
    if args.json:
        _emit_json(args, "law", ("problem", "group", "form"), law.to_dict())
    else:
        line = str(law.expr) + "\n"
        if args.output:
            Path(args.output).write_text(line, encoding="utf-8")
        else:
            sys.stdout.write(line)
    return 0


_RUN_ECHO = ("problem", "form", "x0", "psi0", "mult-psi0", "lambda", "steps",
             "control", "grid-resolution", "grid-refinements")


def _integrate(args, p, form):
    mult = _multipliers(args, p, form)
    law = _control(args, p)
    x0 = np.array(_floats(args.x0))
    psi0 = np.array(_floats(args.psi0))
    traj = integrate_extremal(p, form, mult, x0, psi0, args.steps, law)
    return traj, law


def _cmd_extremal(args) -> int:
    p = load_problem(args.problem)
    form = _pick_form(p, args.form)
    header = _csv_header(args, "extremal", _RUN_ECHO)
    try:
        traj, _ = _integrate(args, p, form)
    except IntegrationError as err:
        if err.trajectory is not None and args.output:
            with open(args.output, "w", encoding="utf-8") as fh:
                write_trajectory_csv(err.trajectory, fh,
                                     header + ["partial: " + str(err)])
        raise
    fh = _open_output(args)
    try:
        write_trajectory_csv(traj, fh or sys.stdout, header)
    finally:
        if fh:
            fh.close()
    return 0


def _cmd_conserve(args) -> int:
    p = load_problem(args.problem)
    grp = load_group(args.group)
    form = _pick_form(p, args.form)
    law = conservation_law(p, form, grp, provenance=str(args.group))
    traj, _ = _integrate(args, p, form)
    report = check_law(p, law, traj, tolerance=args.tolerance)
    payload = {"law": law.to_dict(), "conservation": report.to_dict()}
    _emit_json(args, "conserve",
               _RUN_ECHO + ("group", "tolerance"), payload)
    return 0 if report.passed else 1


def _cmd_dhdt(args) -> int:
    p = load_problem(args.problem)
    form = _pick_form(p, args.form)
    traj, law = _integrate(args, p, form)
    report = check_hamiltonian_identity(p, traj, law,
                                        tolerance=args.tolerance)
    _emit_json(args, "dhdt", _RUN_ECHO + ("tolerance",), report.to_dict())
    return 0 if report.passed else 1


def _cmd_shoot(args) -> int:
    p = load_problem(args.problem)
    form = _pick_form(p, args.form)
    mult = _multipliers(args, p, form)
    law = _control(args, p)
    x_a = np.array(_floats(args.x0)) if args.x0 else None
    target = np.array(_floats(args.target)) if args.target else None
    psi_a0 = np.array(_floats(args.psi0_init)) if args.psi0_init else None
    echo = ("problem", "form", "x0", "target", "psi0-init", "mult-psi0",
            "lambda", "steps", "tolerance", "max-iterations", "control")
    try:
        result = shoot(p, form, mult, law, steps=args.steps, x_a=x_a,
                       target=target, psi_a0=psi_a0,
                       tolerance=args.tolerance,
                       max_iterations=args.max_iterations)
    except ShootingError as err:
        if err.trajectory is not None and args.output:
            with open(args.output, "w", encoding="utf-8") as fh:
                write_trajectory_csv(
                    err.trajectory, fh,
                    _csv_header(args, "shoot", echo)
                    + ["best-iterate: " + str(err)])
        raise
    payload = {
        "psi_a": [float(v) for v in result.psi_a],
        "residual_norm": result.residual_norm,
        "iterations": result.iterations,
    }
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            write_trajectory_csv(result.trajectory, fh,
                                 _csv_header(args, "shoot", echo))
        sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        _emit_json(args, "shoot", echo, payload)
    return 0


def _cmd_pareto(args) -> int:
    p = load_problem(args.problem)
    if p.N < 2:
        raise ValidationError("pareto sweep needs a vector-cost problem")
    law = _control(args, p)
    x0 = np.array(_floats(args.x0))
    psi0 = np.array(_floats(args.psi0))
    grid = simplex_grid(p.N, args.grid)
    points = sweep(p, x0, psi0, grid, args.steps, law)
    good = [pt for pt in points if pt.ok]
    kept = set(id(pt) for pt in filter_dominated(good)) if good else set()
    if args.dedup:
        seen = set()
        for pt in points:
            if id(pt) not in kept:
                continue
            key = pt.costs
            if key in seen:
                kept.discard(id(pt))
            else:
                seen.add(key)
    flags = [id(pt) in kept for pt in points]
    echo = ("problem", "grid", "x0", "psi0", "steps", "control", "dedup")
    fh = _open_output(args)
    try:
        write_sweep_csv(points, flags, fh or sys.stdout,
                        _csv_header(args, "pareto", echo))
    finally:
        if fh:
            fh.close()
    return 0


def _cmd_aircraft_export(args) -> int:
    cfg = _aircraft.AircraftConfig(c1=args.c1, c2=args.c2,
                                   u1_max=args.u1_max, u2_max=args.u2_max,
                                   a=args.a, b=args.b)
    paths = _aircraft.export(args.dir, cfg)
    for path in paths:
        sys.stdout.write(str(path) + "\n")
    return 0


# -- parser -----------------------------------------------------------------

def _add_sample_flags(sp):
    sp.add_argument("--sample-config", default=None,
                    help="JSON sampling box; default derives one from the "
                         "problem and group")
    sp.add_argument("--samples", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--tolerance", type=float, default=None)
    sp.add_argument("--skip-domain-errors", action="store_true")
    sp.add_argument("--form", choices=("auto", "p", "p1"), default="auto")
    sp.add_argument("--output", default=None)


def _add_run_flags(sp, steps_default=1000):
    sp.add_argument("--form", choices=("auto", "p", "p1"), default="auto")
    sp.add_argument("--x0", required=True,
                    help="initial state, comma-separated")
    sp.add_argument("--psi0", required=True,
                    help="initial costate, comma-separated")
    sp.add_argument("--mult-psi0", type=float, default=-1.0,
                    help="cost multiplier psi0 (scalar form only)")
    sp.add_argument("--lambda", dest="lam", default=None,
                    help="multiplier vector, e.g. --lambda=-1,-0.5")
    sp.add_argument("--steps", type=int, default=steps_default)
    _add_control_flags(sp)
    sp.add_argument("--output", default=None)


def _add_control_flags(sp):
    sp.add_argument("--control", choices=("grid", "aircraft", "exprs"),
                    default="grid")
    sp.add_argument("--control-expr", action="append", default=None,
                    help="closed-form control (repeat per control)")
    sp.add_argument("--switching-expr", action="append", default=None)
    sp.add_argument("--grid-resolution", type=int, default=64)
    sp.add_argument("--grid-refinements", type=int, default=20)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="symoc",
        description="Verify symmetry groups of optimal control problems, "
                    "build their conservation laws, and confirm the laws "
                    "along Pontryagin extremals.")
    parser.add_argument("--version", action="version",
                        version=f"symoc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, infin in (("check", False), ("check-infinitesimal", True)):
        sp = sub.add_parser(name, help="run invariance conditions on "
                                       "a sampled box")
        sp.add_argument("problem")
        sp.add_argument("group")
        _add_sample_flags(sp)
        sp.set_defaults(handler=lambda a, infin=infin: _cmd_check(a, infin))

    sp = sub.add_parser("law", help="print the conservation law a group "
                                    "induces")
    sp.add_argument("problem")
    sp.add_argument("group")
    sp.add_argument("--form", choices=("auto", "p", "p1"), default="auto")
    sp.add_argument("--json", action="store_true")
    sp.add_argument("--output", default=None)
    sp.set_defaults(handler=_cmd_law)

    sp = sub.add_parser("extremal", help="integrate one extremal, emit CSV")
    sp.add_argument("problem")
    _add_run_flags(sp)
    sp.set_defaults(handler=_cmd_extremal)

    sp = sub.add_parser("conserve", help="integrate an extremal and test "
                                         "the group's law along it")
    sp.add_argument("problem")
    sp.add_argument("group")
    _add_run_flags(sp)
    sp.add_argument("--tolerance", type=float, default=1e-6)
    sp.set_defaults(handler=_cmd_conserve)

    sp = sub.add_parser("dhdt", help="check dH/dt = partial dH/dt along "
                                     "an extremal")
    sp.add_argument("problem")
    _add_run_flags(sp)
    sp.add_argument("--tolerance", type=float, default=1e-4)
    sp.set_defaults(handler=_cmd_dhdt)

    sp = sub.add_parser("shoot", help="match a terminal state by adjusting "
                                      "the initial costate")
    sp.add_argument("problem")
    sp.add_argument("--form", choices=("auto", "p", "p1"), default="auto")
    sp.add_argument("--x0", default=None,
                    help="initial state (defaults to the problem's alpha)")
    sp.add_argument("--target", default=None,
                    help="terminal state (defaults to the problem's beta)")
    sp.add_argument("--psi0-init", default=None,
                    help="starting guess for the initial costate")
    sp.add_argument("--mult-psi0", type=float, default=-1.0)
    sp.add_argument("--lambda", dest="lam", default=None)
    sp.add_argument("--steps", type=int, default=100)
    sp.add_argument("--tolerance", type=float, default=1e-10)
    sp.add_argument("--max-iterations", type=int, default=50)
    _add_control_flags(sp)
    sp.add_argument("--output", default=None)
    sp.set_defaults(handler=_cmd_shoot)

    sp = sub.add_parser("pareto", help="sweep cost multipliers, emit "
                                       "dominance-filtered outcomes")
    sp.add_argument("problem")
    sp.add_argument("--grid", type=int, default=11,
                    help="points on the multiplier simplex")
    sp.add_argument("--x0", required=True)
    sp.add_argument("--psi0", required=True)
    sp.add_argument("--steps", type=int, default=200)
    sp.add_argument("--dedup", action="store_true",
                    help="drop repeated cost vectors from the kept set")
    _add_control_flags(sp)
    sp.add_argument("--output", default=None)
    sp.set_defaults(handler=_cmd_pareto)

    sp = sub.add_parser("aircraft", help="built-in aircraft example")
    airsub = sp.add_subparsers(dest="aircraft_command", required=True)
    exp = airsub.add_parser("export", help="write the model, groups, and "
                                           "sample box as JSON files")
    exp.add_argument("--dir", required=True)
    exp.add_argument("--c1", type=float, default=1.0)
    exp.add_argument("--c2", type=float, default=1.0)
    exp.add_argument("--u1-max", type=float, default=1.0)
    exp.add_argument("--u2-max", type=float, default=1.2)
    exp.add_argument("--a", type=float, default=0.0)
    exp.add_argument("--b", type=float, default=1.0)
    exp.set_defaults(handler=_cmd_aircraft_export)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ValidationError, ex.ParseError, OSError,
            json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except IntegrationError as err:
        print(f"integration error: {err}", file=sys.stderr)
        return 3
    except ShootingError as err:
        print(f"shooting error: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
