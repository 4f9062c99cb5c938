"""Compare the compiled evaluator backend against the pure-Python one.

Runs three representative workloads — a large batched expression
evaluation, a sampled invariance check, and an RK4 extremal
integration — once per backend.  Backend choice happens at import
time, so each timing pass runs in a fresh subprocess: the parent
re-executes this file with ``--worker``, once normally and once with
``SYMOC_PURE=1``, then prints a side-by-side table.

Usage: python3 benchmarks/bench_backends.py [--repeats N]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def _time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def run_workloads(repeats: int) -> dict:
    import dataclasses

    import numpy as np

    from symoc import expr as ex
    from symoc._core import BACKEND, compile_program
    from symoc.aircraft import (build_problem, builtin_groups,
                                control_law_for_problem, sample_config)
    from symoc.extremal import integrate_extremal
    from symoc.model import Multipliers, check_input_names
    from symoc.symmetry import check_invariance_p

    p = build_problem()
    results = {"backend": BACKEND}

    # Workload 1: one compiled program, many rows.
    exprs = [ex.parse(s).subst({"c1": 1.0, "c2": 1.0}) for s in (
        "c1*u1/x5*cos(u2)", "c1*u1/x5*sin(u2) - c2",
        "exp(s)*x1 + exp(2*s)*x2", "atan(exp(s)*tan(u2))")]
    prog = compile_program(exprs, check_input_names(p))
    rng = np.random.default_rng(0)
    rows = rng.uniform(0.1, 1.0, size=(200_000, len(prog.input_names)))
    results["eval_many_200k"] = _time(lambda: prog.eval_many(rows), repeats)

    # Workload 2: full sampled invariance check of the scaling map.
    grp = builtin_groups()[2]
    cfg = dataclasses.replace(sample_config(), samples=2000)
    results["invariance_2k"] = _time(
        lambda: check_invariance_p(p, grp, cfg), repeats)

    # Workload 3: RK4 extremal integration with the analytic control.
    mult = Multipliers.for_p((-0.1, -0.5))
    law = control_law_for_problem(p)
    x0 = np.array([0.0, 0.0, 1.0, 1.0, 3.0])
    psi0 = np.array([0.3, -0.2, 1.0, 0.5, -0.5])
    results["integrate_2k_steps"] = _time(
        lambda: integrate_extremal(p, "p", mult, x0, psi0, 2000, law),
        repeats)
    return results


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--worker", action="store_true",
                        help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.worker:
        json.dump(run_workloads(args.repeats), sys.stdout)
        return 0

    timings = {}
    for pure in (False, True):
        env = dict(os.environ)
        env.pop("SYMOC_PURE", None)
        if pure:
            env["SYMOC_PURE"] = "1"
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--worker",
             "--repeats", str(args.repeats)],
            env=env, capture_output=True, text=True)
        if proc.returncode != 0:
            sys.stderr.write(proc.stderr)
            return 1
        data = json.loads(proc.stdout)
        timings[data.pop("backend")] = data

    names = sorted(next(iter(timings.values())))
    backends = list(timings)
    print(f"{'workload':<22}" + "".join(f"{b:>14}" for b in backends)
          + f"{'speedup':>10}")
    for name in names:
        row = [timings[b][name] for b in backends]
        ratio = row[1] / row[0] if row[0] > 0 else float("inf")
        print(f"{name:<22}" + "".join(f"{v:>13.4f}s" for v in row)
              + f"{ratio:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
