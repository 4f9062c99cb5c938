"""Flat register programs compiled from expression trees.

A program is a straight-line instruction tape over a register file laid
out as ``[inputs | constants | instruction results]``.  Shared subtrees
are emitted once (hash-consing), so multi-output programs (a Hamiltonian
and its partials, a full residual system) stay compact.  The tape is run
by one of two interchangeable backends selected at import time: the
Cython extension when it built, else the pure-Python twin with identical
semantics (same domain checks in the same order, same libm calls, so
results agree bitwise).  Set ``SYMOC_PURE=1`` to force the fallback.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from ..expr import Expr, DomainError, UnboundVariableError

if os.environ.get("SYMOC_PURE"):
    from . import _pyeval as _impl
else:
    try:
        from . import _speedups as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _pyeval as _impl

BACKEND = _impl.BACKEND_NAME

OPCODES = {
    "add": 0, "sub": 1, "mul": 2, "div": 3, "pow": 4, "neg": 5,
    "sin": 6, "cos": 7, "tan": 8, "atan": 9, "exp": 10, "ln": 11,
    "sqrt": 12,
}

ERROR_MESSAGES = {
    1: "division by zero",
    2: "ln of non-positive value",
    3: "sqrt of negative value",
    4: "invalid power",
    5: "non-finite result (overflow)",
}


@dataclass
class Program:
    """A compiled multi-output evaluator over a fixed input slot order."""

    input_names: tuple[str, ...]
    code: np.ndarray
    arg1: np.ndarray
    arg2: np.ndarray
    consts: np.ndarray
    out_regs: np.ndarray
    sources: tuple[str, ...]

    def __post_init__(self):
        ni = len(self.input_names)
        self._template = np.zeros(ni + len(self.consts) + len(self.code))
        self._template[ni:ni + len(self.consts)] = self.consts

    @property
    def n_inputs(self) -> int:
        return len(self.input_names)

    @property
    def n_outputs(self) -> int:
        return len(self.out_regs)

    def error_text(self, instr: int, code: int) -> str:
        msg = ERROR_MESSAGES.get(int(code), "evaluation error")
        return f"{msg} in '{self.sources[int(instr)]}'"

    def __call__(self, x) -> np.ndarray:
        """Evaluate at one input vector; raises DomainError on failure."""
        regs = self._template.copy()
        regs[:self.n_inputs] = x
        y = np.empty(self.n_outputs)
        instr, code = _impl.run_one(self.code, self.arg1, self.arg2,
                                    regs, self.out_regs, y)
        if instr >= 0:
            raise DomainError(ERROR_MESSAGES.get(code, "evaluation error"),
                              self.sources[instr])
        return y

    def eval_many(self, X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Evaluate at each row of ``X``.

        Returns ``(Y, status, errcode)``: ``status[p] == -1`` marks
        success; otherwise it is the failing instruction index and
        ``Y[p]`` is NaN.  Never raises for per-row domain errors.
        """
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_inputs:
            raise ValueError(f"expected shape (*, {self.n_inputs})")
        P = X.shape[0]
        Y = np.empty((P, self.n_outputs))
        status = np.empty(P, dtype=np.int32)
        errcode = np.empty(P, dtype=np.int32)
        regs = self._template.copy()
        _impl.run_many(self.code, self.arg1, self.arg2, regs, X,
                       self.out_regs, Y, status, errcode)
        return Y, status, errcode


def compile_program(exprs, input_names) -> Program:
    """Compile ``exprs`` into one multi-output program.

    Any variable not in ``input_names`` raises UnboundVariableError, so
    callers substitute problem constants before compiling.
    """
    exprs = list(exprs)
    input_names = tuple(input_names)
    slot = {name: i for i, name in enumerate(input_names)}
    if len(slot) != len(input_names):
        raise ValueError("duplicate input names")

    # pass 1: collect distinct constants in traversal order
    const_reg: dict[tuple[float, float], int] = {}
    consts: list[float] = []

    def collect(e: Expr):
        if e.kind == "const":
            key = (e.value, math.copysign(1.0, e.value))
            if key not in const_reg:
                const_reg[key] = len(input_names) + len(consts)
                consts.append(e.value)
        else:
            for a in e.args:
                collect(a)

    for e in exprs:
        collect(e)

    base = len(input_names) + len(consts)
    code: list[int] = []
    arg1: list[int] = []
    arg2: list[int] = []
    sources: list[str] = []
    memo: dict[Expr, int] = {}

    def emit(e: Expr) -> int:
        reg = memo.get(e)
        if reg is not None:
            return reg
        if e.kind == "const":
            reg = const_reg[(e.value, math.copysign(1.0, e.value))]
        elif e.kind == "var":
            if e.name not in slot:
                raise UnboundVariableError(e.name)
            reg = slot[e.name]
        else:
            regs = [emit(a) for a in e.args]
            code.append(OPCODES[e.kind])
            arg1.append(regs[0])
            arg2.append(regs[1] if len(regs) > 1 else 0)
            sources.append(str(e))
            reg = base + len(code) - 1
        memo[e] = reg
        return reg

    out_regs = [emit(e) for e in exprs]

    return Program(
        input_names=input_names,
        code=np.array(code, dtype=np.int32),
        arg1=np.array(arg1, dtype=np.int32),
        arg2=np.array(arg2, dtype=np.int32),
        consts=np.array(consts, dtype=np.float64),
        out_regs=np.array(out_regs, dtype=np.int32),
        sources=tuple(sources),
    )
