"""Pure-Python program evaluator.

Semantics must match ``_speedups.pyx`` exactly: identical domain checks
performed before the math call, identical error codes, and the same libm
behind ``math``, so the two backends agree bitwise.
"""

from __future__ import annotations

import math

BACKEND_NAME = "python"

_ADD, _SUB, _MUL, _DIV, _POW, _NEG = 0, 1, 2, 3, 4, 5
_SIN, _COS, _TAN, _ATAN, _EXP, _LN, _SQRT = 6, 7, 8, 9, 10, 11, 12


def _exec(code, arg1, arg2, regs, base):
    """Run the tape over ``regs`` (a list). Returns (err_instr, err_code)."""
    for i in range(len(code)):
        op = code[i]
        va = regs[arg1[i]]
        if op == _ADD:
            r = va + regs[arg2[i]]
        elif op == _SUB:
            r = va - regs[arg2[i]]
        elif op == _MUL:
            r = va * regs[arg2[i]]
        elif op == _DIV:
            vb = regs[arg2[i]]
            if vb == 0.0:
                return i, 1
            r = va / vb
        elif op == _POW:
            vb = regs[arg2[i]]
            if math.isfinite(vb) and vb == math.floor(vb):
                if va == 0.0 and vb < 0.0:
                    return i, 4
            elif not va > 0.0:
                return i, 4
            try:
                r = math.pow(va, vb)
            except (OverflowError, ValueError):
                return i, 5
        elif op == _NEG:
            r = -va
        elif op == _SIN:
            r = math.sin(va)
        elif op == _COS:
            r = math.cos(va)
        elif op == _TAN:
            r = math.tan(va)
        elif op == _ATAN:
            r = math.atan(va)
        elif op == _EXP:
            try:
                r = math.exp(va)
            except OverflowError:
                return i, 5
        elif op == _LN:
            if va <= 0.0:
                return i, 2
            r = math.log(va)
        else:  # _SQRT
            if va < 0.0:
                return i, 3
            r = math.sqrt(va)
        if not math.isfinite(r):
            return i, 5
        regs[base + i] = r
    return -1, 0


def run_one(code, arg1, arg2, regs, out_regs, y):
    """Evaluate one point: ``regs`` holds inputs+consts, ``y`` receives
    outputs.  Returns (err_instr, err_code) with -1 meaning success."""
    m = len(code)
    work = regs.tolist()
    base = len(work) - m
    err, ec = _exec(code.tolist(), arg1.tolist(), arg2.tolist(), work, base)
    if err < 0:
        for j, reg in enumerate(out_regs.tolist()):
            y[j] = work[reg]
    return err, ec


def run_many(code, arg1, arg2, regs, X, out_regs, Y, status, errcode):
    """Evaluate each row of ``X``; per-row status instead of raising."""
    codes = code.tolist()
    a1 = arg1.tolist()
    a2 = arg2.tolist()
    outs = out_regs.tolist()
    work = regs.tolist()
    m = len(codes)
    ni = X.shape[1]
    base = len(work) - m
    nan = math.nan
    for p in range(X.shape[0]):
        work[:ni] = X[p].tolist()
        err, ec = _exec(codes, a1, a2, work, base)
        if err < 0:
            status[p] = -1
            errcode[p] = 0
            for j, reg in enumerate(outs):
                Y[p, j] = work[reg]
        else:
            status[p] = err
            errcode[p] = ec
            Y[p, :] = nan
