# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled program evaluator.

Keep in lockstep with ``_pyeval.py``: same opcode numbers, same domain
checks before each libm call, same error codes.  Both backends resolve
to the platform libm, so results agree bitwise.
"""

from libc.stdint cimport int32_t
from libc.math cimport (sin, cos, tan, atan, exp, log, sqrt, pow, floor,
                        isfinite, NAN)

BACKEND_NAME = "compiled"


cdef Py_ssize_t _exec(const int32_t[::1] code, const int32_t[::1] arg1,
                      const int32_t[::1] arg2, double[::1] regs,
                      Py_ssize_t base, int *ec) noexcept nogil:
    cdef Py_ssize_t i, m = code.shape[0]
    cdef int op
    cdef double va, vb, r
    for i in range(m):
        op = code[i]
        va = regs[arg1[i]]
        if op == 0:      # add
            r = va + regs[arg2[i]]
        elif op == 1:    # sub
            r = va - regs[arg2[i]]
        elif op == 2:    # mul
            r = va * regs[arg2[i]]
        elif op == 3:    # div
            vb = regs[arg2[i]]
            if vb == 0.0:
                ec[0] = 1
                return i
            r = va / vb
        elif op == 4:    # pow
            vb = regs[arg2[i]]
            if isfinite(vb) and vb == floor(vb):
                if va == 0.0 and vb < 0.0:
                    ec[0] = 4
                    return i
            elif not va > 0.0:
                ec[0] = 4
                return i
            r = pow(va, vb)
        elif op == 5:    # neg
            r = -va
        elif op == 6:    # sin
            r = sin(va)
        elif op == 7:    # cos
            r = cos(va)
        elif op == 8:    # tan
            r = tan(va)
        elif op == 9:    # atan
            r = atan(va)
        elif op == 10:   # exp
            r = exp(va)
        elif op == 11:   # ln
            if va <= 0.0:
                ec[0] = 2
                return i
            r = log(va)
        else:            # sqrt
            if va < 0.0:
                ec[0] = 3
                return i
            r = sqrt(va)
        if not isfinite(r):
            ec[0] = 5
            return i
        regs[base + i] = r
    return -1


def run_one(int32_t[::1] code, int32_t[::1] arg1, int32_t[::1] arg2,
            double[::1] regs, int32_t[::1] out_regs, double[::1] y):
    """Evaluate one point; returns (err_instr, err_code), -1 on success."""
    cdef Py_ssize_t m = code.shape[0]
    cdef Py_ssize_t base = regs.shape[0] - m
    cdef int ec = 0
    cdef Py_ssize_t err, j
    err = _exec(code, arg1, arg2, regs, base, &ec)
    if err < 0:
        for j in range(out_regs.shape[0]):
            y[j] = regs[out_regs[j]]
        return -1, 0
    return err, ec


def run_many(int32_t[::1] code, int32_t[::1] arg1, int32_t[::1] arg2,
             double[::1] regs, double[:, ::1] X, int32_t[::1] out_regs,
             double[:, ::1] Y, int32_t[::1] status, int32_t[::1] errcode):
    """Evaluate each row of X; per-row status instead of raising."""
    cdef Py_ssize_t P = X.shape[0]
    cdef Py_ssize_t ni = X.shape[1]
    cdef Py_ssize_t m = code.shape[0]
    cdef Py_ssize_t base = regs.shape[0] - m
    cdef Py_ssize_t k = out_regs.shape[0]
    cdef Py_ssize_t p, j, err
    cdef int ec
    with nogil:
        for p in range(P):
            for j in range(ni):
                regs[j] = X[p, j]
            ec = 0
            err = _exec(code, arg1, arg2, regs, base, &ec)
            if err < 0:
                status[p] = -1
                errcode[p] = 0
                for j in range(k):
                    Y[p, j] = regs[out_regs[j]]
            else:
                status[p] = <int32_t> err
                errcode[p] = ec
                for j in range(k):
                    Y[p, j] = NAN
