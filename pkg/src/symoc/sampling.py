"""Seeded low-discrepancy sampling for box domains.

Uses the additive-recurrence R_d sequence: offsets are powers of the
inverse generalized golden ratio, shifted by a seed-derived start point.
Fully deterministic for a given (dimension, count, seed).
"""

from __future__ import annotations

import random

import numpy as np


def rd_sequence(d: int, count: int, seed: int = 0) -> np.ndarray:
    """``count`` points of the R_d sequence in [0, 1)^d."""
    if d < 1 or count < 0:
        raise ValueError("need d >= 1 and count >= 0")
    g = 2.0
    for _ in range(64):
        g = (1.0 + g) ** (1.0 / (d + 1))
    alpha = np.array([(1.0 / g) ** (j + 1) % 1.0 for j in range(d)])
    rng = random.Random(seed)
    start = np.array([rng.random() for _ in range(d)])
    idx = np.arange(1, count + 1, dtype=np.float64)[:, None]
    return (start[None, :] + idx * alpha[None, :]) % 1.0


def sample_box(bounds, count: int, seed: int = 0) -> np.ndarray:
    """Low-discrepancy points in the box given by ``bounds``
    (a sequence of (lo, hi) pairs, one per column)."""
    bounds = list(bounds)
    lo = np.array([float(b[0]) for b in bounds])
    hi = np.array([float(b[1]) for b in bounds])
    if not (np.isfinite(lo).all() and np.isfinite(hi).all() and (hi >= lo).all()):
        raise ValueError("box bounds must be finite with hi >= lo")
    u = rd_sequence(len(bounds), count, seed)
    return lo[None, :] + u * (hi - lo)[None, :]
