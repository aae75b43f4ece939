"""Relative absolute error, root relative squared error and Pearson correlation.

All three are returned as ratios; percentage rendering is left to the CLI.
Moments are computed two-pass (mean first, then centred sums).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import math

import numpy as np

from .errors import DataError, DegenerateTarget, ZeroVariance


_UNIT_SNAP = 1e-15


def _check_pair(a, b, names=("predicted", "actual")):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DataError(f"{names[0]} and {names[1]} differ in length ({a.size} vs {b.size})")
    if a.size < 2:
        raise DataError(f"need at least 2 cases, got {a.size}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DataError("non-finite value in input vectors")
    return a, b


def _pow2_scaled(v):
    """``v`` divided by a power of two near its largest magnitude, and that exponent.

    Power-of-two scaling is exact, so squaring tiny deviations cannot
    underflow while ordinary inputs give bit-identical sums.
    """
    m = float(np.max(np.abs(v)))
    if m == 0.0:
        return v, 0
    e = math.frexp(m)[1]
    return np.ldexp(v, -e), e


def rae(predicted, actual) -> float:
    """Sum of absolute errors relative to the mean predictor's; 0 is a perfect fit."""
    p, t = _check_pair(predicted, actual)
    if np.ptp(t) == 0:
        raise DegenerateTarget()
    denom = np.sum(np.abs(t - np.mean(t)))
    return float(np.sum(np.abs(p - t)) / denom)


def rrse(predicted, actual) -> float:
    """Square root of the squared error sum over the target's centred sum of squares."""
    p, t = _check_pair(predicted, actual)
    if np.ptp(t) == 0:
        raise DegenerateTarget()
    d, ed = _pow2_scaled(t - np.mean(t))
    r, er = _pow2_scaled(p - t)
    return float(math.ldexp(np.sqrt(np.sum(r * r) / np.sum(d * d)), er - ed))


def ppmcc(x, y) -> float:
    """Pearson product-moment correlation of ``x`` and ``y``.

    Raises :class:`ZeroVariance` naming the constant input ("x" or "y").
    """
    x, y = _check_pair(x, y, names=("x", "y"))
    # a constant vector's computed mean can differ from its value by an ulp
    if np.ptp(x) == 0:
        raise ZeroVariance("x")
    if np.ptp(y) == 0:
        raise ZeroVariance("y")
    dx = _pow2_scaled(x - np.mean(x))[0]
    dy = _pow2_scaled(y - np.mean(y))[0]
    sxx = np.sum(dx * dx)
    syy = np.sum(dy * dy)
    r = float(np.sum(dx * dy) / np.sqrt(sxx * syy))
    # rounding in the denominator leaves exact lines a few ulps short of +-1
    if abs(r) >= 1.0 - _UNIT_SNAP:
        return math.copysign(1.0, r)
    return r


@dataclass(frozen=True)
class MetricTriple:
    ppmcc: Optional[float]
    rae: float
    rrse: float


def evaluate(predicted, actual) -> MetricTriple:
    """All three scores; ``ppmcc`` is None when the predictions are constant."""
    p, t = _check_pair(predicted, actual)
    e_abs = rae(p, t)
    e_sq = rrse(p, t)
    try:
        r = ppmcc(p, t)
    except ZeroVariance as exc:
        if exc.which == "y":
            raise
        r = None
    return MetricTriple(ppmcc=r, rae=e_abs, rrse=e_sq)
