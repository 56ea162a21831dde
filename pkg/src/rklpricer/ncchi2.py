"""Noncentral chi-square distribution function and its inverse.

The CDF is the Poisson mixture of central chi-square CDFs. Terms are summed
outward from the Poisson mode so large noncentralities converge quickly.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammainc

MAX_TERMS = 100_000


class SeriesError(RuntimeError):
    """The Poisson series did not converge within its term budget."""


def ncchi2_cdf(y: float, d: float, lam: float, tol: float = 1e-15) -> float:
    """``P(X <= y)`` for ``X`` noncentral chi-square with ``d`` degrees of freedom."""
    if d <= 0 or lam < 0:
        raise ValueError("need d > 0 and lam >= 0")
    if y <= 0:
        return 0.0
    half = 0.5 * lam
    if half == 0.0:
        return float(gammainc(0.5 * d, 0.5 * y))
    mode = int(math.floor(half))

    def weight(j):
        return math.exp(-half + j * math.log(half) - math.lgamma(j + 1.0))

    total = 0.0
    mass = 0.0
    # upward from the mode
    j = mode
    while True:
        w = weight(j)
        total += w * gammainc(0.5 * d + j, 0.5 * y)
        mass += w
        j += 1
        if w < tol and j > half:
            break
        if j - mode > MAX_TERMS:
            raise SeriesError("upper Poisson tail did not converge")
    # downward
    j = mode - 1
    while j >= 0:
        w = weight(j)
        total += w * gammainc(0.5 * d + j, 0.5 * y)
        mass += w
        if w < tol:
            break
        j -= 1
    if abs(mass - 1.0) > 1e-10:
        raise SeriesError(f"Poisson weights sum to {mass}")
    return float(min(total, 1.0))


def ncchi2_quantile(p: float, d: float, lam: float, tol: float = 1e-10) -> float:
    """Inverse of :func:`ncchi2_cdf` in ``y`` with probability error below ``tol``."""
    if not 0.0 < p < 1.0:
        raise ValueError("probability must lie in (0, 1)")
    mean = d + lam
    sd = math.sqrt(2.0 * (d + 2.0 * lam))
    hi = mean + 10.0 * sd + 10.0
    for _ in range(200):
        if ncchi2_cdf(hi, d, lam) >= p:
            break
        hi *= 2.0
    else:
        raise SeriesError("could not bracket the quantile")

    def g(y):
        return ncchi2_cdf(y, d, lam) - p

    # tiny absolute tolerance: low quantiles with small d sit near 1e-16
    y = brentq(g, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=1000)
    if abs(g(y)) > tol:
        raise SeriesError(f"quantile inversion stalled at residual {g(y):.3e}")
    return y
