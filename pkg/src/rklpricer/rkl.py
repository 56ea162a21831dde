"""Runge-Kutta-Legendre (RKL2) super-time-stepping core.

Polynomial evaluation, stage coefficients (Legendre and the shifted
Chebyshev analogue used for comparisons), stage-count selection and the
multi-stage stepper with optional obstacle projection.

Coefficient arrays ``a`` and ``b`` use the shifted indexing in which
``b[eta - 1]`` is built from the Legendre polynomial of degree ``eta``.
Per-stage arrays (``lam``, ``lam_t``, ``nu``, ``gam_t``) are indexed by the
stage number ``eta = 1..s``; entry 0 is unused.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

LEGENDRE = "RKL"
CHEBYSHEV = "RKC"


def legendre_eval(s: int, w: float) -> tuple[float, float, float]:
    """Legendre polynomial ``P_s`` and its first two derivatives at ``w``.

    Uses the three-term recursion, differentiated term by term.
    """
    return _poly_eval(s, w, LEGENDRE)


def chebyshev_eval(s: int, w: float) -> tuple[float, float, float]:
    """Chebyshev polynomial of the first kind ``T_s`` and two derivatives."""
    return _poly_eval(s, w, CHEBYSHEV)


def _poly_eval(s, w, family):
    if s < 0:
        raise ValueError("degree must be nonnegative")
    if s == 0:
        return 1.0, 0.0, 0.0
    p0, p1 = 1.0, w
    d0, d1 = 0.0, 1.0
    e0, e1 = 0.0, 0.0
    for n in range(2, s + 1):
        if family == LEGENDRE:
            c1, c2 = (2.0 * n - 1.0) / n, (n - 1.0) / n
        else:
            c1, c2 = 2.0, 1.0
        p2 = c1 * w * p1 - c2 * p0
        d2 = c1 * (p1 + w * d1) - c2 * d0
        e2 = c1 * (2.0 * d1 + w * e1) - c2 * e0
        p0, p1, d0, d1, e0, e1 = p1, p2, d1, d2, e1, e2
    return p1, d1, e1


@dataclass(frozen=True)
class SchemeCoefficients:
    scheme: str
    s: int
    eps: float
    w0: float
    w1: float
    a: np.ndarray
    b: np.ndarray
    lam: np.ndarray
    lam_t: np.ndarray
    nu: np.ndarray
    gam_t: np.ndarray

    @property
    def stability_bound(self) -> float:
        """Length of the real stability interval, ``(1 + w0) / w1``."""
        return (1.0 + self.w0) / self.w1


def rkl_coefficients(s: int, eps: float = 0.0) -> SchemeCoefficients:
    """Stage constants of the (optionally shifted) RKL2 scheme with ``s`` stages."""
    return _coefficients(s, eps, LEGENDRE)


def rkc_coefficients(s: int, eps: float = 0.0) -> SchemeCoefficients:
    """Stage constants of the shifted second-order Runge-Kutta-Chebyshev scheme."""
    return _coefficients(s, eps, CHEBYSHEV)


def _coefficients(s, eps, family):
    if int(s) != s or s < 2:
        raise ValueError(f"need at least 2 stages, got {s}")
    if eps < 0:
        raise ValueError("shift must be nonnegative")
    s = int(s)
    w0 = 1.0 + eps / s**2
    evaluate = legendre_eval if family == LEGENDRE else chebyshev_eval

    # bb/aa use the natural index j (degree); bb[j] pairs with degree j.
    bb = np.empty(s + 1)
    aa = np.empty(s + 1)
    if family == LEGENDRE and eps == 0.0:
        w1 = 4.0 / (s * s + s - 2.0)
        for j in range(2, s + 1):
            bb[j] = (j * j + j - 2.0) / (2.0 * j * (j + 1.0))
        bb[0] = bb[1] = bb[2]
        aa[:] = 1.0 - bb
    else:
        ps, dps, ddps = evaluate(s, w0)
        w1 = dps / ddps
        pvals = np.empty(s + 1)
        for j in range(s + 1):
            p, dp, ddp = evaluate(j, w0)
            pvals[j] = p
            if j >= 2:
                bb[j] = ddp / dp**2
        bb[0] = bb[1] = bb[2]
        aa[:] = 1.0 - bb * pvals

    lam = np.full(s + 1, np.nan)
    lam_t = np.full(s + 1, np.nan)
    nu = np.full(s + 1, np.nan)
    gam_t = np.full(s + 1, np.nan)
    lam_t[1] = bb[1] * w1
    for j in range(2, s + 1):
        if family == LEGENDRE:
            c1, c2 = (2.0 * j - 1.0) / j, (j - 1.0) / j
        else:
            c1, c2 = 2.0, 1.0
        lam[j] = c1 * bb[j] / bb[j - 1] * w0
        lam_t[j] = c1 * bb[j] / bb[j - 1] * w1
        nu[j] = -c2 * bb[j] / bb[j - 2]
        gam_t[j] = -aa[j - 1] * lam_t[j]

    return SchemeCoefficients(
        scheme=family,
        s=s,
        eps=float(eps),
        w0=w0,
        w1=w1,
        a=aa[1:].copy(),
        b=bb[1:].copy(),
        lam=lam,
        lam_t=lam_t,
        nu=nu,
        gam_t=gam_t,
    )


def minimal_stages(k: float, dt_explicit: float, eps: float = 0.0) -> int:
    """Smallest stage count (at least 2) that keeps a step ``k`` stable."""
    if k <= 0 or dt_explicit <= 0:
        raise ValueError("time-step and explicit bound must be positive")
    ratio = k / dt_explicit

    def stable(n):
        return (n * n + n - 2.0) / 4.0 >= ratio

    s = max(2, math.ceil((math.sqrt(9.0 + 16.0 * ratio) - 1.0) / 2.0))
    # the closed form may be off by one after rounding
    while s > 2 and stable(s - 1):
        s -= 1
    while not stable(s):
        s += 1
    if eps > 0.0:
        while rkl_coefficients(s, eps).stability_bound / 2.0 < ratio:
            s += 1
    return s


STAGE_SAFETY = 0.95


def stages_for_step(k: float, dt_explicit: float, eps: float = 0.0, safety: float = STAGE_SAFETY) -> int:
    """First odd stage count keeping a step ``k`` stable.

    Stability requires ``k <= (1 + w0) / (2 w1) * dt_explicit``; the explicit
    bound is first scaled by ``safety``. The default 0.95 gives 47 stages
    for 20 steps on the 500-cell O'Sullivan grid, and 79 and 111 for the
    one-step digital experiment.
    """
    if not 0.0 < safety <= 1.0:
        raise ValueError("safety factor must lie in (0, 1]")
    s = minimal_stages(k, safety * dt_explicit, eps)
    return s if s % 2 == 1 else s + 1


def rkl_step(
    coeffs: SchemeCoefficients,
    apply_op: Callable[[np.ndarray], np.ndarray],
    k: float,
    f0: np.ndarray,
    obstacle: np.ndarray | None = None,
) -> np.ndarray:
    """Advance ``f0`` by one step of size ``k`` through all ``s`` stages.

    ``apply_op`` computes ``M v`` for the spatial operator, without the
    time-step factor. When ``obstacle`` is given every stage output is
    floored by it; the cached ``M f0`` is reused for the ``gamma`` terms.
    """
    f0 = np.asarray(f0)
    if obstacle is not None:
        obstacle = np.asarray(obstacle)
        if obstacle.shape != f0.shape:
            raise ValueError(f"obstacle shape {obstacle.shape} != state shape {f0.shape}")
    mf0 = apply_op(f0)
    if mf0.shape != f0.shape:
        raise ValueError(f"operator output shape {mf0.shape} != state shape {f0.shape}")

    prev2 = f0
    prev1 = f0 + (coeffs.lam_t[1] * k) * mf0
    if obstacle is not None:
        prev1 = np.maximum(obstacle, prev1)
    for eta in range(2, coeffs.s + 1):
        lam, nu = coeffs.lam[eta], coeffs.nu[eta]
        # lam y1 + nu y0 + (1 - lam - nu) f0, written so that y1 = y0 = f0
        # returns f0 exactly
        cur = (
            f0
            + lam * (prev1 - f0)
            + nu * (prev2 - f0)
            + (coeffs.lam_t[eta] * k) * apply_op(prev1)
            + (coeffs.gam_t[eta] * k) * mf0
        )
        if obstacle is not None:
            cur = np.maximum(obstacle, cur)
        prev2, prev1 = prev1, cur
    return prev1
