"""Implicit time-stepping baselines and LCP solvers for tridiagonal systems.

Systems are given by bands ``(lower, diag, upper)`` of equal length with
``lower[0]`` and ``upper[-1]`` ignored.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit

from .pde1d import TridiagonalOperator

SCHEMES = ("RKL", "CN", "RAN", "EULER")
STRATEGIES = ("none", "brennan-schwartz", "psor", "projection")


class NonMonotoneObstacleError(ValueError):
    """Brennan-Schwartz needs an obstacle monotone over the grid."""


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SchemeSelector:
    tag: str = "RKL"
    lcp: str = "projection"
    eps: float = 0.0

    def __post_init__(self):
        if self.tag not in SCHEMES:
            raise ValueError(f"unknown scheme {self.tag!r}")
        if self.lcp not in STRATEGIES:
            raise ValueError(f"unknown LCP strategy {self.lcp!r}")
        if self.tag == "RKL" and self.lcp not in ("projection", "none"):
            raise ValueError("RKL handles the obstacle by projection")
        if self.tag != "RKL" and self.lcp == "projection":
            raise ValueError("implicit schemes need brennan-schwartz or psor")


@dataclass(frozen=True)
class PsorConfig:
    omega: float = 1.3
    tol: float = 1e-10
    max_iter: int = 10000

    def __post_init__(self):
        if not 0.0 < self.omega < 2.0:
            raise ValueError("relaxation must lie in (0, 2)")


@njit(cache=True)
def _thomas(lower, diag, upper, rhs):
    n = diag.size
    cp = np.empty(n)
    dp = np.empty(n)
    if diag[0] == 0.0:
        raise ZeroDivisionError("zero pivot")
    cp[0] = upper[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        den = diag[i] - lower[i] * cp[i - 1]
        if den == 0.0:
            raise ZeroDivisionError("zero pivot")
        cp[i] = upper[i] / den if i < n - 1 else 0.0
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / den
    x = np.empty(n)
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


@njit(cache=True)
def _bs_lower_first(lower, diag, upper, rhs, obstacle):
    # eliminate the upper band from the last row up, substitute from x_0 up
    n = diag.size
    d = np.empty(n)
    y = np.empty(n)
    d[n - 1] = diag[n - 1]
    y[n - 1] = rhs[n - 1]
    for i in range(n - 2, -1, -1):
        factor = upper[i] / d[i + 1]
        d[i] = diag[i] - factor * lower[i + 1]
        y[i] = rhs[i] - factor * y[i + 1]
    x = np.empty(n)
    x[0] = max(obstacle[0], y[0] / d[0])
    for i in range(1, n):
        x[i] = max(obstacle[i], (y[i] - lower[i] * x[i - 1]) / d[i])
    return x


@njit(cache=True)
def _bs_upper_first(lower, diag, upper, rhs, obstacle):
    n = diag.size
    d = np.empty(n)
    y = np.empty(n)
    d[0] = diag[0]
    y[0] = rhs[0]
    for i in range(1, n):
        factor = lower[i] / d[i - 1]
        d[i] = diag[i] - factor * upper[i - 1]
        y[i] = rhs[i] - factor * y[i - 1]
    x = np.empty(n)
    x[n - 1] = max(obstacle[n - 1], y[n - 1] / d[n - 1])
    for i in range(n - 2, -1, -1):
        x[i] = max(obstacle[i], (y[i] - upper[i] * x[i + 1]) / d[i])
    return x


@njit(cache=True)
def _psor(lower, diag, upper, rhs, obstacle, x, omega, tol, max_iter):
    n = diag.size
    for it in range(max_iter):
        err = 0.0
        for i in range(n):
            acc = rhs[i]
            if i > 0:
                acc -= lower[i] * x[i - 1]
            if i < n - 1:
                acc -= upper[i] * x[i + 1]
            gs = acc / diag[i]
            new = max(obstacle[i], x[i] + omega * (gs - x[i]))
            delta = abs(new - x[i])
            if delta > err:
                err = delta
            x[i] = new
        if err < tol:
            return x, it + 1, err
    return x, max_iter, err


def _bands(lower, diag, upper, rhs):
    bands = [np.ascontiguousarray(v, dtype=float) for v in (lower, diag, upper, rhs)]
    n = bands[1].size
    if any(v.size != n for v in bands):
        raise ValueError("bands and right-hand side must have the same length")
    return bands


def thomas_solve(lower, diag, upper, rhs) -> np.ndarray:
    """Solve a tridiagonal system by Gaussian elimination without pivoting."""
    return _thomas(*_bands(lower, diag, upper, rhs))


def obstacle_direction(obstacle: np.ndarray) -> str:
    """``'put'`` for a nonincreasing obstacle, ``'call'`` for nondecreasing."""
    d = np.diff(obstacle)
    if np.all(d <= 0):
        return "put"
    if np.all(d >= 0):
        return "call"
    raise NonMonotoneObstacleError("Brennan-Schwartz needs a monotone obstacle; use PSOR")


def brennan_schwartz_solve(lower, diag, upper, rhs, obstacle) -> np.ndarray:
    """Solve the tridiagonal LCP ``x >= F`` in a single elimination sweep.

    The elimination runs toward the exercise region so that the projected
    substitution starts inside it: for a put, the upper band is eliminated
    first and substitution proceeds from low to high asset values.
    """
    lower, diag, upper, rhs = _bands(lower, diag, upper, rhs)
    obstacle = np.ascontiguousarray(obstacle, dtype=float)
    if not np.all(np.isfinite(obstacle)):
        if np.all(obstacle == -np.inf):
            return _thomas(lower, diag, upper, rhs)
        raise NonMonotoneObstacleError("obstacle must be finite or entirely -inf")
    if obstacle_direction(obstacle) == "put":
        x = _bs_lower_first(lower, diag, upper, rhs, obstacle)
    else:
        x = _bs_upper_first(lower, diag, upper, rhs, obstacle)
    return _polish(lower, diag, upper, rhs, obstacle, x)


POLISH_ITERATIONS = 50


def _lcp_violation(lower, diag, upper, rhs, obstacle, x) -> np.ndarray:
    return np.minimum(x - obstacle, TridiagonalOperator(lower, diag, upper).apply(x) - rhs)


def _polish(lower, diag, upper, rhs, obstacle, x):
    """Policy iteration seeded by the sweep, run only when the sweep missed.

    One sweep is exact when the contact set is a single block at the
    exercise end. The far boundary row can also touch the obstacle (a put
    row at ``x_max`` driven below zero), and then the sweep's elimination
    through that row is wrong. Each iteration fixes the contact set and
    solves the reduced system with Thomas.
    """
    # a few hundred ulps of the terms in each row
    norm = float(np.max(np.abs(lower) + np.abs(diag) + np.abs(upper)))
    tol = 1e-14 * (norm * float(np.max(np.abs(x))) + float(np.max(np.abs(rhs))))
    if np.max(np.abs(_lcp_violation(lower, diag, upper, rhs, obstacle, x))) <= tol:
        return x
    A = TridiagonalOperator(lower, diag, upper)
    for _ in range(POLISH_ITERATIONS):
        contact = (x - obstacle) <= (A.apply(x) - rhs)
        lo = np.where(contact, 0.0, lower)
        di = np.where(contact, 1.0, diag)
        up = np.where(contact, 0.0, upper)
        x = _thomas(lo, di, up, np.where(contact, obstacle, rhs))
        # degenerate nodes (both conditions at rounding level) may flip, so
        # convergence is judged on the violation, not on the contact set
        if np.max(np.abs(_lcp_violation(lower, diag, upper, rhs, obstacle, x))) <= tol:
            return x
    raise ConvergenceError("Brennan-Schwartz contact-set correction did not settle")


def psor_solve(lower, diag, upper, rhs, obstacle, cfg: PsorConfig = PsorConfig(), x0=None) -> np.ndarray:
    """Projected SOR for the tridiagonal LCP, iterated until the largest update is below ``cfg.tol``."""
    lower, diag, upper, rhs = _bands(lower, diag, upper, rhs)
    obstacle = np.ascontiguousarray(np.broadcast_to(obstacle, rhs.shape), dtype=float)
    x = np.maximum(obstacle, rhs / diag if x0 is None else np.asarray(x0, dtype=float)).copy()
    x, iters, err = _psor(lower, diag, upper, rhs, obstacle, x, cfg.omega, cfg.tol, cfg.max_iter)
    if err >= cfg.tol:
        A = TridiagonalOperator(lower, diag, upper)
        resid = np.max(np.abs(np.minimum(x - obstacle, A.apply(x) - rhs)))
        raise ConvergenceError(f"PSOR did not converge in {iters} iterations (last update {err:.3e}, residual {resid:.3e})")
    return x


def solve_lcp(lower, diag, upper, rhs, obstacle, strategy: str, psor: PsorConfig = PsorConfig(), x0=None):
    if obstacle is None or strategy == "none":
        return thomas_solve(lower, diag, upper, rhs)
    if strategy == "brennan-schwartz":
        return brennan_schwartz_solve(lower, diag, upper, rhs, obstacle)
    if strategy == "psor":
        return psor_solve(lower, diag, upper, rhs, obstacle, psor, x0=x0)
    raise ValueError(f"strategy {strategy!r} does not solve implicit systems")


def implicit_step(
    scheme: str,
    op: TridiagonalOperator,
    k: float,
    f: np.ndarray,
    obstacle: np.ndarray | None = None,
    strategy: str = "brennan-schwartz",
    psor: PsorConfig = PsorConfig(),
) -> np.ndarray:
    """One backward Euler (``'EULER'``) or Crank-Nicolson (``'CN'``) step."""
    if k == 0.0:
        return np.array(f, dtype=float)
    if scheme == "EULER":
        theta, rhs = 1.0, np.asarray(f, dtype=float)
    elif scheme == "CN":
        theta = 0.5
        rhs = f + 0.5 * k * op.apply(f)
    else:
        raise ValueError(f"implicit_step handles EULER and CN, not {scheme!r}")
    lower = -theta * k * op.lower
    diag = 1.0 - theta * k * op.diag
    upper = -theta * k * op.upper
    return solve_lcp(lower, diag, upper, rhs, obstacle, strategy, psor, x0=f)


def rannacher_run(
    op_at: Callable[[float], TridiagonalOperator],
    times: np.ndarray,
    terminal: np.ndarray,
    obstacle: np.ndarray | None = None,
    strategy: str = "brennan-schwartz",
    psor: PsorConfig = PsorConfig(),
    startup_steps: int = 2,
) -> np.ndarray:
    """Crank-Nicolson backward in time with Rannacher start-up.

    The ``startup_steps`` intervals adjacent to maturity are each replaced by
    two backward Euler half-steps. Returns the surface ``(n + 1, m + 1)``
    with row ``j`` holding the values at ``times[j]``.
    """
    times = np.asarray(times, dtype=float)
    n = times.size - 1
    surface = np.empty((n + 1, np.asarray(terminal).size))
    f = np.array(terminal, dtype=float)
    surface[n] = f
    for j in range(n, 0, -1):
        k = times[j] - times[j - 1]
        op = op_at(0.5 * (times[j] + times[j - 1]))
        if n - j < startup_steps:
            f = implicit_step("EULER", op, 0.5 * k, f, obstacle, strategy, psor)
            f = implicit_step("EULER", op, 0.5 * k, f, obstacle, strategy, psor)
        else:
            f = implicit_step("CN", op, k, f, obstacle, strategy, psor)
        surface[j - 1] = f
    return surface
