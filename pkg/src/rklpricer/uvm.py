"""Uncertain volatility pricing (two-point volatility control).

The value solves a Hamilton-Jacobi-Bellman equation in which the volatility
is picked node by node from ``{sigma_min, sigma_max}`` according to the sign
of the discrete second derivative. The explicit RKL step freezes the
controls for all stages and refreshes them between outer iterations; the
backward Euler baseline uses policy iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bs1d import Solution1D, cached_coefficients, terminal_values
from .lcp import implicit_step
from .pde1d import BSModel, Grid1D, Payoff, TimeAxis, assemble_bs, explicit_max_step, second_derivative
from .rkl import rkl_step, stages_for_step

OBJECTIVES = ("worst", "best")


@dataclass(frozen=True)
class UvmModel:
    sigma_min: float
    sigma_max: float
    r: float
    mu: float | None = None
    objective: str = "worst"

    def __post_init__(self):
        if not 0.0 < self.sigma_min <= self.sigma_max:
            raise ValueError("need 0 < sigma_min <= sigma_max")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")

    def bs_model(self, sigma: float) -> BSModel:
        return BSModel(sigma=sigma, r=self.r, mu=self.mu)


def select_control(f: np.ndarray, grid: Grid1D, model: UvmModel) -> np.ndarray:
    """Volatility per node from the sign of the discrete second derivative.

    ``best`` takes ``sigma_max`` where the second derivative is nonnegative,
    ``worst`` takes ``sigma_min`` there; zero curvature counts as the
    ``best`` branch. Boundary nodes carry no second derivative and so follow
    the same zero-curvature rule (their rows do not depend on volatility).
    """
    gamma = second_derivative(f, grid)
    convex = gamma >= 0.0
    if model.objective == "best":
        return np.where(convex, model.sigma_max, model.sigma_min)
    flat = gamma == 0.0
    sig = np.where(convex, model.sigma_min, model.sigma_max)
    return np.where(flat, model.sigma_max, sig)


def _operator(model: UvmModel, grid: Grid1D, sigma):
    return assemble_bs(model.bs_model(model.sigma_max), grid, sigma=sigma)


def uvm_stages(model: UvmModel, grid: Grid1D, k: float, eps: float = 0.0) -> int:
    """Stage count from the ``sigma_max`` operator, the stiffest choice."""
    return stages_for_step(k, explicit_max_step(_operator(model, grid, None)), eps)


RKL_OUTER_ITERATIONS = 4
EULER_POLICY_ITERATIONS = 20


def uvm_rkl_step(coeffs, grid: Grid1D, model: UvmModel, k: float, f: np.ndarray, max_iter: int = RKL_OUTER_ITERATIONS):
    """One RKL step of the uncertain volatility equation.

    Each outer iteration runs all stages with controls selected from the
    previous iterate (the first from ``f``). Returns ``(f_new, iterations,
    settled)``; ``settled`` is False when the cap was hit with controls
    still changing. On some steps the controls never settle and alternate
    between two patterns, so the cap is kept even to stop on the same one.
    """
    sigma = select_control(f, grid, model)
    for it in range(1, max_iter + 1):
        op = _operator(model, grid, sigma)
        new = rkl_step(coeffs, op.apply, k, f)
        sigma_new = select_control(new, grid, model)
        if np.array_equal(sigma_new, sigma):
            return new, it, True
        sigma = sigma_new
    return new, max_iter, False


def uvm_euler_step(grid: Grid1D, model: UvmModel, k: float, f: np.ndarray, max_iter: int = EULER_POLICY_ITERATIONS):
    """Fully implicit step solved by policy iteration; returns ``(f_new, iterations, settled)``."""
    sigma = select_control(f, grid, model)
    for it in range(1, max_iter + 1):
        op = _operator(model, grid, sigma)
        new = implicit_step("EULER", op, k, f, None, "none")
        sigma_new = select_control(new, grid, model)
        if np.array_equal(sigma_new, sigma):
            return new, it, True
        sigma = sigma_new
    return new, max_iter, False


@dataclass
class UvmSolution(Solution1D):
    iterations: list[int] = field(default_factory=list)
    unsettled_steps: int = 0


def solve_uvm(
    model: UvmModel,
    payoff: Payoff,
    grid: Grid1D,
    time: TimeAxis,
    scheme: str = "RKL",
    eps: float = 0.0,
    smoothing: bool | None = None,
    keep_surface: bool = True,
) -> UvmSolution:
    """European uncertain volatility price marched back from maturity.

    ``smoothing`` defaults to cell averaging for digital payoffs only.
    """
    if scheme not in ("RKL", "EULER"):
        raise ValueError("uncertain volatility supports schemes RKL and EULER")
    if smoothing is None:
        smoothing = payoff.kind == "digital_call"
    times = time.times
    n = times.size - 1
    f = terminal_values(payoff, grid, smoothing)
    surface = np.empty((n + 1, f.size)) if keep_surface else None
    if keep_surface:
        surface[n] = f
    stages, bounds, iters = [], [], []
    unsettled = 0
    dt_e = explicit_max_step(_operator(model, grid, None))
    for j in range(n, 0, -1):
        k = times[j] - times[j - 1]
        if scheme == "RKL":
            s = stages_for_step(k, dt_e, eps)
            stages.append(s)
            bounds.append(dt_e)
            f, it, ok = uvm_rkl_step(cached_coefficients(s, eps), grid, model, k, f)
        else:
            f, it, ok = uvm_euler_step(grid, model, k, f)
        iters.append(it)
        unsettled += not ok
        if keep_surface:
            surface[j - 1] = f
    if not keep_surface:
        surface = f[None, :]
        times = times[:1]
    return UvmSolution(grid, times, surface, stages, bounds, iters, unsettled)
