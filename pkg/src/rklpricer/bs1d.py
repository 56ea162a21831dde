"""Backward time-marching of 1D Black-Scholes problems with any scheme."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .lcp import PsorConfig, SchemeSelector, implicit_step, rannacher_run
from .pde1d import BSModel, Grid1D, Payoff, TimeAxis, assemble_bs, explicit_max_step, kreiss_smooth
from .rkl import SchemeCoefficients, rkc_coefficients, rkl_coefficients, rkl_step, stages_for_step


@lru_cache(maxsize=256)
def cached_coefficients(s: int, eps: float, family: str = "RKL") -> SchemeCoefficients:
    return rkl_coefficients(s, eps) if family == "RKL" else rkc_coefficients(s, eps)


@dataclass
class Solution1D:
    grid: Grid1D
    times: np.ndarray
    surface: np.ndarray
    stages: list[int] = field(default_factory=list)
    dt_explicit: list[float] = field(default_factory=list)

    @property
    def values(self) -> np.ndarray:
        """Values at the valuation time ``times[0]``."""
        return self.surface[0]

    def price(self, spot):
        return np.interp(spot, self.grid.nodes, self.values)


def step_bound(op) -> float:
    """Explicit step bound, infinite when the operator has no positive diagonal
    magnitude (no diffusion, drift or discounting): any step is then stable."""
    if float(np.max(op.bhat)) <= 0.0:
        return math.inf
    return explicit_max_step(op)


def terminal_values(payoff: Payoff, grid: Grid1D, smoothing: bool) -> np.ndarray:
    return kreiss_smooth(payoff, grid) if smoothing else payoff(grid.nodes)


def solve_bs(
    model: BSModel,
    payoff: Payoff,
    grid: Grid1D,
    time: TimeAxis,
    scheme: SchemeSelector = SchemeSelector(),
    american: bool = True,
    smoothing: bool = False,
    stages: int | None = None,
    psor: PsorConfig = PsorConfig(),
) -> Solution1D:
    """Price on ``grid`` from maturity ``time.times[-1]`` back to ``time.times[0]``.

    ``stages`` fixes the RKL stage count instead of deriving it from the
    explicit step bound at each time-step.
    """
    times = time.times
    f = terminal_values(payoff, grid, smoothing)
    obstacle = payoff(grid.nodes) if american else None

    def op_at(t):
        return assemble_bs(model, grid, t)

    if scheme.tag == "RAN":
        surface = rannacher_run(op_at, times, f, obstacle, scheme.lcp, psor)
        return Solution1D(grid, times, surface)

    n = times.size - 1
    surface = np.empty((n + 1, f.size))
    surface[n] = f
    used, bounds = [], []
    for j in range(n, 0, -1):
        k = times[j] - times[j - 1]
        op = op_at(0.5 * (times[j] + times[j - 1]))
        if scheme.tag == "RKL":
            dt_e = step_bound(op)
            s = stages if stages is not None else stages_for_step(k, dt_e, scheme.eps)
            used.append(s)
            bounds.append(dt_e)
            f = rkl_step(cached_coefficients(s, scheme.eps), op.apply, k, f, obstacle)
        else:
            f = implicit_step(scheme.tag, op, k, f, obstacle, scheme.lcp, psor)
        surface[j - 1] = f
    return Solution1D(grid, times, surface, used, bounds)
