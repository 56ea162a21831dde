"""Black-Scholes / local volatility discretization on nonuniform 1D grids."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

Coefficient = Union[float, Callable[[np.ndarray, float], np.ndarray]]


@dataclass(frozen=True)
class Grid1D:
    nodes: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        if x.ndim != 1 or x.size < 3:
            raise ValueError("grid needs at least 3 nodes (m >= 2)")
        if np.any(np.diff(x) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        object.__setattr__(self, "nodes", x)

    @classmethod
    def uniform(cls, x_min: float, x_max: float, m: int) -> "Grid1D":
        return cls(np.linspace(x_min, x_max, m + 1))

    @property
    def m(self) -> int:
        return self.nodes.size - 1

    @property
    def h(self) -> np.ndarray:
        """Spacings ``h_i = x_i - x_{i-1}``, ``i = 1..m``."""
        return np.diff(self.nodes)

    def index_of(self, x: float, rtol: float = 1e-12) -> int | None:
        i = int(np.argmin(np.abs(self.nodes - x)))
        if abs(self.nodes[i] - x) <= rtol * max(1.0, abs(x)):
            return i
        return None


@dataclass(frozen=True)
class TimeAxis:
    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
            raise ValueError("time axis must be strictly increasing with at least one step")
        object.__setattr__(self, "times", t)

    @classmethod
    def uniform(cls, n: int, T: float) -> "TimeAxis":
        return cls(np.linspace(0.0, T, n + 1))

    @property
    def n(self) -> int:
        return self.times.size - 1

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.times)


PAYOFF_KINDS = ("put", "call", "digital_call", "butterfly")


@dataclass(frozen=True)
class Payoff:
    kind: str
    strikes: tuple[float, ...]
    rebate: float = 1.0

    def __post_init__(self):
        if self.kind not in PAYOFF_KINDS:
            raise ValueError(f"unknown payoff kind {self.kind!r}")
        strikes = tuple(float(k) for k in np.atleast_1d(self.strikes))
        if any(k <= 0 for k in strikes):
            raise ValueError("strikes must be positive")
        if self.kind == "butterfly":
            if len(strikes) != 2 or not strikes[0] < strikes[1]:
                raise ValueError("butterfly needs strikes K1 < K2")
        elif len(strikes) != 1:
            raise ValueError(f"{self.kind} takes a single strike")
        object.__setattr__(self, "strikes", strikes)

    @classmethod
    def put(cls, K):
        return cls("put", (K,))

    @classmethod
    def call(cls, K):
        return cls("call", (K,))

    @classmethod
    def digital_call(cls, K, rebate=1.0):
        return cls("digital_call", (K,), rebate)

    @classmethod
    def butterfly(cls, K1, K2):
        return cls("butterfly", (K1, K2))

    @property
    def strike(self) -> float:
        return self.strikes[0] if len(self.strikes) == 1 else 0.5 * sum(self.strikes)

    @property
    def kinks(self) -> tuple[float, ...]:
        if self.kind == "butterfly":
            return (self.strikes[0], self.strike, self.strikes[1])
        return self.strikes

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "put":
            return np.maximum(self.strikes[0] - x, 0.0)
        if self.kind == "call":
            return np.maximum(x - self.strikes[0], 0.0)
        if self.kind == "digital_call":
            return np.where(x >= self.strikes[0], self.rebate, 0.0)
        k1, k2 = self.strikes
        return np.maximum(x - k1, 0.0) - 2.0 * np.maximum(x - self.strike, 0.0) + np.maximum(x - k2, 0.0)

    def integral(self, lo, hi):
        """Exact integral of the payoff over ``[lo, hi]`` (vectorized)."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if self.kind == "digital_call":
            K = self.strikes[0]
            return self.rebate * (np.maximum(hi, K) - np.maximum(lo, K))
        if self.kind == "put":
            return _ramp_integral(lo, hi, self.strikes[0], -1.0)
        if self.kind == "call":
            return _ramp_integral(lo, hi, self.strikes[0], 1.0)
        k1, k2 = self.strikes
        return (
            _ramp_integral(lo, hi, k1, 1.0)
            - 2.0 * _ramp_integral(lo, hi, self.strike, 1.0)
            + _ramp_integral(lo, hi, k2, 1.0)
        )


def _ramp_integral(lo, hi, K, sign):
    # antiderivative of max(sign*(x-K), 0) is max(sign*(x-K), 0)^2 / 2 * sign
    def anti(x):
        return sign * 0.5 * np.maximum(sign * (x - K), 0.0) ** 2

    return anti(hi) - anti(lo)


@dataclass(frozen=True)
class BSModel:
    """Volatility, drift and rate, each a constant or ``fn(x, t)``."""

    sigma: Coefficient
    r: Coefficient
    mu: Coefficient | None = None

    def _eval(self, c, x, t):
        if callable(c):
            return np.broadcast_to(np.asarray(c(x, t), dtype=float), x.shape)
        return np.full(x.shape, float(c))

    def coefficients(self, x: np.ndarray, t: float):
        sigma = self._eval(self.sigma, x, t)
        if np.any(sigma < 0):
            raise ValueError("volatility must be nonnegative")
        r = self._eval(self.r, x, t)
        mu = r if self.mu is None else self._eval(self.mu, x, t)
        return sigma, mu, r


@dataclass
class TridiagonalOperator:
    """Tridiagonal ``M`` with ``(M v)_i = lower_i v_{i-1} + diag_i v_i + upper_i v_{i+1}``.

    ``lower[0]`` and ``upper[-1]`` are zero. Not scaled by the time-step.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    bhat: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.bhat is None:
            self.bhat = -self.diag

    @property
    def size(self) -> int:
        return self.diag.size

    def apply(self, v: np.ndarray) -> np.ndarray:
        if v.shape[0] != self.diag.size:
            raise ValueError(f"vector length {v.shape[0]} != operator size {self.diag.size}")
        out = self.diag * v
        out[1:] += self.lower[1:] * v[:-1]
        out[:-1] += self.upper[:-1] * v[1:]
        return out

    __call__ = apply

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.lower[1:], -1) + np.diag(self.upper[:-1], 1)


def assemble_bs(model: BSModel, grid: Grid1D, t: float = 0.0, sigma: np.ndarray | None = None) -> TridiagonalOperator:
    """Assemble the discrete operator ``M = -L`` for the Black-Scholes PDE.

    Interior rows use central differences on the nonuniform grid; boundary
    rows assume zero second derivative and use one-sided first differences
    pointing into the domain. ``sigma`` overrides the model volatility
    node by node (used by the uncertain volatility control).
    """
    x = grid.nodes
    vol, mu, r = model.coefficients(x, t)
    if sigma is not None:
        vol = np.broadcast_to(np.asarray(sigma, dtype=float), x.shape)
    h = grid.h
    hi, hn = h[:-1], h[1:]
    xi = x[1:-1]
    s2 = vol[1:-1] ** 2 * xi**2
    mi = mu[1:-1]

    m = grid.m
    lower = np.zeros(m + 1)
    diag = np.empty(m + 1)
    upper = np.zeros(m + 1)
    bhat = np.empty(m + 1)

    lower[1:-1] = -(mi * hn * xi - s2) / (hi * (hn + hi))
    bhat[1:-1] = r[1:-1] + (mi * xi * (hi - hn) + s2) / (hi * hn)
    upper[1:-1] = (mi * hi * xi + s2) / (hn * (hn + hi))

    bhat[0] = r[0] + mu[0] * x[0] / h[0]
    upper[0] = mu[0] * x[0] / h[0]
    lower[m] = -mu[m] * x[m] / h[-1]
    bhat[m] = r[m] - mu[m] * x[m] / h[-1]

    diag[:] = -bhat
    return TridiagonalOperator(lower, diag, upper, bhat)


def explicit_max_step(op) -> float:
    """Largest stable explicit Euler step, ``1 / max(bhat)``."""
    bmax = float(np.max(op.bhat))
    if bmax <= 0.0:
        raise ValueError("operator has no positive diagonal magnitude; explicit step is unbounded")
    return 1.0 / bmax


def payoff_values(payoff: Payoff, grid: Grid1D) -> np.ndarray:
    return payoff(grid.nodes)


def kreiss_smooth(payoff: Payoff, grid: Grid1D) -> np.ndarray:
    """Payoff replaced by its exact average over each node's cell.

    The cell of node ``i`` is ``[x_i - h_i/2, x_i + h_{i+1}/2]``; boundary
    nodes keep their point value.
    """
    x = grid.nodes
    h = grid.h
    out = payoff(x).astype(float)
    lo = x[1:-1] - 0.5 * h[:-1]
    hi = x[1:-1] + 0.5 * h[1:]
    out[1:-1] = payoff.integral(lo, hi) / (hi - lo)
    return out


def place_strike_on_grid(grid: Grid1D, K: float) -> Grid1D:
    """Insert ``K`` as a grid node unless it already is one."""
    x = grid.nodes
    if K < x[0] or K > x[-1]:
        raise ValueError(f"strike {K} outside grid [{x[0]}, {x[-1]}]")
    if grid.index_of(K) is not None:
        return grid
    return Grid1D(np.insert(x, np.searchsorted(x, K), K))


def first_derivative(f: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Central first difference on interior nodes, one-sided at the ends."""
    h = grid.h
    hi, hn = h[:-1], h[1:]
    out = np.empty_like(f, dtype=float)
    out[1:-1] = (hi**2 * f[2:] + (hn**2 - hi**2) * f[1:-1] - hn**2 * f[:-2]) / (hi * hn * (hn + hi))
    out[0] = (f[1] - f[0]) / h[0]
    out[-1] = (f[-1] - f[-2]) / h[-1]
    return out


def second_derivative(f: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Central second difference on interior nodes; zero at the boundaries."""
    h = grid.h
    hi, hn = h[:-1], h[1:]
    out = np.zeros_like(f, dtype=float)
    out[1:-1] = 2.0 * (hi * f[2:] - (hn + hi) * f[1:-1] + hn * f[:-2]) / (hi * hn * (hn + hi))
    return out
