"""American options under the Heston model with RKL time-stepping.

The asset/variance plane is discretized with second-order central
differences on tensor grids. Cells whose Peclet number reaches 2 switch to
exponentially fitted diffusion. Boundary rows use first-order one-sided
differences: forward in ``v`` at ``v_min = 0``, backward at ``v_max``, and
linear-in-``x`` rows at both asset edges.

State vectors are flattened variance-major: node ``(i, j)`` (asset index
``i``, variance index ``j``) sits at ``j * (m + 1) + i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator

from .bs1d import cached_coefficients
from .ncchi2 import ncchi2_quantile
from .pde1d import Grid1D, Payoff, TimeAxis, explicit_max_step, kreiss_smooth
from .rkl import rkl_step, stages_for_step


@dataclass(frozen=True)
class HestonModel:
    kappa: float
    theta: float
    sigma: float
    rho: float
    r: float
    q: float = 0.0

    def __post_init__(self):
        if min(self.kappa, self.theta, self.sigma) <= 0:
            raise ValueError("kappa, theta and sigma must be positive")
        if abs(self.rho) > 1:
            raise ValueError("correlation must lie in [-1, 1]")

    @property
    def mu(self) -> float:
        return self.r - self.q

    @property
    def feller(self) -> bool:
        return 2.0 * self.kappa * self.theta >= self.sigma**2


@dataclass(frozen=True)
class Grid2D:
    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        for name in ("x", "v"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.ndim != 1 or a.size < 3 or np.any(np.diff(a) <= 0):
                raise ValueError(f"{name} nodes must be strictly increasing with at least 3 nodes")
            object.__setattr__(self, name, a)
        if self.v[0] < 0 or self.x[0] < 0:
            raise ValueError("asset and variance nodes must be nonnegative")

    @classmethod
    def uniform(cls, x_max: float, v_max: float, m: int, n: int, x_min: float = 0.0, v_min: float = 0.0) -> "Grid2D":
        return cls(np.linspace(x_min, x_max, m + 1), np.linspace(v_min, v_max, n + 1))

    @property
    def m(self) -> int:
        return self.x.size - 1

    @property
    def n(self) -> int:
        return self.v.size - 1

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.x)

    @property
    def w(self) -> np.ndarray:
        return np.diff(self.v)

    @property
    def shape(self) -> tuple[int, int]:
        """``(n + 1, m + 1)``: variance rows, asset columns."""
        return self.v.size, self.x.size

    @property
    def size(self) -> int:
        return self.x.size * self.v.size


def domain_bounds(model: HestonModel, K: float, T: float, v0: float, eps_v: float = 1e-4, n_std: float = 4.0):
    """Truncation ``(x_max, v_max)``; both lower bounds are zero.

    ``x_max = K exp(n_std sqrt(theta T))``. ``v_max`` is the ``1 - eps_v``
    quantile of the variance at ``T`` given ``V(0) = v0``, a scaled
    noncentral chi-square.
    """
    if not 0.0 < eps_v < 0.5:
        raise ValueError("eps_v must lie in (0, 0.5)")
    if T <= 0 or K <= 0 or v0 < 0:
        raise ValueError("need T > 0, K > 0 and v0 >= 0")
    x_max = K * math.exp(n_std * math.sqrt(model.theta * T))
    ekt = math.exp(-model.kappa * T)
    d = 4.0 * model.kappa * model.theta / model.sigma**2
    nc = 4.0 * model.kappa * ekt / (model.sigma**2 * (1.0 - ekt))
    v_max = ncchi2_quantile(1.0 - eps_v, d, v0 * nc) * ekt / nc
    return x_max, v_max


def fitting_factor(P):
    """``P / (2 tanh(P / 2))``, equal to 1 at ``P = 0``."""
    P = np.asarray(P, dtype=float)
    half = 0.5 * P
    small = np.abs(half) < 1e-4
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(small, 1.0 + half**2 / 3.0, half / np.tanh(np.where(small, 1.0, half)))
    return out if out.ndim else float(out)


def _fitted_diffusion(drift_h, plain):
    """Diffusion ``beta * plain`` where ``beta`` fits the cell Peclet number.

    ``drift_h`` is drift times the upwind spacing and ``plain`` the unfitted
    second-derivative coefficient (twice the diffusion term), so the Peclet
    number is ``P = 2 drift_h / plain``. Fitting switches on where
    ``|P| >= 2``; as ``plain -> 0`` the fitted value tends to ``|drift_h|``.
    Returns ``(diffusion, beta, P)`` with ``beta = inf`` where ``plain = 0``.
    """
    adv = np.abs(drift_h)
    with np.errstate(divide="ignore", invalid="ignore"):
        P = np.where(plain > 0, 2.0 * drift_h / plain, np.where(adv > 0, np.inf, 0.0))
        fit = np.abs(P) >= 2.0
        arg = np.where(fit & (plain > 0), adv / np.where(plain > 0, plain, 1.0), 1.0)
        fitted = np.where(plain > 0, adv / np.tanh(arg), adv)
        diff = np.where(fit, fitted, plain)
        beta = np.where(plain > 0, diff / np.where(plain > 0, plain, 1.0), np.where(fit, np.inf, 1.0))
    return diff, beta, P


@dataclass
class StencilOperator2D:
    """Nine-point operator ``M`` (no time-step factor); arrays have the grid shape.

    ``(M f)_{i,j} = a f_{i-1,j} + b f_{i,j} + c f_{i+1,j} + d f_{i,j-1}
    + e f_{i,j+1} + omega (f_{i+1,j+1} - f_{i+1,j-1} - f_{i-1,j+1} + f_{i-1,j-1})``.
    """

    grid: Grid2D
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    e: np.ndarray
    omega: np.ndarray
    beta_x: np.ndarray
    beta_v: np.ndarray
    peclet_x: np.ndarray
    peclet_v: np.ndarray
    _matrix: sp.csr_matrix | None = field(default=None, repr=False)

    @property
    def bhat(self) -> np.ndarray:
        return -self.b

    @property
    def size(self) -> int:
        return self.grid.size

    def row_sums(self) -> np.ndarray:
        """Sum of all stencil weights; the cross stencil contributes zero."""
        return self.a + self.b + self.c + self.d + self.e

    @property
    def matrix(self) -> sp.csr_matrix:
        if self._matrix is None:
            self._matrix = self._build()
        return self._matrix

    def _build(self) -> sp.csr_matrix:
        nv, nx = self.grid.shape
        idx = np.arange(nv * nx).reshape(nv, nx)
        rows, cols, vals = [], [], []

        def put(coef, di, dj):
            # rows whose neighbour (i + di, j + dj) exists
            rs = slice(max(0, -dj), nv - max(0, dj))
            cs = slice(max(0, -di), nx - max(0, di))
            c = coef[rs, cs]
            mask = c != 0.0
            rows.append(idx[rs, cs][mask])
            cols.append(idx[rs, cs][mask] + dj * nx + di)
            vals.append(c[mask])

        put(self.b, 0, 0)
        put(self.a, -1, 0)
        put(self.c, 1, 0)
        put(self.d, 0, -1)
        put(self.e, 0, 1)
        put(self.omega, 1, 1)
        put(-self.omega, 1, -1)
        put(-self.omega, -1, 1)
        put(self.omega, -1, -1)
        mat = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nv * nx, nv * nx)
        )
        return mat.tocsr()

    def apply(self, f: np.ndarray) -> np.ndarray:
        if f.shape[0] != self.size:
            raise ValueError(f"vector length {f.shape[0]} != operator size {self.size}")
        return self.matrix @ f

    __call__ = apply


def assemble_heston(model: HestonModel, grid: Grid2D, fitting: bool = True) -> StencilOperator2D:
    """Assemble the Heston operator with boundary rows.

    ``fitting=False`` keeps plain central differences everywhere (the
    ``v = 0`` row then has no asset diffusion at all).
    """
    x, v = grid.x, grid.v
    h, w = grid.h, grid.w
    m, n = grid.m, grid.n
    mu, r = model.mu, model.r
    kap, th, sig, rho = model.kappa, model.theta, model.sigma, model.rho
    shape = grid.shape

    a = np.zeros(shape)
    b = np.zeros(shape)
    c = np.zeros(shape)
    d = np.zeros(shape)
    e = np.zeros(shape)
    om = np.zeros(shape)
    beta_x = np.ones(shape)
    beta_v = np.ones(shape)
    pec_x = np.zeros(shape)
    pec_v = np.zeros(shape)

    # asset direction, interior i, every j
    xi = x[1:-1][None, :]
    hi, hn = h[:-1][None, :], h[1:][None, :]
    vj = v[:, None]
    plain_x = vj * xi**2
    if fitting:
        dx, bx, px = _fitted_diffusion(mu * hi * xi, plain_x)
    else:
        dx = plain_x
        with np.errstate(divide="ignore"):
            px = np.where(plain_x > 0, 2.0 * mu * hi * xi / np.where(plain_x > 0, plain_x, 1.0), np.inf)
        bx = np.ones_like(plain_x)
    beta_x[:, 1:-1], pec_x[:, 1:-1] = bx, px
    a[:, 1:-1] = -(mu * hn * xi - dx) / (hi * (hi + hn))
    c[:, 1:-1] = (mu * hi * xi + dx) / (hn * (hi + hn))
    b[:, 1:-1] = -(r + (mu * xi * (hi - hn) + dx) / (hi * hn))

    # variance direction, interior j, interior i
    vin = v[1:-1][:, None]
    wi, wn = w[:-1][:, None], w[1:][:, None]
    drift_v = kap * (th - vin)
    plain_v = np.broadcast_to(sig**2 * vin, (n - 1, 1))
    if fitting:
        dv, bv, pv = _fitted_diffusion(drift_v * wi, plain_v)
    else:
        dv, bv, pv = plain_v, np.ones_like(plain_v), 2.0 * drift_v * wi / plain_v
    beta_v[1:-1, 1:-1], pec_v[1:-1, 1:-1] = bv, pv
    d[1:-1, 1:-1] = -(drift_v * wn - dv) / (wi * (wi + wn))
    e[1:-1, 1:-1] = (drift_v * wi + dv) / (wn * (wi + wn))
    b[1:-1, 1:-1] -= (drift_v * (wi - wn) + dv) / (wi * wn)
    om[1:-1, 1:-1] = rho * sig * xi * vin / ((hi + hn) * (wi + wn))

    # v = v_min row: forward difference, v = v_max row: backward difference
    up0 = kap * (th - v[0]) / w[0]
    e[0, 1:-1] = up0
    b[0, 1:-1] -= up0
    dn = kap * (th - v[-1]) / w[-1]
    d[-1, 1:-1] = -dn
    b[-1, 1:-1] += dn

    # asset edges, every j
    a[:, 0] = d[:, 0] = e[:, 0] = om[:, 0] = 0.0
    c[:, 0] = mu * x[0] / h[0]
    b[:, 0] = -(r + mu * x[0] / h[0])
    c[:, m] = d[:, m] = e[:, m] = om[:, m] = 0.0
    a[:, m] = -mu * x[m] / h[-1]
    b[:, m] = -(r - mu * x[m] / h[-1])

    return StencilOperator2D(grid, a, b, c, d, e, om, beta_x, beta_v, pec_x, pec_v)


@dataclass
class HestonSolution:
    grid: Grid2D
    times: np.ndarray
    values: np.ndarray
    stages: int
    dt_explicit: float
    surface: np.ndarray | None = None

    def price(self, spot, v):
        """Bilinear interpolation of the valuation-time values."""
        interp = RegularGridInterpolator((self.grid.v, self.grid.x), self.values, method="linear")
        spot, v = np.broadcast_arrays(np.asarray(spot, dtype=float), np.asarray(v, dtype=float))
        out = interp(np.stack([v.ravel(), spot.ravel()], axis=-1)).reshape(spot.shape)
        return out if out.ndim else float(out)


def heston_terminal(payoff: Payoff, grid: Grid2D, smoothing: bool) -> np.ndarray:
    g1 = Grid1D(grid.x)
    row = kreiss_smooth(payoff, g1) if smoothing else payoff(grid.x)
    return np.broadcast_to(row, grid.shape).copy()


def heston_rkl_price(
    model: HestonModel,
    payoff: Payoff,
    grid: Grid2D,
    time: TimeAxis,
    american: bool = True,
    smoothing: bool = True,
    eps: float = 0.0,
    fitting: bool = True,
    stages: int | None = None,
    keep_surface: bool = False,
) -> HestonSolution:
    """March the Heston problem back from maturity with the RKL scheme.

    Coefficients are time-independent, so the operator and the stage count
    are computed once (for the largest step when steps vary).
    """
    op = assemble_heston(model, grid, fitting)
    dt_e = explicit_max_step(op)
    steps = time.steps
    s = stages if stages is not None else stages_for_step(float(steps.max()), dt_e, eps)
    coeffs = cached_coefficients(s, eps)
    f = heston_terminal(payoff, grid, smoothing).ravel()
    obstacle = np.broadcast_to(payoff(grid.x), grid.shape).ravel().copy() if american else None
    n = time.n
    surface = None
    if keep_surface:
        surface = np.empty((n + 1,) + grid.shape)
        surface[n] = f.reshape(grid.shape)
    for j in range(n, 0, -1):
        f = rkl_step(coeffs, op.apply, steps[j - 1], f, obstacle)
        if keep_surface:
            surface[j - 1] = f.reshape(grid.shape)
    return HestonSolution(grid, time.times, f.reshape(grid.shape), s, dt_e, surface)
