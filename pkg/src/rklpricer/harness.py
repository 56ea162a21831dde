"""Runners behind the command line: pricing, convergence ladders, Greeks
profiles, stability scans and the one-step digital monotonicity experiment."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.stats import norm

from .bs1d import Solution1D, cached_coefficients, solve_bs
from .config import PricingProblem
from .heston import heston_rkl_price
from .pde1d import BSModel, Grid1D, Payoff, TimeAxis, assemble_bs, explicit_max_step, first_derivative, kreiss_smooth, second_derivative
from .rkl import rkl_step, stages_for_step
from .stability import region_stats, scan_region
from .uvm import solve_uvm


def solve_problem(problem: PricingProblem):
    """Run the configured solver; returns the solution object."""
    model, grid, payoff, axis = problem.model(), problem.grid(), problem.payoff(), problem.time_axis()
    sel = problem.selector()
    if problem.kind == "bs":
        return solve_bs(
            model, payoff, grid, axis, sel, american=problem.american, smoothing=problem.smoothing, stages=problem.stages
        )
    if problem.kind == "uvm":
        return solve_uvm(model, payoff, grid, axis, sel.tag, sel.eps, smoothing=problem.smoothing or None)
    return heston_rkl_price(
        model,
        payoff,
        grid,
        axis,
        american=problem.american,
        smoothing=problem.smoothing,
        eps=sel.eps,
        stages=problem.stages,
    )


def price_problem(problem: PricingProblem) -> dict:
    """Prices at the configured spots plus stage and step-bound diagnostics."""
    t0 = time.perf_counter()
    sol = solve_problem(problem)
    elapsed = time.perf_counter() - t0
    if problem.kind == "heston":
        v0 = problem.doc["model"]["v0"]
        prices = [float(sol.price(s, v0)) for s in problem.spots]
        stages, dt_e = [sol.stages], sol.dt_explicit
        spacesteps = [sol.grid.m, sol.grid.n]
    else:
        prices = [float(sol.price(s)) for s in problem.spots]
        stages = list(sol.stages)
        dt_e = float(min(sol.dt_explicit)) if sol.dt_explicit else None
        if dt_e is not None and not math.isfinite(dt_e):
            dt_e = None
        spacesteps = [sol.grid.m]
    out = {
        "spots": problem.spots,
        "prices": prices,
        "stages_used": sorted(set(stages)),
        "dt_explicit": dt_e,
        "spacesteps": spacesteps,
        "timesteps": problem.doc["time"]["steps"],
        "time_s": elapsed,
    }
    if hasattr(sol, "unsettled_steps"):
        out["unsettled_steps"] = sol.unsettled_steps
    return out


@dataclass
class ConvergenceRow:
    spacesteps: int
    timesteps: int
    value: float
    change: float | None = None
    ratio: float | None = None
    error: float | None = None
    time_s: float = 0.0


CONVERGENCE_COLUMNS = tuple(f.name for f in fields(ConvergenceRow))


def ladder_problem(problem: PricingProblem, level: int) -> PricingProblem:
    """Problem refined ``2**level`` times in every space and time direction."""
    doc = problem.to_dict()
    f = 2**level
    doc["grid"]["m"] *= f
    if "n" in doc["grid"]:
        doc["grid"]["n"] *= f
    doc["time"]["steps"] *= f
    return PricingProblem.from_dict(doc)


def add_changes(rows: list[ConvergenceRow], reference: float | None = None) -> list[ConvergenceRow]:
    """Fill change, ratio and error columns in place; returns ``rows``."""
    for i, row in enumerate(rows):
        if i >= 1:
            row.change = row.value - rows[i - 1].value
        if i >= 2 and rows[i].change != 0:
            row.ratio = rows[i - 1].change / row.change
        if reference is not None:
            row.error = row.value - reference
    return rows


def convergence_rows(problem: PricingProblem, levels: int, reference: float | None = None, spot_index: int = 0):
    rows = []
    for lev in range(levels):
        p = ladder_problem(problem, lev)
        res = price_problem(p)
        rows.append(ConvergenceRow(res["spacesteps"][0], res["timesteps"], res["prices"][spot_index], time_s=res["time_s"]))
    return add_changes(rows, reference)


def gamma_profile(sol: Solution1D):
    """Columns ``x, value, delta, gamma`` at the valuation time."""
    f = sol.values
    return {
        "x": sol.grid.nodes,
        "value": f,
        "delta": first_derivative(f, sol.grid),
        "gamma": second_derivative(f, sol.grid),
    }


def bs_digital_call(x, K, r, sigma, tau, rebate=1.0):
    """Closed-form European cash-or-nothing call."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        d2 = (np.log(x / K) + (r - 0.5 * sigma**2) * tau) / (sigma * math.sqrt(tau))
    return rebate * math.exp(-r * tau) * norm.cdf(d2)


CMP_SCHEMES = (("RKL", 0.0), ("RKL", 20.0), ("RKC", 0.1), ("RKC", 2.0))


def cmp_digital(
    stages: int = 111,
    x_min: float = 68.71,
    x_max: float = 145.58,
    m: int = 800,
    sigma: float = 0.25,
    r: float = 0.10,
    K: float = 100.0,
    k: float = 0.01,
    smoothing: bool = True,
    schemes=CMP_SCHEMES,
) -> dict:
    """One step of size ``k`` on a digital call for each scheme at a fixed stage count."""
    grid = Grid1D.uniform(x_min, x_max, m)
    payoff = Payoff.digital_call(K)
    f0 = kreiss_smooth(payoff, grid) if smoothing else payoff(grid.nodes)
    op = assemble_bs(BSModel(sigma=sigma, r=r), grid)
    cols = {"x": grid.nodes, "analytic": bs_digital_call(grid.nodes, K, r, sigma, k)}
    for family, eps in schemes:
        coeffs = cached_coefficients(stages, eps, family)
        cols[f"{family}-{eps:g}"] = rkl_step(coeffs, op.apply, k, f0) if k > 0 else f0.copy()
    return cols


def monotonicity_violations(values: np.ndarray, tol: float = 1e-12) -> int:
    """Number of decreasing consecutive pairs beyond ``tol``."""
    return int(np.sum(np.diff(values) < -tol))


def cmp_min_stages(k: float = 0.01, eps: float = 0.0, **grid_kw) -> int:
    grid = Grid1D.uniform(grid_kw.get("x_min", 68.71), grid_kw.get("x_max", 145.58), grid_kw.get("m", 800))
    op = assemble_bs(BSModel(sigma=grid_kw.get("sigma", 0.25), r=grid_kw.get("r", 0.10)), grid)
    return stages_for_step(k, explicit_max_step(op), eps)


def stability_run(scheme: str, s: int, eps: float, window=None, resolution=(2000, 1000), reference=True):
    """Scan plus statistics; the area ratio is against unshifted RKL at ``s``."""
    sc = scan_region(scheme, s, eps, window, resolution)
    area, avg = region_stats(sc)
    if reference and not (scheme == "RKL" and eps == 0.0):
        ref_area, _ = region_stats(scan_region("RKL", s, 0.0, resolution=resolution))
    else:
        ref_area = area
    stats = {"scheme": scheme, "s": s, "eps": float(eps), "area": area, "area_ratio": area / ref_area, "avg_damping": avg}
    return sc, stats


def columns_to_csv(cols: dict, stream=None) -> str:
    """Write equal-length columns as CSV; returns the text when no stream is given."""
    own = stream is None
    stream = io.StringIO() if own else stream
    writer = csv.writer(stream, lineterminator="\n")
    names = list(cols)
    writer.writerow(names)
    for row in zip(*(np.asarray(cols[n]) for n in names)):
        writer.writerow([repr(float(v)) for v in row])
    return stream.getvalue() if own else ""


def rows_to_csv(rows: list[ConvergenceRow], stream=None) -> str:
    own = stream is None
    stream = io.StringIO() if own else stream
    writer = csv.DictWriter(stream, fieldnames=CONVERGENCE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if v is None else v) for k, v in asdict(row).items()})
    return stream.getvalue() if own else ""
