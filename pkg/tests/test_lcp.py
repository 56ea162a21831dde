import numpy as np
import pytest

from rklpricer.bs1d import solve_bs
from rklpricer.lcp import (
    ConvergenceError,
    NonMonotoneObstacleError,
    PsorConfig,
    SchemeSelector,
    brennan_schwartz_solve,
    implicit_step,
    psor_solve,
    rannacher_run,
    thomas_solve,
)
from rklpricer.pde1d import BSModel, Grid1D, Payoff, TimeAxis, TridiagonalOperator, assemble_bs

PUT = Payoff.put(100.0)
GRID = Grid1D.uniform(0.0, 500.0, 500)
MODEL = BSModel(sigma=0.2, r=0.05)


def test_thomas_identity_and_hand_system():
    v = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(thomas_solve(np.zeros(3), np.ones(3), np.zeros(3), v), v)
    # [[2,1,0],[1,3,1],[0,1,2]] x = [3,5,3] has x = [1,1,1]
    x = thomas_solve([0, 1, 1], [2, 3, 2], [1, 1, 0], [3, 5, 3])
    np.testing.assert_allclose(x, 1.0, rtol=0, atol=1e-14)


def test_thomas_zero_pivot():
    with pytest.raises(ZeroDivisionError):
        thomas_solve([0, 1], [0, 1], [1, 0], [1, 1])


def test_brennan_schwartz_without_obstacle_is_thomas():
    lo, di, up = -np.full(5, 0.3), np.full(5, 1.7), -np.full(5, 0.4)
    b = np.arange(5.0)
    np.testing.assert_array_equal(
        brennan_schwartz_solve(lo, di, up, b, np.full(5, -np.inf)), thomas_solve(lo, di, up, b)
    )


def test_brennan_schwartz_rejects_non_monotone_obstacle():
    with pytest.raises(NonMonotoneObstacleError):
        brennan_schwartz_solve(np.zeros(3), np.ones(3), np.zeros(3), np.zeros(3), np.array([0.0, 1.0, 0.0]))


def _lcp_check(lo, di, up, rhs, obstacle, x, tol):
    res = TridiagonalOperator(np.asarray(lo, float), np.asarray(di, float), np.asarray(up, float)).apply(x) - rhs
    assert np.all(x >= obstacle)
    assert np.all(res >= -tol)
    assert np.max(np.abs(np.minimum(x - obstacle, res))) <= tol


@pytest.mark.parametrize("kind", ["put", "call"])
def test_brennan_schwartz_complementarity(kind):
    grid = Grid1D.uniform(0.0, 300.0, 150)
    payoff = Payoff(kind, (100.0,))
    op = assemble_bs(BSModel(sigma=0.3, r=0.05, mu=-0.05 if kind == "call" else None), grid)
    k = 0.05
    lo, di, up = -k * op.lower, 1 - k * op.diag, -k * op.upper
    F = payoff(grid.nodes)
    x = brennan_schwartz_solve(lo, di, up, F, F)
    _lcp_check(lo, di, up, F, F, x, 1e-12 * 300)


def test_far_boundary_contact_is_resolved():
    # the upper boundary row pushes x_max below zero, so the put LCP touches
    # the obstacle at both ends; a single sweep would get x_{m-1} wrong
    grid = Grid1D.uniform(0.0, 350.0, 67)
    op = assemble_bs(BSModel(sigma=0.8, r=0.1), grid)
    k = 0.01
    F = PUT(grid.nodes)
    f = F.copy()
    for _ in range(25):
        rhs = f + 0.5 * k * op.apply(f)
        lo, di, up = -0.5 * k * op.lower, 1 - 0.5 * k * op.diag, -0.5 * k * op.upper
        f = brennan_schwartz_solve(lo, di, up, rhs, F)
        _lcp_check(lo, di, up, rhs, F, f, 1e-10)


def test_psor_unconstrained_gauss_seidel_matches_thomas():
    rng = np.random.default_rng(0)
    n = 30
    lo, up = -rng.uniform(0, 1, n), -rng.uniform(0, 1, n)
    di = np.abs(lo) + np.abs(up) + 1.0
    b = rng.normal(size=n)
    cfg = PsorConfig(omega=1.0)
    x = psor_solve(lo, di, up, b, np.full(n, -np.inf), cfg)
    np.testing.assert_allclose(x, thomas_solve(lo, di, up, b), rtol=0, atol=10 * cfg.tol)


def test_psor_reports_non_convergence():
    grid = Grid1D.uniform(0.0, 300.0, 100)
    op = assemble_bs(BSModel(sigma=0.3, r=0.05), grid)
    F = PUT(grid.nodes)
    with pytest.raises(ConvergenceError, match="residual"):
        psor_solve(-op.lower, 1 - op.diag, -op.upper, F, F, PsorConfig(max_iter=3))


def test_psor_relaxation_range():
    with pytest.raises(ValueError):
        PsorConfig(omega=2.0)


def test_psor_complementarity():
    grid = Grid1D.uniform(0.0, 300.0, 100)
    op = assemble_bs(BSModel(sigma=0.3, r=0.05), grid)
    k = 0.01
    lo, di, up = -k * op.lower, 1 - k * op.diag, -k * op.upper
    F = PUT(grid.nodes)
    x = psor_solve(lo, di, up, F, F)
    _lcp_check(lo, di, up, F, F, x, 1e-8)


def test_implicit_step_zero_step_is_identity():
    op = assemble_bs(MODEL, GRID)
    f = PUT(GRID.nodes)
    np.testing.assert_array_equal(implicit_step("CN", op, 0.0, f, f), f)
    with pytest.raises(ValueError):
        implicit_step("RKL", op, 0.1, f)


def test_two_step_rannacher_is_four_euler_half_steps():
    op = assemble_bs(MODEL, GRID)
    F = PUT(GRID.nodes)
    surf = rannacher_run(lambda t: op, np.array([0.0, 0.5, 1.0]), F, F)
    f = F
    for _ in range(4):
        f = implicit_step("EULER", op, 0.25, f, F)
    np.testing.assert_array_equal(surf[0], f)


def test_scheme_selector_rules():
    with pytest.raises(ValueError):
        SchemeSelector("RKL", "psor")
    with pytest.raises(ValueError):
        SchemeSelector("CN", "projection")
    with pytest.raises(ValueError):
        SchemeSelector("BDF2", "none")


@pytest.mark.parametrize(
    "tag,lcp,steps,expected",
    [
        ("CN", "brennan-schwartz", 20, 6.07288219),
        ("RAN", "brennan-schwartz", 20, 6.08012467),
        ("RAN", "brennan-schwartz", 80, 6.08635966),
        ("RAN", "psor", 640, 6.08742806),
    ],
)
def test_american_put_reference_prices(tag, lcp, steps, expected):
    sol = solve_bs(MODEL, PUT, GRID, TimeAxis.uniform(steps, 1.0), SchemeSelector(tag, lcp))
    assert sol.price(100.0) == pytest.approx(expected, abs=1e-6)


def test_rannacher_psor_agrees_with_brennan_schwartz():
    axis = TimeAxis.uniform(80, 1.0)
    a = solve_bs(MODEL, PUT, GRID, axis, SchemeSelector("RAN", "brennan-schwartz")).price(100.0)
    b = solve_bs(MODEL, PUT, GRID, axis, SchemeSelector("RAN", "psor")).price(100.0)
    assert abs(a - b) < 1e-6
