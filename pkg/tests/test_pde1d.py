import numpy as np
import pytest

from rklpricer.pde1d import (
    BSModel,
    Grid1D,
    Payoff,
    TimeAxis,
    assemble_bs,
    explicit_max_step,
    kreiss_smooth,
    payoff_values,
    place_strike_on_grid,
)


def test_grid_and_axis_validation():
    with pytest.raises(ValueError):
        Grid1D(np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        Grid1D(np.array([0.0, 2.0, 1.0]))
    with pytest.raises(ValueError):
        TimeAxis(np.array([0.0, 0.0, 1.0]))
    ax = TimeAxis.uniform(4, 2.0)
    assert ax.n == 4
    np.testing.assert_allclose(ax.steps, 0.5)


def test_payoff_validation():
    with pytest.raises(ValueError):
        Payoff.butterfly(110, 90)
    with pytest.raises(ValueError):
        Payoff.put(-1.0)
    with pytest.raises(ValueError):
        Payoff("straddle", (100,))


def test_payoff_values_at_nodes():
    grid = Grid1D(np.array([80.0, 99.9, 100.0, 120.0]))
    assert payoff_values(Payoff.put(100), grid)[2] == 0.0
    assert Payoff.butterfly(90, 110)(100.0) == 10.0
    assert Payoff.digital_call(100)(99.9) == 0.0
    assert Payoff.digital_call(100, 2.5)(100.0) == 2.5
    np.testing.assert_array_equal(Payoff.call(100)(grid.nodes), [0.0, 0.0, 0.0, 20.0])


def test_pure_discounting_operator():
    op = assemble_bs(BSModel(sigma=0.0, r=0.1, mu=0.0), Grid1D.uniform(50, 150, 20))
    np.testing.assert_array_equal(op.lower, 0.0)
    np.testing.assert_array_equal(op.upper, 0.0)
    np.testing.assert_allclose(op.diag, -0.1)
    assert explicit_max_step(op) == pytest.approx(10.0)


def test_interior_row_sums():
    rng = np.random.default_rng(3)
    grid = Grid1D(np.cumsum(rng.uniform(0.5, 2.0, 40)))
    op = assemble_bs(BSModel(sigma=0.3, r=0.07, mu=0.02), grid)
    sums = (op.lower + op.diag + op.upper)[1:-1]
    np.testing.assert_allclose(sums, -0.07, rtol=0, atol=1e-12 * np.max(np.abs(op.diag)))


def test_exact_on_linear_function():
    rng = np.random.default_rng(4)
    grid = Grid1D(np.cumsum(rng.uniform(0.5, 2.0, 30)) + 10)
    mu, r = 0.03, 0.08
    op = assemble_bs(BSModel(sigma=0.25, r=r, mu=mu), grid)
    x = grid.nodes
    np.testing.assert_allclose(op.apply(x)[1:-1], (mu - r) * x[1:-1], rtol=1e-12)


def test_explicit_bound_pure_diffusion():
    sigma, x_max, m = 0.3, 200.0, 100
    op = assemble_bs(BSModel(sigma=sigma, r=0.0, mu=0.0), Grid1D.uniform(0.0, x_max, m))
    h = x_max / m
    # interior maximum sits one node in from x_max
    x = x_max - h
    assert explicit_max_step(op) == pytest.approx(h**2 / (sigma**2 * x**2), rel=1e-12)


def test_explicit_bound_unbounded():
    op = assemble_bs(BSModel(sigma=0.0, r=0.0, mu=0.0), Grid1D.uniform(1, 2, 4))
    with pytest.raises(ValueError):
        explicit_max_step(op)


def test_off_diagonals_nonnegative_on_test_grids():
    for sigma, r, x_max, m in ((0.2, 0.05, 500.0, 500), (0.8, 0.1, 350.0, 1072), (0.4, 0.05, 332.0, 500)):
        grid = Grid1D.uniform(0.0, x_max, m)
        op = assemble_bs(BSModel(sigma=sigma, r=r), grid)
        x, h = grid.nodes[1:-1], grid.h[1:]
        dominated = r * h * x <= sigma**2 * x**2
        assert np.all(op.lower[1:-1][dominated] >= 0)
        assert np.all(op.upper[1:-1][dominated] >= 0)


def test_kreiss_keeps_constants_and_linears():
    grid = Grid1D.uniform(120.0, 180.0, 30)
    np.testing.assert_allclose(kreiss_smooth(Payoff.digital_call(100, 3.0), grid), 3.0)
    np.testing.assert_allclose(kreiss_smooth(Payoff.call(100), grid)[1:-1], grid.nodes[1:-1] - 100, rtol=1e-14)


def test_kreiss_digital_at_node_is_half():
    grid = Grid1D.uniform(90.0, 110.0, 20)
    f = kreiss_smooth(Payoff.digital_call(100.0, 2.0), grid)
    assert f[grid.index_of(100.0)] == pytest.approx(1.0)


def test_kreiss_put_kink_cell_average():
    grid = Grid1D.uniform(90.0, 110.0, 20)
    f = kreiss_smooth(Payoff.put(100.0), grid)
    # average of max(100 - x, 0) over [99.5, 100.5] is 0.125
    assert f[grid.index_of(100.0)] == pytest.approx(0.125)


def test_place_strike_on_grid():
    grid = Grid1D.uniform(0.0, 350.0, 269)
    placed = place_strike_on_grid(grid, 100.0)
    assert placed.m == 270
    assert placed.index_of(100.0) is not None
    assert place_strike_on_grid(placed, 100.0).m == 270
    with pytest.raises(ValueError):
        place_strike_on_grid(grid, -1.0)
