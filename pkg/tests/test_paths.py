import numpy as np
import pytest

from subquad_bsde.paths import RegressionBasis, build_grid, regress_conditional, sample_paths


def test_uniform_grid_nodes():
    grid = build_grid(1.0, 4, "uniform")
    assert np.allclose(grid.nodes, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert grid.steps == 4


def test_minimal_grid():
    grid = build_grid(1.0, 1, "uniform")
    assert np.array_equal(grid.nodes, [0.0, 1.0])


def test_geometric_grid_invariants():
    grid = build_grid(2.0, 8, "geometric", ratio=0.5)
    assert np.all(np.diff(grid.nodes) > 0.0)
    assert grid.nodes[0] == 0.0
    assert grid.nodes[-1] == 2.0
    # steps shrink toward the horizon
    assert np.all(np.diff(grid.dt) < 0.0)


@pytest.mark.parametrize("horizon,steps", [(-1.0, 4), (0.0, 4), (1.0, 0)])
def test_grid_rejects_bad_arguments(horizon, steps):
    with pytest.raises(ValueError):
        build_grid(horizon, steps)


def test_sampling_is_reproducible():
    grid = build_grid(1.0, 8, "uniform")
    a = sample_paths(grid, 1, 100, 42)
    b = sample_paths(grid, 1, 100, 42)
    assert np.array_equal(a.increments, b.increments)


def test_path_streams_do_not_depend_on_count():
    grid = build_grid(1.0, 8, "uniform")
    small = sample_paths(grid, 2, 10, 9)
    large = sample_paths(grid, 2, 50, 9)
    assert np.array_equal(small.increments, large.increments[:10])


def test_increment_variance_within_five_standard_errors():
    grid = build_grid(1.0, 1, "uniform")
    bundle = sample_paths(grid, 1, 100_000, 3)
    sample_var = bundle.increments.var()
    se = 1.0 * np.sqrt(2.0 / (bundle.count - 1))
    assert abs(sample_var - 1.0) < 5.0 * se


def test_cross_coordinate_covariance_small():
    grid = build_grid(1.0, 4, "uniform")
    bundle = sample_paths(grid, 3, 10_000, 17)
    inc = bundle.increments
    dt = grid.dt[0]
    for a in range(3):
        for b in range(a + 1, 3):
            cov = np.mean(inc[:, :, a] * inc[:, :, b])
            se = dt / np.sqrt(bundle.count * grid.steps)
            assert abs(cov) < 5.0 * se


def test_terminal_mean_is_martingale_consistent():
    grid = build_grid(2.0, 16, "uniform")
    bundle = sample_paths(grid, 1, 50_000, 23)
    terminal = bundle.terminal()[:, 0]
    se = np.sqrt(grid.horizon / bundle.count)
    assert abs(terminal.mean()) < 5.0 * se


def test_levels_start_at_zero_and_cumulate():
    grid = build_grid(1.0, 5, "uniform")
    bundle = sample_paths(grid, 2, 50, 1)
    lv = bundle.levels()
    assert np.all(lv[:, 0, :] == 0.0)
    assert np.allclose(lv[:, -1, :], bundle.increments.sum(axis=1))


def test_constant_regression():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, 500)
    feats = np.stack([np.ones(500), x], axis=1)
    _, fitted = regress_conditional(np.full(500, 3.7), feats)
    assert np.allclose(fitted, 3.7, atol=1e-12)


def test_exact_linear_fit():
    rng = np.random.default_rng(1)
    x = rng.uniform(-2, 2, 1000)
    feats = np.stack([np.ones(1000), x], axis=1)
    coef, fitted = regress_conditional(2.0 * x, feats)
    assert np.allclose(coef, [0.0, 2.0], atol=1e-10)
    assert np.allclose(fitted, 2.0 * x, atol=1e-10)


def test_bin_regression_matches_analytic_bin_means():
    rng = np.random.default_rng(2)
    x = rng.uniform(0.0, 1.0, 100_000)
    basis = RegressionBasis("piecewise-constant-bins", 10, lo=0.0, hi=1.0)
    feats = basis.features(0.0, x[:, None])
    _, fitted = regress_conditional(x ** 2, feats)
    midpoints = (np.floor(x * 10) + 0.5) / 10.0
    assert np.max(np.abs(fitted - midpoints ** 2)) < 0.02


def test_regression_idempotent():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(2000)
    feats = np.stack([np.ones(2000), x, x ** 2], axis=1)
    _, fitted = regress_conditional(np.sin(x), feats)
    _, refit = regress_conditional(fitted, feats)
    assert np.max(np.abs(refit - fitted)) < 1e-10


def test_rank_deficient_minimum_norm():
    # duplicate column: lstsq must not fail, coefficients are minimum norm
    rng = np.random.default_rng(4)
    x = rng.standard_normal(300)
    feats = np.stack([x, x], axis=1)
    coef, fitted = regress_conditional(2.0 * x, feats)
    assert np.allclose(fitted, 2.0 * x, atol=1e-10)
    assert np.allclose(coef, [1.0, 1.0], atol=1e-10)


def test_empty_bin_fits_zero():
    basis = RegressionBasis("piecewise-constant-bins", 4, lo=0.0, hi=1.0)
    x = np.array([0.1, 0.1, 0.9])        # middle bins empty
    feats = basis.features(0.0, x[:, None])
    coef, fitted = regress_conditional(np.array([1.0, 1.0, 5.0]), feats)
    assert np.allclose(fitted, [1.0, 1.0, 5.0])
    assert coef[1] == 0.0 and coef[2] == 0.0


def test_regression_rejects_empty_input():
    with pytest.raises(ValueError):
        regress_conditional(np.array([]), np.zeros((0, 2)))
