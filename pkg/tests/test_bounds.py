import math

import numpy as np
import pytest

import subquad_bsde as sq
from subquad_bsde.bounds import (ComparisonPolicy, fhat_process, log_mean_exp,
                                 verify_comparison, verify_fhat_moment,
                                 verify_pointwise_bound, verify_sup_bound)
from subquad_bsde.errors import PreconditionViolationError
from subquad_bsde.generators import TruncationIndex, truncate_generator, truncate_terminal

ZERO = lambda t: 0.0 * np.asarray(t, dtype=float)


@pytest.fixture(scope="module")
def zero_solution(grid24, bundle24, poly_basis):
    return sq.solve_bounded(sq.make_generator("zero", 1.5),
                            sq.make_terminal("zero"), grid24, bundle24, poly_basis)


@pytest.fixture(scope="module")
def zero_constants():
    return sq.derive_constants(1.5, 1.0, ZERO, ZERO)


def test_log_mean_exp_matches_direct():
    logs = np.log(np.array([1.0, 2.0, 3.0]))
    val, se = log_mean_exp(logs)
    assert val == pytest.approx(math.log(2.0))
    assert se > 0.0


def test_log_mean_exp_no_overflow():
    with np.errstate(over="raise"):
        val, _ = log_mean_exp(np.array([1e5, 1e5 + 1.0]))
    assert val == pytest.approx(1e5 + np.logaddexp(0, 1.0) - math.log(2.0))


def test_fhat_degenerate_coefficients(zero_solution):
    prof = sq.make_generator("zero", 1.5).profile
    fh = fhat_process(prof, zero_solution)
    assert np.allclose(fh, 0.0)


def test_fhat_plug_in(grid24, bundle24, poly_basis):
    # Y' = 0, Z' = 0, gamma = 1: fhat = f + 1 since ln(e) = 1
    from subquad_bsde.generators import CoefficientProfile, Generator
    prof = CoefficientProfile(alpha=1.5, beta=ZERO, gamma=lambda t: 1.0 + 0.0 * np.asarray(t),
                              f=lambda t, b: np.full(np.atleast_2d(b).shape[0], 0.3))
    sol = sq.solve_bounded(sq.make_generator("zero", 1.5), sq.make_terminal("zero"),
                           grid24, bundle24, poly_basis)
    fh = fhat_process(prof, sol)
    assert np.allclose(fh, 1.3)


def test_fhat_dominates_f(grid24, bundle24, poly_basis, example2):
    idx = TruncationIndex(8, 8)
    sol = sq.solve_bounded(truncate_generator(example2, idx),
                           truncate_terminal(sq.make_terminal("clamp-bt", bound=2.0), idx),
                           grid24, bundle24, poly_basis)
    prof = example2.profile
    fh = fhat_process(prof, sol)
    levels = bundle24.levels()
    f_conv = prof.convexity_tier()[0]
    for j in (0, 10, 20):
        assert np.all(fh[:, j] >= f_conv(float(grid24.nodes[j]), levels[:, j, :]) - 1e-12)


def test_fhat_moment_trivial_cases(grid24):
    m0 = verify_fhat_moment(np.zeros((500, grid24.steps)), grid24, 2.0, 3.0)
    assert m0.moment.log_value == pytest.approx(0.0)
    m1 = verify_fhat_moment(np.ones((500, grid24.steps)), grid24, 2.0, 3.0)
    assert m1.moment.log_value == pytest.approx(2.0, abs=1e-9)


def test_fhat_moment_jensen_closed_form(grid24):
    # Z' = 0, gamma = 1, T = 1: ln-term moment = e^p, majorant = k_alpha^{delta_p}
    p, astar = 2.0, 3.0
    z_prime = np.zeros((400, grid24.steps, 1))
    chk = verify_fhat_moment(np.zeros((400, grid24.steps)), grid24, p, astar,
                             gamma=lambda t: 1.0 + 0.0 * np.asarray(t), z_prime=z_prime)
    assert chk.ln_moment.log_value == pytest.approx(p, abs=1e-9)
    assert chk.jensen_majorant.log_value == pytest.approx(p * astar / 2.0, abs=1e-9)
    assert chk.jensen_consistent


def test_pointwise_bound_zero_problem(zero_solution, zero_constants):
    r = verify_pointwise_bound(zero_solution, zero_constants,
                               np.zeros(zero_solution.bundle.count),
                               lambda t, b: np.zeros(np.atleast_2d(b).shape[0]))
    assert r.satisfied
    # LHS = 1 + 0, RHS = K * exp(0) with log K = 12
    assert np.allclose(r.margin_min, 12.0, atol=1e-6)


def test_pointwise_bound_constant_terminal(grid24, bundle24, poly_basis, zero_constants):
    c = 1.5
    sol = sq.solve_bounded(sq.make_generator("zero", 1.5),
                           sq.make_terminal("constant", value=c),
                           grid24, bundle24, poly_basis)
    r = verify_pointwise_bound(sol, zero_constants, np.full(bundle24.count, c),
                               lambda t, b: np.zeros(np.atleast_2d(b).shape[0]))
    assert r.satisfied
    # closed forms: log LHS = c^{2/3}; the exponent K c^{2/3} = e^12 c^{2/3}
    # exceeds the conservative cap, so log RHS = log K + 700
    expected = 12.0 + 700.0 - c ** (2.0 / 3.0)
    assert r.margin_min.min() == pytest.approx(expected, abs=1e-6)


def test_sup_bound_zero_problem(zero_solution, zero_constants):
    r = verify_sup_bound(zero_solution, zero_constants,
                         np.zeros(zero_solution.bundle.count),
                         lambda t, b: np.zeros(np.atleast_2d(b).shape[0]), p=2.0)
    assert r.satisfied
    assert np.allclose(r.margin_min, zero_constants.K_p(2.0).log, atol=1e-6)


def test_sup_bound_ode_case(grid24, bundle24, poly_basis, zero_constants):
    sol = sq.solve_bounded(sq.make_generator("linear", 1.5, b_y=-1.0),
                           sq.make_terminal("constant", value=1.0),
                           grid24, bundle24, poly_basis)
    prof = sq.make_generator("linear", 1.5, b_y=-1.0).profile
    cs = sq.derive_constants(1.5, 1.0, prof.beta, prof.gamma)
    r = verify_sup_bound(sol, cs, np.ones(bundle24.count),
                         lambda t, b: np.zeros(np.atleast_2d(b).shape[0]), p=2.0)
    assert r.satisfied


def test_bound_monotone_in_K(zero_solution, zero_constants):
    xi = np.zeros(zero_solution.bundle.count)
    f = lambda t, b: np.zeros(np.atleast_2d(b).shape[0])
    small = verify_pointwise_bound(zero_solution, zero_constants, xi, f)
    bigger = sq.derive_constants(1.5, 1.0, lambda t: 0.5 + 0.0 * np.asarray(t),
                                 lambda t: 0.5 + 0.0 * np.asarray(t))
    big = verify_pointwise_bound(zero_solution, bigger, xi, f)
    assert small.satisfied and big.satisfied
    assert big.margin_min.min() > small.margin_min.min()


def test_log_space_discipline_extreme_constants(grid24, bundle24, poly_basis):
    # overflow-scale K must flow through as logs without materializing exp
    cs = sq.derive_constants(1.3, 1.0, lambda t: 1.0 + 0.0 * np.asarray(t),
                             lambda t: 2.0 + 0.0 * np.asarray(t))
    assert cs.log_K.overflowed
    sol = sq.solve_bounded(sq.make_generator("zero", 1.3),
                           sq.make_terminal("clamp-bt", bound=2.0),
                           grid24, bundle24, poly_basis)
    xi = np.clip(bundle24.terminal()[:, 0], -2, 2)
    with np.errstate(over="raise"):
        r = verify_pointwise_bound(sol, cs, xi,
                                   lambda t, b: np.zeros(np.atleast_2d(b).shape[0]))
    assert r.satisfied


def test_comparison_trivial_pair(grid24, bundle24, poly_basis):
    zero = sq.solve_bounded(sq.make_generator("zero", 1.5), sq.make_terminal("zero"),
                            grid24, bundle24, poly_basis)
    one = sq.solve_bounded(sq.make_generator("zero", 1.5),
                           sq.make_terminal("constant", value=1.0),
                           grid24, bundle24, poly_basis)
    r = verify_comparison(zero, one, xi_values=np.zeros(bundle24.count),
                          xi_prime_values=np.ones(bundle24.count))
    assert r.satisfied and r.violation_fraction == 0.0


def test_comparison_driver_ordering(grid24, bundle24, poly_basis):
    g_lo = sq.make_generator("custom-expression", 1.5, expression="0 - abs(y)")
    g_hi = sq.make_generator("zero", 1.5)
    xi = sq.make_terminal("clamp-bt", bound=2.0)
    lo = sq.solve_bounded(g_lo, xi, grid24, bundle24, poly_basis)
    hi = sq.solve_bounded(g_hi, xi, grid24, bundle24, poly_basis)
    r = verify_comparison(lo, hi)
    assert r.satisfied
    assert r.violation_fraction <= 0.005


def test_comparison_antisymmetric(grid24, bundle24, poly_basis):
    zero = sq.solve_bounded(sq.make_generator("zero", 1.5), sq.make_terminal("zero"),
                            grid24, bundle24, poly_basis)
    one = sq.solve_bounded(sq.make_generator("zero", 1.5),
                           sq.make_terminal("constant", value=1.0),
                           grid24, bundle24, poly_basis)
    forward = verify_comparison(zero, one)
    backward = verify_comparison(one, zero)
    assert forward.satisfied and backward.verdict == "violated"


def test_comparison_precondition_witnesses(grid24, bundle24, poly_basis):
    zero = sq.solve_bounded(sq.make_generator("zero", 1.5), sq.make_terminal("zero"),
                            grid24, bundle24, poly_basis)
    xi = np.zeros(bundle24.count)
    xi_bad = -np.ones(bundle24.count)
    with pytest.raises(PreconditionViolationError) as err:
        verify_comparison(zero, zero, xi_values=xi, xi_prime_values=xi_bad)
    assert 0 < len(err.value.witnesses) <= 10


def test_comparison_policy_without_noise(grid24, bundle24, poly_basis):
    zero = sq.solve_bounded(sq.make_generator("zero", 1.5), sq.make_terminal("zero"),
                            grid24, bundle24, poly_basis)
    r = verify_comparison(zero, zero, ComparisonPolicy(c=0.1, use_fit_noise=False))
    assert r.satisfied


def test_pointwise_one_sided_variant(grid24, bundle24, poly_basis, example1):
    idx = TruncationIndex(32, 32)
    gt = truncate_generator(example1, idx)
    xi = truncate_terminal(sq.make_terminal("clamp-bt", bound=3.0), idx)
    sol = sq.solve_bounded(gt, xi, grid24, bundle24, poly_basis)
    prof = example1.profile
    cs = sq.derive_constants(1.5, 1.0, prof.beta, prof.gamma)
    r = verify_pointwise_bound(sol, cs, xi(bundle24.terminal()), prof.f, "one-sided")
    assert r.bound_id == "pointwise-one-sided"
    assert r.satisfied


def test_pointwise_rejects_unknown_variant(zero_solution, zero_constants):
    with pytest.raises(ValueError):
        verify_pointwise_bound(zero_solution, zero_constants,
                               np.zeros(zero_solution.bundle.count),
                               lambda t, b: np.zeros(np.atleast_2d(b).shape[0]),
                               "sideways")


def test_moment_estimate_validation():
    from subquad_bsde.bounds import MomentEstimate
    m = MomentEstimate(log_value=800.0, se_rel=0.1, p=2.0)
    assert m.overflowed and m.value == math.inf and m.standard_error == math.inf
    with pytest.raises(ValueError):
        MomentEstimate(log_value=1.0, se_rel=-0.1, p=2.0)
