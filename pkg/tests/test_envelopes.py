import numpy as np
import pytest

from subquad_bsde.envelopes import (ScalarFunction, construct_A2_envelope,
                                    construct_A3_envelope,
                                    lemmaA1_check, lemmaA2_check,
                                    lemmaA2_intermediate_checks, lemmaA3_check,
                                    lemmaA3_intermediate_checks, lemma_samples,
                                    remainder_check, second_difference_convexity)
from subquad_bsde.errors import InvalidHypothesisError
from subquad_bsde.families import (A1_FAMILIES, A2_FAMILIES, A2_FALSIFIERS, A3_FAMILIES,
                                   A3_FALSIFIERS, FAMILY_REGISTRY)


@pytest.fixture(scope="module")
def samples():
    return lemma_samples(20_000, seed=11)


def test_a1_hand_margin():
    f = A1_FAMILIES["abs"]()
    x1, x2, th = np.array([1.0]), np.array([-1.0]), np.array([0.5])
    r = lemmaA1_check(f, 1.0, 1.0, (x1, x2, th))
    # LHS = 1, RHS = 2*3 + 2*1 + 1 = 9
    assert r.passed and r.worst_margin == pytest.approx(8.0)


def test_a1_gate_off_side(samples):
    f = A1_FAMILIES["exp-decay"]()
    x1, x2, th = samples
    off = x1 <= th * x2
    r = lemmaA1_check(f, f.k1, f.k2, (x1[off], x2[off], th[off]))
    assert r.passed and r.worst_margin >= 0.0


def test_a1_linear_sweep(samples):
    for c in (0.0, 0.3, 1.0):
        f = ScalarFunction(lambda x, c=c: c * x, name=f"lin{c}", k1=1.0, k2=1.0)
        assert lemmaA1_check(f, 1.0, 1.0, samples).passed


def test_a1_hypothesis_selfcheck():
    f = ScalarFunction(lambda x: np.where(x <= 0, -np.cbrt(np.abs(x)), 0.0),
                       name="cbrt", k1=1.0, k2=1.0)
    with pytest.raises(InvalidHypothesisError) as err:
        lemmaA1_check(f, 1.0, 1.0, lemma_samples(100, 0))
    assert err.value.witness is not None


def test_a2_envelope_hand_values():
    f = A2_FAMILIES["abs"]()
    con = construct_A2_envelope(f, 1.0, 1.0)
    assert con.k0 == pytest.approx(1.0)
    assert con.x0 == pytest.approx(0.0)
    assert float(np.asarray(con.g(0.0))) == pytest.approx(2.0)
    assert float(np.asarray(con.g(1.0))) == pytest.approx(1.0)
    assert float(np.asarray(con.g(-1.0))) == pytest.approx(1.0)
    # linear slopes +-1 inside the band
    assert float(np.asarray(con.g(0.5))) == pytest.approx(1.5)


def test_a2_even_function_centers_apex():
    f = A2_FAMILIES["square-sine-band"]()
    con = construct_A2_envelope(f, f.a, f.k)
    assert con.x0 == pytest.approx(0.0)


def test_a2_shift_properties():
    f = A2_FAMILIES["abs"]()
    con = construct_A2_envelope(f, 1.0, 1.0)
    assert float(np.asarray(con.gbar(0.0))) == 0.0
    # extension below zero runs with slope -k0
    assert float(np.asarray(con.gbar1(-1.0))) == pytest.approx(1.0)
    ok1, _, _ = second_difference_convexity(con.gbar1, -10, 10, 1001)
    ok2, _, _ = second_difference_convexity(con.gbar2, -10, 10, 1001)
    assert ok1 and ok2


def test_a2_envelope_exact_outside_band(samples):
    for name, mk in A2_FAMILIES.items():
        f = mk(0)
        con = construct_A2_envelope(f, f.a, f.k)
        xs = np.concatenate([np.linspace(-8, -f.a, 200), np.linspace(f.a, 8, 200)])
        assert np.max(np.abs(con.g(xs) - f(xs))) < 1e-12, name
        assert np.max(np.abs(con.h(xs))) == 0.0, name


def test_a2_knot_continuity_random_f():
    for seed in range(20):
        f = A2_FAMILIES["convex-ray-spline"](seed)
        con = construct_A2_envelope(f, f.a, f.k)
        for knot in (-f.a, con.x0, f.a):
            left = float(np.asarray(con.g(knot - 1e-9)))
            right = float(np.asarray(con.g(knot + 1e-9)))
            assert abs(left - right) < 1e-6


def test_a2_hand_margin_square():
    f = A2_FAMILIES["square"]()
    con = construct_A2_envelope(f, 0.0, 1.0)
    x1, x2, th = np.array([1.0]), np.array([1.0]), np.array([0.5])
    r = lemmaA2_check(f, 0.0, 1.0, (x1, x2, th), construction=con)
    # LHS = 1, RHS = phi(1) + 2 k0 = 1 + 2 k0 with k0 = k = 1
    assert r.passed and r.worst_margin == pytest.approx(2.0)


def test_a2_main_and_intermediates(samples):
    for name, mk in A2_FAMILIES.items():
        f = mk(1)
        con = construct_A2_envelope(f, f.a, f.k)
        assert lemmaA2_check(f, f.a, f.k, samples, construction=con).passed, name
        inter = lemmaA2_intermediate_checks(con, samples)
        assert all(r.passed for r in inter.values()), (
            name, {k: v.worst_margin for k, v in inter.items() if not v.passed})
        assert remainder_check(con, samples).passed, name


def test_a2_apex_escape_detected():
    # lie about the Lipschitz constant: |f(a)-f(-a)| / (2 k0) lands outside
    f = ScalarFunction(lambda x: 5.0 * x, name="steep", phi=lambda u: 5.0 * np.asarray(u),
                       a=1.0, k=0.1, dminus=0.1, dplus=0.1)
    with pytest.raises(InvalidHypothesisError):
        construct_A2_envelope(f, 1.0, 0.1, selfcheck=False)


def test_a3_envelope_hand_values():
    f = A3_FAMILIES["abs"]()
    con = construct_A3_envelope(f, 1.0, 1.0)
    assert con.k0 == 0.0
    assert float(np.asarray(con.g(0.0))) == pytest.approx(1.0)
    assert float(np.asarray(con.g(0.5))) == pytest.approx(1.0)
    assert float(np.asarray(con.g(2.0))) == pytest.approx(2.0)


def test_a3_hand_margin():
    f = A3_FAMILIES["abs"]()
    x1, x2, th = np.array([2.0]), np.array([-2.0]), np.array([0.5])
    r = lemmaA3_check(f, 1.0, 1.0, (x1, x2, th))
    # LHS = 2; RHS = 4*6 + 4 + 11 + 2 = 41
    assert r.passed and r.worst_margin == pytest.approx(39.0)


def test_a3_constant_function():
    f = ScalarFunction(lambda x: 0.7 + 0.0 * np.asarray(x, dtype=float), name="const",
                       phi=lambda u: 0.7 + 0.0 * np.asarray(u, dtype=float), a=0.0, k=1.0)
    assert lemmaA3_check(f, 0.0, 1.0, lemma_samples(5000, 1)).passed


def test_a3_orientation_and_mirror(samples):
    prim = A3_FAMILIES["asymmetric-v"]()       # f(a) < f(-a)
    mirr = A3_FAMILIES["asymmetric-v-mirror"]()
    for f in (prim, mirr):
        con = construct_A3_envelope(f, f.a, f.k)
        assert con.k0 == pytest.approx(0.6)
        # monotone both sides of the origin
        xs = np.linspace(-6, 0, 300)
        assert np.all(np.diff(con.g(xs)) <= 1e-12)
        xs = np.linspace(0, 6, 300)
        assert np.all(np.diff(con.g(xs)) >= -1e-12)
        assert lemmaA3_check(f, f.a, f.k, samples, construction=con).passed
        assert remainder_check(con, samples).passed


def test_a3_k0_bounded_by_lipschitz():
    for seed in range(30):
        f = A3_FAMILIES["w-band"](seed)
        con = construct_A3_envelope(f, f.a, f.k)
        assert con.k0 <= 2.0 * f.k + 1e-12


def test_a3_main_and_intermediates(samples):
    for name, mk in A3_FAMILIES.items():
        f = mk(2)
        con = construct_A3_envelope(f, f.a, f.k)
        assert lemmaA3_check(f, f.a, f.k, samples, construction=con).passed, name
        inter = lemmaA3_intermediate_checks(con, samples)
        assert all(r.passed for r in inter.values()), (
            name, {k: v.worst_margin for k, v in inter.items() if not v.passed})
        assert remainder_check(con, samples).passed, name


def test_remainder_theta_branches():
    f = A2_FAMILIES["abs"]()
    con = construct_A2_envelope(f, 1.0, 1.0)
    rng = np.random.default_rng(3)
    x2 = rng.uniform(-2.0, 2.0, 500)
    x1 = rng.uniform(-2.0, 2.0, 500)
    for theta in (0.5, 0.9):
        th = np.full(500, theta)
        r = remainder_check(con, (x1, x2, th))
        assert r.passed and r.worst_margin >= 0.0


def test_falsifiers_are_caught():
    with pytest.raises(InvalidHypothesisError):
        construct_A2_envelope(A2_FALSIFIERS["concave-rays"](), 1.0, 1.0)
    with pytest.raises(InvalidHypothesisError):
        construct_A3_envelope(A3_FALSIFIERS["decreasing-right"](), 1.0, 1.0)


def test_randomized_falsifiers_high_detection_rate():
    # flip the rays of admissible A2 splines: the construction self-check must
    # find the convexity break nearly always
    caught = 0
    trials = 20
    for seed in range(trials):
        base = A2_FAMILIES["convex-ray-spline"](seed)
        flipped = ScalarFunction(lambda x, b=base: -b(x), name="flipped",
                                 phi=base.phi, a=base.a, k=base.k,
                                 dminus=-base.dminus, dplus=-base.dplus)
        try:
            construct_A2_envelope(flipped, flipped.a, flipped.k)
        except InvalidHypothesisError:
            caught += 1
    assert caught >= 0.95 * trials


def test_family_registry_is_complete():
    assert set(FAMILY_REGISTRY) == {"A1", "A2", "A3"}
    assert len(FAMILY_REGISTRY["A1"]) >= 6
    assert len(FAMILY_REGISTRY["A2"]) >= 6
    assert len(FAMILY_REGISTRY["A3"]) >= 6
