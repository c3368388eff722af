import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kantlab import (
    DiscreteMeasure,
    DomainError,
    LevelFunctional,
    PotentialFunction1D,
    check_convex_order_1d,
    check_convex_order_lp,
    level_set_convexity_probe,
    mean_preserving_split,
    quick_dominated_1d,
)

from conftest import random_prob


def _assert_valid_positive(cert, mu, nu, tol=1e-9):
    assert cert.dominated
    pi = cert.coupling.weights
    assert np.abs(pi.sum(axis=1) - mu.weights).max() < tol
    assert np.abs(pi.sum(axis=0) - nu.weights).max() < tol
    for i, wi in enumerate(mu.weights):
        if wi <= 1e-12:
            continue
        bary = pi[i] @ nu.atoms / wi
        assert np.max(np.abs(bary - mu.atoms[i])) < tol


def _assert_valid_negative(cert, mu, nu):
    assert not cert.dominated
    # the witness is a max of affine pieces, hence convex; validity is
    # exactly a positive integral gap
    assert cert.witness_violation(mu, nu) > 0


def test_reflexivity():
    m = DiscreteMeasure([[0.0], [1.0], [2.5]], [0.2, 0.3, 0.5])
    assert check_convex_order_1d(m, m).dominated
    assert check_convex_order_lp(m, m).dominated
    assert quick_dominated_1d(m, m)


def test_mean_shift_not_dominated():
    mu = DiscreteMeasure([[0.0]], [1.0])
    nu = DiscreteMeasure([[1.0]], [1.0])
    for cert in (check_convex_order_1d(mu, nu), check_convex_order_lp(mu, nu)):
        _assert_valid_negative(cert, mu, nu)


def test_dirac_dominated_by_spread():
    mu = DiscreteMeasure([[0.5]], [1.0])
    nu = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    _assert_valid_positive(check_convex_order_1d(mu, nu), mu, nu)
    _assert_valid_positive(check_convex_order_lp(mu, nu), mu, nu)
    # and never the reverse
    _assert_valid_negative(check_convex_order_1d(nu, mu), nu, mu)
    _assert_valid_negative(check_convex_order_lp(nu, mu), nu, mu)


def test_split_is_dominating_dilation():
    rng = np.random.default_rng(2)
    for _ in range(10):
        mu = random_prob(rng, 4)
        nu = mean_preserving_split(mu, int(rng.integers(0, 4)),
                                   rng.uniform(0.1, 0.5), rng.uniform(0.2, 0.8))
        assert nu.mean() == pytest.approx(mu.mean(), abs=1e-12)
        _assert_valid_positive(check_convex_order_1d(mu, nu), mu, nu)
        assert quick_dominated_1d(mu, nu)


def test_transitivity_along_split_chain():
    rng = np.random.default_rng(4)
    mu = random_prob(rng, 3)
    nu = mu
    for _ in range(3):
        nu = mean_preserving_split(nu, int(rng.integers(0, nu.n_atoms)),
                                   rng.uniform(0.05, 0.3))
    _assert_valid_positive(check_convex_order_lp(mu, nu), mu, nu)


def test_checkers_agree_on_random_pairs():
    rng = np.random.default_rng(6)
    for _ in range(30):
        mu = random_prob(rng, int(rng.integers(1, 5)))
        nu = random_prob(rng, int(rng.integers(1, 5)))
        a = check_convex_order_1d(mu, nu)
        b = check_convex_order_lp(mu, nu)
        assert a.dominated == b.dominated
        assert quick_dominated_1d(mu, nu) == a.dominated


def test_lp_checker_2d():
    mu = DiscreteMeasure([[0.5, 0.5]], [1.0])
    corners = DiscreteMeasure([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
                              np.full(4, 0.25))
    _assert_valid_positive(check_convex_order_lp(mu, corners), mu, corners)
    _assert_valid_negative(check_convex_order_lp(corners, mu), corners, mu)


def test_dimension_mismatch_rejected():
    mu = DiscreteMeasure([[0.0]], [1.0])
    nu = DiscreteMeasure([[0.0, 0.0]], [1.0])
    with pytest.raises(DomainError):
        check_convex_order_lp(mu, nu)
    with pytest.raises(DomainError):
        check_convex_order_1d(mu, nu)


def test_certificate_json():
    mu = DiscreteMeasure([[0.5]], [1.0])
    nu = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    pos = check_convex_order_1d(mu, nu).to_json()
    neg = check_convex_order_1d(nu, mu).to_json()
    assert "martingale_coupling" in pos
    assert "convex_function" in neg


@settings(deadline=None, max_examples=60)
@given(st.floats(-2.0, 3.0), st.floats(-2.0, 3.0))
def test_potential_function_convexity_and_bounds(k1, k2):
    m = DiscreteMeasure([[0.0], [0.4], [1.0]], [0.25, 0.5, 0.25])
    u = PotentialFunction1D(m)
    mid = 0.5 * (k1 + k2)
    v1, v2, vm = u([k1])[0], u([k2])[0], u([mid])[0]
    assert vm <= 0.5 * (v1 + v2) + 1e-12
    # u(k) >= |mean - k| (Jensen) with equality outside the support hull
    assert vm >= abs(float(m.mean()[0]) - mid) - 1e-12


def test_level_probe_flat_on_levels_of_affine_functional():
    g = LevelFunctional(np.array([0.0, 1.0, 3.0]))
    report = level_set_convexity_probe(g, 3, trials=300, seed=1, mode="level")
    assert report.pairs_tested > 50
    assert report.max_deviation < 1e-12


def test_level_probe_sublevel_modes():
    base = np.array([0.0, 1.0, 3.0])
    convex = LevelFunctional(base, transform=abs)
    report = level_set_convexity_probe(convex, 3, trials=300, seed=2, mode="sublevel")
    assert report.max_deviation < 1e-12
    concave = LevelFunctional(base, transform=lambda v: -(v - 1.5) ** 2)
    report = level_set_convexity_probe(concave, 3, trials=300, seed=2, mode="sublevel")
    assert report.max_deviation > 1e-6
    with pytest.raises(DomainError):
        level_set_convexity_probe(convex, 3, trials=1, seed=0, mode="bogus")
