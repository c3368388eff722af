import itertools

import numpy as np
import pytest

from kantlab import (
    BalanceError,
    DiscreteMeasure,
    DomainError,
    LinearProgram,
    TransportPlan,
    kr_norm,
    kr_to_segment,
    load_cost_csv,
    lp_solve,
    mixture,
    segment_kr_min_1d,
    segment_kr_min_grid,
    solve_transport,
    total_variation,
    verify_strong_monotonicity,
    wasserstein1,
)
from kantlab.measures import GridDensity1D

from conftest import random_prob


def _vertex_enumeration_min(c, A, b, ub):
    """Brute-force LP oracle: min c.x over {Ax = b, 0 <= x <= ub} by
    enumerating basic solutions (free variables at a bound)."""
    n = len(c)
    m = A.shape[0]
    best = None
    for basis in itertools.combinations(range(n), m):
        nonbasis = [j for j in range(n) if j not in basis]
        for settings in itertools.product([0.0, ub], repeat=len(nonbasis)):
            rhs = b - A[:, nonbasis] @ np.asarray(settings)
            try:
                xb = np.linalg.solve(A[:, list(basis)], rhs)
            except np.linalg.LinAlgError:
                continue
            if np.any(xb < -1e-9) or np.any(xb > ub + 1e-9):
                continue
            x = np.zeros(n)
            x[list(basis)] = xb
            x[nonbasis] = settings
            val = float(c @ x)
            if best is None or val < best:
                best = val
    return best


def test_lp_solve_matches_vertex_enumeration():
    rng = np.random.default_rng(7)
    for _ in range(30):
        n, m = 5, 2
        A = rng.normal(size=(m, n))
        x0 = rng.uniform(0.1, 0.9, size=n)
        b = A @ x0  # feasible by construction
        c = rng.normal(size=n)
        sol = lp_solve(LinearProgram(c, A_eq=A, b_eq=b, bounds=(0, 1.0)))
        assert sol.status == "optimal"
        oracle = _vertex_enumeration_min(c, A, b, 1.0)
        assert sol.value == pytest.approx(oracle, abs=1e-7)


def test_lp_solve_reports_infeasible_and_unbounded():
    sol = lp_solve(LinearProgram(np.array([1.0]), A_eq=np.array([[1.0]]),
                                 b_eq=np.array([-1.0])))
    assert sol.status == "infeasible"
    sol = lp_solve(LinearProgram(np.array([-1.0]), bounds=(0, None)))
    assert sol.status == "unbounded"


def test_transport_permutation_brute_force_5x5():
    rng = np.random.default_rng(3)
    mu = DiscreteMeasure(np.arange(5.0)[:, None], np.full(5, 0.2))
    nu = DiscreteMeasure(np.arange(5.0)[:, None] + 0.3, np.full(5, 0.2))
    for _ in range(5):
        c = rng.uniform(0, 1, size=(5, 5))
        plan = solve_transport(c, mu, nu)
        # equal weights: the optimum is attained at a permutation
        best = min(sum(c[i, p[i]] for i in range(5)) * 0.2
                   for p in itertools.permutations(range(5)))
        assert plan.value == pytest.approx(best, abs=1e-12)


def test_transport_duality_and_monotonicity():
    rng = np.random.default_rng(11)
    for _ in range(20):
        n, m = rng.integers(2, 9, size=2)
        mu = random_prob(rng, n)
        nu = random_prob(rng, m)
        c = rng.uniform(0, 2, size=(mu.n_atoms, nu.n_atoms))
        plan = solve_transport(c, mu, nu)
        dual = plan.phi @ mu.weights + plan.psi @ nu.weights
        assert abs(plan.value - dual) < 1e-8
        assert plan.marginal_defect() < 1e-9
        assert verify_strong_monotonicity(plan, c)


def test_monotonicity_rejects_anti_optimal_plan():
    mu = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    nu = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    c = np.array([[0.0, 1.0], [1.0, 0.0]])
    good = solve_transport(c, mu, nu)
    assert verify_strong_monotonicity(good, c)
    bad = TransportPlan(mu, nu, np.array([[0.0, 0.5], [0.5, 0.0]]),
                        phi=good.phi, psi=good.psi)
    assert not verify_strong_monotonicity(bad, c)


def test_transport_mass_mismatch_rejected():
    mu = DiscreteMeasure([[0.0]], [1.0])
    nu = DiscreteMeasure([[0.0]], [0.5])
    with pytest.raises(BalanceError):
        solve_transport(np.ones((1, 1)), mu, nu)


def test_load_cost_csv(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("0.0,1.5\n2.0,0.25\n")
    c = load_cost_csv(path)
    assert np.array_equal(c, [[0.0, 1.5], [2.0, 0.25]])
    path.write_text("0.0,inf\n")
    with pytest.raises(DomainError):
        load_cost_csv(path)


def test_kr_simple_values():
    p = DiscreteMeasure([[0.0]], [1.0])
    q = DiscreteMeasure([[0.5]], [1.0])
    # small separation: the Lipschitz constraint binds, kr = distance
    assert kr_norm(p, q) == pytest.approx(0.5, abs=1e-9)
    far = DiscreteMeasure([[10.0]], [1.0])
    # far apart: the |f| <= 1 bound caps the norm at 2
    assert kr_norm(p, far) == pytest.approx(2.0, abs=1e-9)
    assert total_variation(p, far) == pytest.approx(2.0, abs=0)
    assert wasserstein1(p, far) == pytest.approx(10.0, abs=1e-9)


def test_kr_equals_w1_on_small_diameter_supports():
    rng = np.random.default_rng(5)
    for _ in range(10):
        p = random_prob(rng, 4)
        q = random_prob(rng, 3)
        assert kr_norm(p, q) == pytest.approx(wasserstein1(p, q), abs=1e-8)


def test_kr_to_segment_matches_dense_scan():
    rng = np.random.default_rng(9)
    for _ in range(5):
        p = random_prob(rng, 3)
        e0 = random_prob(rng, 3)
        e1 = random_prob(rng, 3)
        value, t_star = kr_to_segment(p, e0, e1)
        ts = np.linspace(0, 1, 201)
        scan = min(kr_norm(p, mixture([e0, e1], [t, 1 - t])) for t in ts)
        assert value <= scan + 1e-8
        direct = kr_norm(p, mixture([e0, e1], [t_star, 1 - t_star]))
        assert value == pytest.approx(direct, abs=1e-7)


def test_segment_fast_path_matches_lp():
    rng = np.random.default_rng(13)
    for _ in range(10):
        pos = np.sort(rng.uniform(0, 1, size=6))
        pw = rng.dirichlet(np.ones(6))
        e0 = rng.dirichlet(np.ones(6))
        e1 = rng.dirichlet(np.ones(6))
        fast, t_fast = segment_kr_min_1d(pos, pw, e0, e1)
        lp_val, _ = kr_to_segment(
            DiscreteMeasure(pos[:, None], pw),
            DiscreteMeasure(pos[:, None], e0),
            DiscreteMeasure(pos[:, None], e1),
        )
        assert fast == pytest.approx(lp_val, abs=1e-8)


def test_segment_fast_path_requires_small_diameter():
    with pytest.raises(DomainError):
        segment_kr_min_1d(np.array([0.0, 5.0]), np.array([1.0, 0.0]),
                          np.array([1.0, 0.0]), np.array([0.0, 1.0]))


def test_segment_grid_wrapper():
    p = GridDensity1D(0.0, 1.0, [1.0, 1.0])
    e0 = GridDensity1D(0.0, 1.0, [2.0, 0.0])
    e1 = GridDensity1D(0.0, 1.0, [0.0, 2.0])
    value, t = segment_kr_min_grid(p, e0, e1)
    # p is the midpoint of the segment, so the distance is zero at t = 1/2
    assert value == pytest.approx(0.0, abs=1e-12)
    assert t == pytest.approx(0.5, abs=1e-9)
    with pytest.raises(DomainError):
        segment_kr_min_grid(p, GridDensity1D(0.0, 2.0, [1.0, 0.0]), e1)
