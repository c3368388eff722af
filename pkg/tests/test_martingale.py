import json

import numpy as np
import pytest

from kantlab import (
    AlignmentError,
    DiscreteMeasure,
    DomainError,
    MomentMap,
    MongeMap,
    OrderViolationError,
    build_martingale_coupling,
    glue,
    pushforward,
)

from conftest import random_prob


def test_deterministic_fibering_fast_path():
    nu = DiscreteMeasure([[-1.0], [0.5], [1.0]], [0.25, 0.5, 0.25])
    sq = MomentMap.from_scalar(lambda y: y ** 2)
    zeta = pushforward(nu, sq)
    coupling = build_martingale_coupling(zeta, nu, sq)
    # each nu atom rides on the row of its own image: residual is exactly 0
    assert coupling.barycenter_residual() == 0.0
    assert coupling.plan.marginal_defect() < 1e-12
    # the row at 1.0 mixes the two preimages +-1 of the squaring map
    i = int(np.argmin(np.abs(coupling.zeta.atoms[:, 0] - 1.0)))
    cond = coupling.conditional(i)
    assert int(np.sum(cond.weights > 0)) == 2


def test_generic_coupling_from_feasibility_lp():
    nu = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    zeta = DiscreteMeasure([[0.25], [0.75]], [0.5, 0.5])
    coupling = build_martingale_coupling(zeta, nu, MomentMap.identity(1))
    assert coupling.barycenter_residual() < 1e-9
    assert coupling.plan.marginal_defect() < 1e-9


def test_order_violation_carries_certificate():
    zeta = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    nu = DiscreteMeasure([[0.5]], [1.0])
    with pytest.raises(OrderViolationError) as exc_info:
        build_martingale_coupling(zeta, nu, MomentMap.identity(1))
    cert = exc_info.value.certificate
    assert cert is not None and not cert.dominated
    assert cert.witness_violation(zeta, pushforward(nu, MomentMap.identity(1))) > 0


def test_dimension_mismatch_rejected():
    zeta = DiscreteMeasure([[0.0, 0.0]], [1.0])
    nu = DiscreteMeasure([[0.0]], [1.0])
    with pytest.raises(DomainError):
        build_martingale_coupling(zeta, nu, MomentMap.identity(1))


def test_glue_matches_rows_and_rejects_strays():
    nu = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    zeta = DiscreteMeasure([[0.5]], [1.0])
    coupling = build_martingale_coupling(zeta, nu, MomentMap.identity(1))
    mu = DiscreteMeasure([[10.0], [20.0]], [0.5, 0.5])
    T = MongeMap(np.array([[0.5], [0.5]]))
    k = glue(T, coupling, mu)
    assert k.n_x == 2
    assert k.conditionals[0].close_to(coupling.conditional(0), tol=1e-12)
    with pytest.raises(AlignmentError):
        glue(MongeMap(np.array([[0.5], [0.9]])), coupling, mu)
    with pytest.raises(DomainError):
        glue(T, coupling, DiscreteMeasure([[0.0]], [1.0]))


def test_coupling_json_includes_moment_values():
    nu = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    zeta = DiscreteMeasure([[0.5]], [1.0])
    coupling = build_martingale_coupling(zeta, nu, MomentMap.identity(1))
    obj = json.loads(coupling.to_json())
    assert obj["F"] == [[0.0], [1.0]]
    assert "weights" in obj


def test_random_dominated_pairs_yield_valid_couplings():
    rng = np.random.default_rng(8)
    F = MomentMap.identity(1)
    for _ in range(10):
        nu = random_prob(rng, 5)
        # lump part of nu toward its mean to get a dominated zeta
        t = rng.uniform(0.2, 0.8)
        zeta = DiscreteMeasure(
            np.vstack([nu.atoms * (1 - t) + t * nu.mean(), nu.mean()[None, :]]),
            np.concatenate([nu.weights * 0.5, [0.5]]),
        )
        coupling = build_martingale_coupling(zeta, nu, F)
        assert coupling.barycenter_residual() < 1e-9
        assert coupling.plan.marginal_defect() < 1e-9
