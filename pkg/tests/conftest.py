import numpy as np
import pytest

from kantlab import DiscreteMeasure


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def random_prob(rng, n, d=1, lo=0.0, hi=1.0):
    """Random probability measure with distinct atoms in [lo, hi]^d."""
    atoms = rng.uniform(lo, hi, size=(n, d))
    w = rng.dirichlet(np.ones(n))
    return DiscreteMeasure(atoms, w)
