import numpy as np
import pytest

from pmeflow.chain import cycle_chain, random_reversible_chain, two_point_chain


@pytest.fixture
def two_point_sym():
    return two_point_chain(1.0, 1.0)


@pytest.fixture
def cycle6():
    return cycle_chain(6, 1.0)


def make_random_chain(seed, n=5, density=1.0):
    rng = np.random.default_rng(seed)
    chain = random_reversible_chain(n, rng, density_of_edges=density)
    return chain, rng


def interior_density(chain, rng, floor=0.05):
    """Random density bounded away from the boundary (mass stays 1)."""
    rho = rng.dirichlet(np.ones(chain.n)) / chain.pi
    return (1.0 - floor) * rho + floor
