import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from entity_kinetics.model import builtin, random_model
from entity_kinetics.state_space import StateSpace, symmetrize

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def space():
    return StateSpace(2, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=["uniform-drift", "imitation", "mixed"])
def any_builtin(request, space):
    return builtin(request.param, space, epsilon=0.5)


@pytest.fixture(params=["imitation", "mixed"])
def interacting(request, space):
    return builtin(request.param, space, epsilon=0.5)


@pytest.fixture
def asymmetric(space):
    # a pair interaction with a nonvanishing collision term
    return random_model(space, 2, epsilon=0.5, seed=3)


def random_symmetric(rng, S, n):
    return symmetrize(rng.uniform(-1, 1, (S,) * n))


def random_density(rng, S, n=1):
    f = rng.uniform(0.1, 1.0, (S,) * n)
    return symmetrize(f / f.sum())
