import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entity_kinetics.errors import ArityError, InvariantError
from entity_kinetics.functionals import (consistency_residual, duality_full, evolve_states,
                                         marginal_obs_from_obs, marginals_from_full, mean_value,
                                         partition_function)
from entity_kinetics.model import BUILTIN_MODELS, builtin
from entity_kinetics.state_space import GradedSequence, StateSpace, embed, symmetrize, tensor_power

from conftest import random_symmetric


def random_O(rng, n_max, S=4, scalar=0.4):
    return GradedSequence(scalar, [random_symmetric(rng, S, n) for n in range(1, n_max + 1)])


def random_D(rng, n_max, S=4, z=0.3):
    comps = [z**n * symmetrize(rng.uniform(0.1, 1.0, (S,) * n)) for n in range(1, n_max + 1)]
    return GradedSequence(1.0, comps, "state")


def test_mean_value_simple_cases(rng):
    D = random_D(rng, 3)
    ones = GradedSequence(1.0, [np.ones((4,) * n) for n in (1, 2, 3)])
    assert mean_value(ones, D) == pytest.approx(1.0, abs=1e-15)
    O = random_O(rng, 3)
    assert mean_value(O, GradedSequence(1.0, [], "state")) == O.scalar
    with pytest.raises(ZeroDivisionError):
        mean_value(O, GradedSequence(0.0, [np.zeros(4)], "state"))


def test_mean_value_brute_force(rng):
    O, D = random_O(rng, 3), random_D(rng, 3)
    num, den = O.scalar * D.scalar, D.scalar
    for n in (1, 2, 3):
        for x in itertools.product(range(4), repeat=n):
            num += O[n][x] * D[n][x] / math.factorial(n)
            den += D[n][x] / math.factorial(n)
    assert partition_function(D) == pytest.approx(den, rel=1e-14)
    assert mean_value(O, D) == pytest.approx(num / den, rel=1e-13)


def test_marginals_of_one_entity_state(rng):
    d = rng.uniform(size=4)
    D = GradedSequence(1.0, [d, np.zeros((4, 4)), np.zeros((4,) * 3)], "state")
    F = marginals_from_full(D, 2)
    assert F[0] == 1.0
    assert np.allclose(F[1], d / (1 + d.sum()), rtol=1e-15, atol=0)
    assert np.all(F[2] == 0)
    with pytest.raises(ArityError):
        marginals_from_full(D, 4)


def test_marginals_equivariant_and_affine(rng):
    D, E = random_D(rng, 3), random_D(rng, 3)
    perm = np.array([2, 0, 3, 1])
    permuted = D.map(lambda c: c[np.ix_(*[perm] * c.ndim)])
    F, Fp = marginals_from_full(D, 3), marginals_from_full(permuted, 3)
    for s in (1, 2, 3):
        assert np.allclose(Fp[s], F[s][np.ix_(*[perm] * s)], rtol=1e-14, atol=0)
    # normalized: scale-free, and affine along sequences sharing the partition function
    scaled = GradedSequence(2.5, [2.5 * c for c in D.components], "state")
    assert all(np.allclose(marginals_from_full(scaled, 3)[s], F[s], rtol=1e-14) for s in (1, 2, 3))
    E = GradedSequence(1.0, [c * (partition_function(D) - 1) / (partition_function(E) - 1)
                             for c in E.components], "state")
    mix = GradedSequence(1.0, [0.3 * a + 0.7 * b for a, b in zip(D.components, E.components)], "state")
    FE, Fm = marginals_from_full(E, 3), marginals_from_full(mix, 3)
    for s in (1, 2, 3):
        assert np.allclose(Fm[s], 0.3 * F[s] + 0.7 * FE[s], rtol=1e-13, atol=1e-16)


def test_marginal_observable_level_one(rng):
    O = random_O(rng, 2)
    B = marginal_obs_from_obs(O, 2)
    assert np.allclose(B[1], O[1] - O.scalar, rtol=0, atol=1e-15)
    assert np.allclose(B[2], O[2] - embed(O[1], [0], 2) - embed(O[1], [1], 2) + O.scalar,
                       rtol=0, atol=1e-15)


def test_marginal_of_additive_observable(rng):
    o = rng.normal(size=4)
    comps = []
    for s in (1, 2, 3):
        acc = np.zeros((4,) * s)
        for i in range(s):
            acc += embed(o, [i], s)
        comps.append(acc)
    B = marginal_obs_from_obs(GradedSequence(0.0, comps), 3)
    assert np.allclose(B[1], o, atol=1e-15)
    for s in (2, 3):
        for x in itertools.product(range(4), repeat=s):
            assert abs(B[s][x]) <= 1e-14


def test_marginal_observable_linear(rng):
    O1, O2 = random_O(rng, 3), random_O(rng, 3)
    zero = marginal_obs_from_obs(GradedSequence(0.0, [np.zeros((4,) * n) for n in (1, 2, 3)]), 3)
    assert all(np.all(zero[s] == 0) for s in (1, 2, 3))
    combo = GradedSequence(2 * O1.scalar - O2.scalar,
                           [2 * a - b for a, b in zip(O1.components, O2.components)])
    B, B1, B2 = (marginal_obs_from_obs(X, 3) for X in (combo, O1, O2))
    for s in (1, 2, 3):
        assert np.allclose(B[s], 2 * B1[s] - B2[s], rtol=0, atol=1e-14)


def test_duality_full(interacting, rng):
    O, D = random_O(rng, 3), random_D(rng, 3)
    assert duality_full(interacting, O, D, 0.0) == 0.0
    assert duality_full(interacting, O, D, 0.7) <= 1e-10
    const = GradedSequence(1.5, [np.full((4,) * n, 1.5) for n in (1, 2, 3)])
    assert mean_value(const, evolve_states(interacting, D, 0.9)) == pytest.approx(1.5, abs=1e-12)
    negative = D.copy()
    negative.components[0] = negative.components[0] - 1.0
    with pytest.raises(InvariantError):
        duality_full(interacting, O, negative, 0.5)


def test_consistency_exact_without_truncation(rng):
    O, D = random_O(rng, 3), random_D(rng, 3, z=0.8)
    assert abs(consistency_residual(O, D, 3)) <= 1e-14


@pytest.mark.parametrize("s_max, z", [(1, 1e-3), (2, 0.01), (3, 0.01)])
def test_consistency_rapidly_decaying_state(rng, s_max, z):
    n_max = s_max + 2
    f = rng.uniform(0.5, 1.5, 4)
    f /= f.sum()
    D = GradedSequence(1.0, [z**n * tensor_power(f, n) for n in range(1, n_max + 1)], "state")
    O = random_O(rng, n_max)
    assert abs(consistency_residual(O, D, s_max)) <= 1e-6


@settings(max_examples=20)
@given(st.sampled_from(BUILTIN_MODELS), st.floats(0.0, 2.0), st.integers(0, 10_000))
def test_duality_property(name, t, seed):
    rng = np.random.default_rng(seed)
    model = builtin(name, StateSpace(2, 2), epsilon=0.5)
    assert duality_full(model, random_O(rng, 3), random_D(rng, 3), t) <= 1e-10
