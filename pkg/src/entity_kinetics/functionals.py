"""Grand-canonical mean values and the full <-> marginal transforms.

Full observables ``O`` and states ``D`` are :class:`GradedSequence` objects
truncated at ``n_max``; components beyond the truncation are treated as zero.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import ArityError, InvariantError
from .generators import observable_semigroup, state_semigroup
from .model import InteractionModel
from .state_space import GradedSequence, contract, embed, graded_pairing, pair


def partition_function(D: GradedSequence) -> float:
    """``(I, D) = sum_n (1/n!) sum_x D_n(x)`` with ``D_0`` taken from ``D.scalar``."""
    return D.scalar + sum(float(D[n].sum()) / math.factorial(n) for n in range(1, D.n_max + 1))


def mean_value(O: GradedSequence, D: GradedSequence) -> float:
    Z = partition_function(D)
    if Z == 0 or not math.isfinite(Z):
        raise ZeroDivisionError(f"state normalization (I, D) = {Z}")
    n_max = min(O.n_max, D.n_max)
    return graded_pairing(O, D, n_max) / Z


def marginals_from_full(D: GradedSequence, s_max: int) -> GradedSequence:
    """Marginal distribution functions ``F_1..F_smax`` of the full state ``D``."""
    if s_max > D.n_max:
        raise ArityError(f"s_max={s_max} exceeds the truncation n_max={D.n_max} of D")
    Z = partition_function(D)
    comps = []
    for s in range(1, s_max + 1):
        acc = np.zeros_like(D[s])
        for n in range(D.n_max - s + 1):
            acc += contract(D[s + n], range(s, s + n)) / math.factorial(n)
        comps.append(acc / Z)
    return GradedSequence(1.0, comps, "state")


def marginal_obs_from_obs(O: GradedSequence, s_max: int) -> GradedSequence:
    """Marginal observables by inclusion-exclusion over removed entities.

    ``B_s = sum_n (-1)**n sum_{|J| = n} O_{s-n}(Y \\ J)``, the subset form of
    the ordered-tuple sum weighted by ``1/n!``.
    """
    if s_max > O.n_max:
        raise ArityError(f"s_max={s_max} exceeds the truncation n_max={O.n_max} of O")
    S = O[1].shape[0] if O.n_max else None
    comps = []
    for s in range(1, s_max + 1):
        acc = np.zeros((S,) * s)
        for n in range(s + 1):
            sign = (-1) ** n
            for J in itertools.combinations(range(s), n):
                keep = [i for i in range(s) if i not in J]
                acc += sign * embed(O[s - n], keep, s, S=S)
        comps.append(acc)
    return GradedSequence(O.scalar, comps, "observable")


def evolve_observables(model: InteractionModel, O: GradedSequence, t: float) -> GradedSequence:
    return GradedSequence(O.scalar, [
        (observable_semigroup(model, n, float(t)) @ O[n].ravel()).reshape(O[n].shape)
        for n in range(1, O.n_max + 1)
    ], "observable")


def evolve_states(model: InteractionModel, D: GradedSequence, t: float) -> GradedSequence:
    return GradedSequence(D.scalar, [
        (state_semigroup(model, n, float(t)) @ D[n].ravel()).reshape(D[n].shape)
        for n in range(1, D.n_max + 1)
    ], "state")


def duality_full(model: InteractionModel, O0: GradedSequence, D0: GradedSequence,
                 t: float) -> float:
    """``|<O(t)>_{D(0)} - <O(0)>_{D(t)}|`` with componentwise evolution."""
    if any(D0[n].min() < 0 for n in range(1, D0.n_max + 1)):
        raise InvariantError("initial state has negative entries")
    heisenberg = mean_value(evolve_observables(model, O0, t), D0)
    schroedinger = mean_value(O0, evolve_states(model, D0, t))
    return abs(heisenberg - schroedinger)


def consistency_residual(O: GradedSequence, D: GradedSequence, s_max: int) -> float:
    """Mean value from marginals truncated at ``s_max`` minus the full mean value."""
    B = marginal_obs_from_obs(O, s_max)
    F = marginals_from_full(D, s_max)
    marginal = B.scalar * F.scalar + sum(pair(B[s], F[s]) / math.factorial(s)
                                         for s in range(1, s_max + 1))
    return marginal - mean_value(O, D)
