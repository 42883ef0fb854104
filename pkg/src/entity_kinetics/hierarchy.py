"""Dual BBGKY hierarchy for marginal observables and BBGKY hierarchy for states.

Marginal observables ``B = (B_0, B_1, ..., B_smax)`` evolve by a triangular
linear system: the equation for ``B_s`` involves ``B_s`` and lower levels only,
so any truncation evolves exactly.  The closed-form solution is the cumulant
expansion :func:`solve_expansion`; :func:`integrate_dual_bbgky` integrates the
same system with classical RK4 as an independent route.

Marginal distribution functions ``F`` evolve by the adjoint (upper
triangular) system; truncating it sets ``F_s = 0`` above ``s_max``.
"""

from __future__ import annotations

import functools
import itertools
import math

import numpy as np

from .cumulants import cumulant
from .errors import ArityError, CapacityError, InvariantError
from .generators import apply_lambda_m, lambda_n, lambda_star_n
from .model import InteractionModel
from .state_space import GradedSequence, embed, graded_pairing, identity_basis

MAX_LEVEL = 4
MAX_STEPS = 10_000_000
NEGATIVITY_TOL = 1e-8


def _check_level(model: InteractionModel, s: int) -> None:
    if not 1 <= s <= MAX_LEVEL:
        raise CapacityError(f"hierarchy level {s} outside 1..{MAX_LEVEL}")
    model.space.check_arity(s, operator=True)


@functools.lru_cache(maxsize=256)
def dual_coupling(model: InteractionModel, s: int, n: int, literal: bool = False) -> np.ndarray:
    """Matrix ``(S**s, S**(s-n))`` coupling ``B_{s-n}`` into the equation for ``B_s``.

    Sums ``eps**(k-1) Lambda[k](J)`` over ordered k-tuples ``J`` of distinct
    slots, applied to ``B_{s-n}`` with the slots of an n-subset ``I`` of ``J``
    removed.  With ``literal=True`` each term carries the extra factor
    ``1/(k-n)!``; this only differs for interaction orders k >= 3 and is kept
    for comparison, the default form being the one whose solution is the
    cumulant expansion.
    """
    _check_level(model, s)
    if not 1 <= n < s:
        raise ArityError(f"coupling order n={n} invalid for level s={s}")
    S = model.S
    basis = identity_basis(S, s - n)
    out = np.zeros((S,) * s + (S ** (s - n),))
    for k in range(n + 1, min(s, model.m_max) + 1):
        w = model.weight(k) / (math.factorial(k - n) if literal else 1)
        for J in itertools.permutations(range(s), k):
            for I in itertools.combinations(J, n):
                if J[0] in I:
                    # the jumping entity is absent from the argument: term vanishes
                    continue
                keep = [i for i in range(s) if i not in I]
                out += w * apply_lambda_m(model, s, J, embed(basis, keep, s))
    return out.reshape(S**s, S ** (s - n))


def dual_bbgky_rhs(model: InteractionModel, B: GradedSequence, s: int,
                   literal: bool = False) -> np.ndarray:
    """Right-hand side of the evolution equation for ``B_s``."""
    if s > B.n_max:
        raise ArityError(f"level {s} requested but B stops at {B.n_max}")
    _check_level(model, s)
    shape = B[s].shape
    out = lambda_n(model, s) @ B[s].ravel()
    for n in range(1, s):
        if n + 1 > model.m_max:
            break
        out = out + dual_coupling(model, s, n, literal) @ B[s - n].ravel()
    return out.reshape(shape)


def solve_expansion(model: InteractionModel, B0: GradedSequence, t: float) -> GradedSequence:
    """Marginal observables at time ``t`` from the cumulant expansion.

    ``B_s(t) = sum_n sum_{|Z| = n} cumulant(t, s, Z) B0_{s-n}(Y \\ Z)``; the
    sum over n-subsets equals the ordered-tuple sum divided by ``n!`` since
    the cumulant is symmetric in the elements of ``Z``.
    """
    S = model.S
    comps = []
    for s in range(1, B0.n_max + 1):
        _check_level(model, s)
        acc = np.zeros(S**s)
        for n in range(s + 1):
            for Z in itertools.combinations(range(s), n):
                keep = [i for i in range(s) if i not in Z]
                initial = embed(B0[s - n], keep, s, S=S)
                acc += cumulant(model, t, s, Z) @ initial.ravel()
        comps.append(acc.reshape((S,) * s))
    return GradedSequence(B0.scalar, comps, "observable")


def _rk4(rhs, y0: np.ndarray, t: float, dt: float) -> np.ndarray:
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t == 0:
        return y0.copy()
    steps = max(1, math.ceil(abs(t) / dt - 1e-9))
    if steps > MAX_STEPS:
        raise CapacityError(f"{steps} RK4 steps exceed the cap {MAX_STEPS}")
    h = t / steps
    y = y0.copy()
    for _ in range(steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def _pack(seq: GradedSequence) -> np.ndarray:
    return np.concatenate([c.ravel() for c in seq.components]) if seq.components else np.zeros(0)


def _unpack(y: np.ndarray, like: GradedSequence) -> GradedSequence:
    comps, pos = [], 0
    for c in like.components:
        comps.append(y[pos:pos + c.size].reshape(c.shape))
        pos += c.size
    return GradedSequence(like.scalar, comps, like.kind)


def _block_system(levels: int, S: int, blocks: dict) -> np.ndarray:
    """Assemble a dense matrix for all levels from ``{(s, s'): matrix}`` blocks."""
    offsets = np.cumsum([0] + [S**s for s in range(1, levels + 1)])
    G = np.zeros((offsets[-1], offsets[-1]))
    for (s, r), mat in blocks.items():
        G[offsets[s - 1]:offsets[s], offsets[r - 1]:offsets[r]] = mat
    return G


def dual_bbgky_generator(model: InteractionModel, s_max: int, literal: bool = False) -> np.ndarray:
    """Lower block-triangular generator of the dual hierarchy truncated at ``s_max``."""
    blocks = {}
    for s in range(1, s_max + 1):
        _check_level(model, s)
        blocks[(s, s)] = lambda_n(model, s)
        for n in range(1, min(s, model.m_max)):
            blocks[(s, s - n)] = dual_coupling(model, s, n, literal)
    return _block_system(s_max, model.S, blocks)


def integrate_dual_bbgky(model: InteractionModel, B0: GradedSequence, t: float, dt: float,
                         literal: bool = False) -> GradedSequence:
    """RK4 integration of the dual hierarchy from ``B0`` up to time ``t``."""
    G = dual_bbgky_generator(model, B0.n_max, literal)
    y = _rk4(lambda y: G @ y, _pack(B0), t, dt)
    return _unpack(y, B0)


@functools.lru_cache(maxsize=256)
def states_coupling(model: InteractionModel, s: int, n: int) -> np.ndarray:
    """Matrix ``(S**s, S**(s+n))`` coupling ``F_{s+n}`` into the equation for ``F_s``.

    For each k, the ordered k-tuples ``i`` of the first ``s`` slots (weight
    ``1/k!``) are joined with the ``n`` added slots; every ordering of the
    joined slots contributes ``eps**(k+n-1)/n! Lambda*[k+n]``, after which the
    added slots are summed out.
    """
    if n < 1:
        raise ArityError("states coupling needs n >= 1")
    S = model.S
    total = s + n
    model.space.check_arity(total, operator=True)
    basis = identity_basis(S, total)
    added = tuple(range(s, total))
    acc = np.zeros((S,) * total + (S**total,))
    for k in range(1, s + 1):
        if k + n > model.m_max:
            break
        w = model.weight(k + n) / (math.factorial(k) * math.factorial(n))
        for i in itertools.permutations(range(s), k):
            for J in itertools.permutations(i + added):
                acc += w * apply_lambda_m(model, total, J, basis, adjoint=True)
    return acc.sum(axis=added).reshape(S**s, S**total)


def bbgky_states_rhs(model: InteractionModel, F: GradedSequence, s: int) -> np.ndarray:
    """Right-hand side for ``F_s``; levels above ``F.n_max`` are treated as zero."""
    if s > F.n_max:
        raise ArityError(f"level {s} requested but F stops at {F.n_max}")
    shape = F[s].shape
    out = lambda_star_n(model, s) @ F[s].ravel()
    for n in range(1, model.m_max):
        if s + n > F.n_max:
            break
        out = out + states_coupling(model, s, n) @ F[s + n].ravel()
    return out.reshape(shape)


def bbgky_states_generator(model: InteractionModel, s_max: int) -> np.ndarray:
    blocks = {}
    for s in range(1, s_max + 1):
        _check_level(model, s)
        blocks[(s, s)] = lambda_star_n(model, s)
        for n in range(1, model.m_max):
            if s + n <= s_max:
                blocks[(s, s + n)] = states_coupling(model, s, n)
    return _block_system(s_max, model.S, blocks)


def integrate_bbgky_states(model: InteractionModel, F0: GradedSequence, t: float,
                           dt: float) -> GradedSequence:
    """RK4 integration of the truncated states hierarchy (``F_s = 0`` above ``s_max``)."""
    for s in range(1, F0.n_max + 1):
        if F0[s].min() < 0:
            raise InvariantError(f"initial marginal F_{s} has negative entries")
    G = bbgky_states_generator(model, F0.n_max)
    F = _unpack(_rk4(lambda y: G @ y, _pack(F0), t, dt), F0)
    for s in range(1, F.n_max + 1):
        if F[s].min() < -NEGATIVITY_TOL:
            raise InvariantError(f"F_{s}(t) dropped to {F[s].min():.3e}")
    return F


def duality_check(model: InteractionModel, B0: GradedSequence, F0: GradedSequence, t: float,
                  dt: float = 1e-3) -> float:
    """``|(B(t), F(0)) - (B(0), F(t))|`` with both sides truncated at the same level."""
    s_max = min(B0.n_max, F0.n_max)
    B0 = B0.truncated(s_max)
    F0 = F0.truncated(s_max)
    lhs = graded_pairing(solve_expansion(model, B0, t), F0)
    rhs = graded_pairing(B0, integrate_bbgky_states(model, F0, t, dt))
    return abs(lhs - rhs)
