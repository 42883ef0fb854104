"""Liouville operators of the jump dynamics, their adjoints, and semigroups.

Operators on n-entity functions are dense ``(S**n, S**n)`` matrices acting on
C-order flattened tensors, so that ``(L @ b.ravel()).reshape(b.shape)`` is
``L`` applied to ``b``.  Under the counting-measure bracket the adjoint of a
matrix is its transpose.

Slot tuples are 0-based: ``(0, 1)`` denotes the ordered pair in which entity 0
jumps under the influence of entity 1.
"""

from __future__ import annotations

import functools
import itertools
import math
from typing import Sequence

import numpy as np

from .errors import ArityError, InvariantError
from .model import InteractionModel
from .state_space import identity_basis

_LETTERS = "abcdefghijklmnopqrstuvwxy"
_V = "z"

STOCHASTIC_TOL = 1e-10


def _check_spec(model: InteractionModel, n: int, spec: Sequence[int]) -> tuple:
    spec = tuple(int(i) for i in spec)
    m = len(spec)
    if not 1 <= m <= model.m_max:
        raise ArityError(f"interaction order {m} outside 1..{model.m_max}")
    if m > n or len(set(spec)) != m or any(not 0 <= i < n for i in spec):
        raise ArityError(f"slot tuple {spec} invalid for {n} entities")
    return spec


def apply_lambda_m(model: InteractionModel, n: int, spec: Sequence[int], b: np.ndarray,
                   adjoint: bool = False) -> np.ndarray:
    """Apply the order-``m`` jump operator on slots ``spec`` to ``b``.

    ``b`` has shape ``(S,)*n`` plus optional trailing batch axes.  With
    ``adjoint=True`` the operator acting on distribution functions is applied
    instead.  No epsilon weight is included.
    """
    spec = _check_spec(model, n, spec)
    m = len(spec)
    a = model.rates[m]
    A = model.kernels[m]
    slots = _LETTERS[:n]
    xs = "".join(slots[i] for i in spec)
    moved = slots[: spec[0]] + _V + slots[spec[0] + 1:]
    if not adjoint:
        # a(x_I) sum_v A(v; x_I) b(x | x_i1 -> v)
        jump = np.einsum(f"{xs},{_V}{xs},{moved}...->{slots}...", a, A, b)
    else:
        # sum_v A(x_i1; v, x_rest) a(v, x_rest) f(x | x_i1 -> v)
        rest = xs[1:]
        jump = np.einsum(f"{_V}{rest},{xs[0]}{_V}{rest},{moved}...->{slots}...", a, A, b)
    loss = np.einsum(f"{xs},{slots}...->{slots}...", a, b)
    return jump - loss


def ordered_tuples(slots: Sequence[int], m: int):
    return itertools.permutations(slots, m)


def apply_lambda_n(model: InteractionModel, n: int, b: np.ndarray, adjoint: bool = False,
                   slots: Sequence[int] | None = None) -> np.ndarray:
    """Full generator on the entities ``slots`` (default: all ``n``) applied to ``b``."""
    slots = range(n) if slots is None else slots
    out = np.zeros_like(np.asarray(b, dtype=float))
    for m in model.orders():
        w = model.weight(m)
        for spec in ordered_tuples(slots, m):
            out += w * apply_lambda_m(model, n, spec, b, adjoint)
    return out


def _as_matrix(apply, S: int, n: int) -> np.ndarray:
    D = S**n
    mat = apply(identity_basis(S, n)).reshape(D, D)
    mat.setflags(write=False)
    return mat


def lambda_m(model: InteractionModel, n: int, spec: Sequence[int]) -> np.ndarray:
    model.space.check_arity(n, operator=True)
    return _as_matrix(lambda e: apply_lambda_m(model, n, spec, e), model.S, n)


def lambda_star_m(model: InteractionModel, n: int, spec: Sequence[int]) -> np.ndarray:
    model.space.check_arity(n, operator=True)
    return _as_matrix(lambda e: apply_lambda_m(model, n, spec, e, adjoint=True), model.S, n)


@functools.lru_cache(maxsize=128)
def lambda_n(model: InteractionModel, n: int) -> np.ndarray:
    """Liouville operator of ``n`` entities, summed over ordered slot tuples."""
    if n < 1:
        raise ArityError("lambda_n needs n >= 1")
    model.space.check_arity(n, operator=True)
    return _as_matrix(lambda e: apply_lambda_n(model, n, e), model.S, n)


@functools.lru_cache(maxsize=128)
def lambda_star_n(model: InteractionModel, n: int) -> np.ndarray:
    if n < 1:
        raise ArityError("lambda_star_n needs n >= 1")
    model.space.check_arity(n, operator=True)
    return _as_matrix(lambda e: apply_lambda_n(model, n, e, adjoint=True), model.S, n)


def expm(A: np.ndarray, theta: float = 0.5) -> np.ndarray:
    """Matrix exponential by scaling and squaring of a truncated Taylor series.

    ``A`` is scaled by ``2**-j`` so that its 1-norm is at most ``theta``; the
    series is summed until the next term is below double precision relative
    to the partial sum, then squared ``j`` times.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expm needs a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("expm of a matrix with non-finite entries")
    norm = np.linalg.norm(A, 1)
    j = max(0, math.ceil(math.log2(norm / theta))) if norm > theta else 0
    X = A / 2.0**j
    result = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for k in range(1, 40):
        term = term @ X / k
        result = result + term
        if np.max(np.abs(term)) <= 1e-17 * np.max(np.abs(result)):
            break
    for _ in range(j):
        result = result @ result
    return result


def semigroup(op: np.ndarray, t: float, stochastic: str | None = None) -> np.ndarray:
    """``exp(t * op)``; optionally assert the stochastic structure.

    ``stochastic="columns"`` checks that the result is column-stochastic and
    nonnegative (evolution of states), ``"rows"`` that it fixes constants
    (evolution of observables).  Checks only apply for ``t >= 0``.
    """
    t = float(t)
    if not math.isfinite(t):
        raise ValueError(f"semigroup time must be finite, got {t}")
    E = expm(t * np.asarray(op))
    if stochastic is not None and t >= 0:
        axis = {"columns": 0, "rows": 1}[stochastic]
        drift = np.max(np.abs(E.sum(axis=axis) - 1.0))
        if drift > STOCHASTIC_TOL:
            raise InvariantError(f"semigroup {stochastic} sum drift {drift:.3e}")
        if stochastic == "columns" and E.min() < -STOCHASTIC_TOL:
            raise InvariantError(f"state semigroup has negative entry {E.min():.3e}")
    E.setflags(write=False)
    return E


@functools.lru_cache(maxsize=512)
def observable_semigroup(model: InteractionModel, n: int, t: float) -> np.ndarray:
    return semigroup(lambda_n(model, n), t, "rows")


@functools.lru_cache(maxsize=512)
def state_semigroup(model: InteractionModel, n: int, t: float) -> np.ndarray:
    return semigroup(lambda_star_n(model, n), t, "columns")


def apply_matrix(op: np.ndarray, b: np.ndarray) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    return (op @ b.reshape(op.shape[1], -1)).reshape(b.shape)


def apply_on_slots(op: np.ndarray, f: np.ndarray, slots: Sequence[int], n: int) -> np.ndarray:
    """Apply a k-entity operator matrix to the slots ``slots`` of an n-entity tensor."""
    slots = tuple(slots)
    k = len(slots)
    if k == 0:
        return np.asarray(f, dtype=float)
    S = round(op.shape[0] ** (1.0 / k))
    E = np.asarray(op).reshape((S,) * (2 * k))
    L = _LETTERS[:n]
    primed = "".join(_LETTERS[n + i] for i in range(k))
    src = list(L)
    for i, s in enumerate(slots):
        src[s] = primed[i]
    out_sub = "".join(L[s] for s in slots)
    return np.einsum(f"{out_sub}{primed},{''.join(src)}...->{L}...", E, f)


def slot_operator(op: np.ndarray, slots: Sequence[int], n: int, S: int) -> np.ndarray:
    """Dense n-entity matrix acting as ``op`` on ``slots`` and as identity elsewhere."""
    D = S**n
    return apply_on_slots(op, identity_basis(S, n), slots, n).reshape(D, D)


def single_entity_semigroup(model: InteractionModel, t: float, adjoint: bool = False) -> np.ndarray:
    """``exp(t * Lambda[1])`` on one entity (the free flow of a single slot)."""
    gen = lambda_star_m(model, 1, (0,)) if adjoint else lambda_m(model, 1, (0,))
    return semigroup(gen, t)


def free_flow(E1: np.ndarray, f: np.ndarray, slots: Sequence[int]) -> np.ndarray:
    """Apply the single-entity matrix ``E1`` independently to each slot in ``slots``."""
    f = np.asarray(f, dtype=float)
    for s in slots:
        f = np.moveaxis(np.tensordot(E1, f, axes=([1], [s])), 0, s)
    return f
