"""Discrete entity state space and the dense symmetric-tensor algebra.

An entity state is a pair ``(j, u)`` of a subpopulation index ``j`` in
``range(M)`` and a micro-state index ``u`` in ``range(K)``; it is stored as the
flat index ``j * K + u`` in ``range(S)`` with ``S = M * K``.  A function of
``n`` entities is a dense ``numpy`` array of shape ``(S,) * n``.  Many helpers
accept extra trailing "batch" axes after the ``n`` slot axes, which is how
operator matrices are assembled from their action on a basis.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ArityError, CapacityError

#: Largest number of entries allowed in a dense n-entity tensor (S**n).
MAX_TENSOR_SIZE = 20_736
#: Largest dimension S**n of a dense n-entity operator matrix.
MAX_OPERATOR_DIM = 4_096


@dataclass(frozen=True)
class EntityState:
    """A single entity: subpopulation ``j`` and micro-state ``u`` (0-based)."""

    j: int
    u: int


@dataclass(frozen=True)
class StateSpace:
    """``M`` subpopulations times ``K`` discretized micro-states."""

    M: int
    K: int

    def __post_init__(self):
        if int(self.M) != self.M or int(self.K) != self.K or self.M < 1 or self.K < 1:
            raise ValueError(f"M and K must be positive integers, got M={self.M}, K={self.K}")

    @property
    def S(self) -> int:
        return self.M * self.K

    def flatten(self, state: EntityState | tuple[int, int]) -> int:
        j, u = (state.j, state.u) if isinstance(state, EntityState) else state
        if not (0 <= j < self.M and 0 <= u < self.K):
            raise IndexError(f"entity state ({j}, {u}) outside {self.M}x{self.K} space")
        return j * self.K + u

    def unflatten(self, x: int) -> EntityState:
        if not 0 <= x < self.S:
            raise IndexError(f"flat index {x} outside [0, {self.S})")
        j, u = divmod(int(x), self.K)
        return EntityState(j, u)

    def subpopulation(self) -> np.ndarray:
        """Subpopulation label of every flat index."""
        return np.arange(self.S) // self.K

    def check_arity(self, n: int, *, operator: bool = False) -> None:
        size = self.S**n
        if size > MAX_TENSOR_SIZE:
            raise CapacityError(f"S**n = {self.S}**{n} = {size} exceeds tensor cap {MAX_TENSOR_SIZE}")
        if operator and size > MAX_OPERATOR_DIM:
            raise CapacityError(
                f"operator dimension {self.S}**{n} = {size} exceeds cap {MAX_OPERATOR_DIM}"
            )

    def zeros(self, n: int) -> np.ndarray:
        self.check_arity(n)
        return np.zeros((self.S,) * n)

    def ones(self, n: int) -> np.ndarray:
        self.check_arity(n)
        return np.ones((self.S,) * n)

    def delta(self, a: int) -> np.ndarray:
        """Point mass (or point-evaluation observable) at flat state ``a``."""
        e = np.zeros(self.S)
        e[a] = 1.0
        return e

    def uniform(self) -> np.ndarray:
        return np.full(self.S, 1.0 / self.S)


def arity(t: np.ndarray, S: int) -> int:
    t = np.asarray(t)
    if any(d != S for d in t.shape):
        raise ArityError(f"tensor of shape {t.shape} is not a function on a space of size {S}")
    return t.ndim


def symmetrize(t: np.ndarray, n: int | None = None) -> np.ndarray:
    """Average ``t`` over all permutations of its first ``n`` slot axes."""
    t = np.asarray(t, dtype=float)
    n = t.ndim if n is None else n
    if n < 2:
        return t.copy()
    rest = tuple(range(n, t.ndim))
    acc = np.zeros_like(t)
    for perm in itertools.permutations(range(n)):
        acc += np.transpose(t, perm + rest)
    return acc / math.factorial(n)


def is_symmetric(t: np.ndarray, atol: float = 1e-12) -> bool:
    t = np.asarray(t)
    return all(
        np.allclose(t, np.transpose(t, p), rtol=0, atol=atol)
        for p in itertools.permutations(range(t.ndim))
    )


def embed(t: np.ndarray, keep: Sequence[int], n: int, S: int | None = None) -> np.ndarray:
    """Extend a function of the slots ``keep`` to ``n`` slots.

    Axis ``l`` of ``t`` becomes slot ``keep[l]`` of the result; the result is
    constant along every omitted slot.  Trailing batch axes of ``t`` are kept.
    ``S`` is only needed when ``keep`` is empty (embedding a constant).
    """
    t = np.asarray(t, dtype=float)
    keep = [int(k) for k in keep]
    k = len(keep)
    if k > n or t.ndim < k:
        raise ArityError(f"cannot embed {k} kept slots into arity {n}")
    if len(set(keep)) != k or any(not 0 <= s < n for s in keep):
        raise ArityError(f"keep={keep} must be distinct slots in range({n})")
    if k:
        S = t.shape[0]
    elif S is None:
        raise ArityError("embedding a constant needs the space size S")
    batch = t.shape[k:]
    order = np.argsort(keep)
    t = np.transpose(t, tuple(order) + tuple(range(k, t.ndim)))
    kept = sorted(keep)
    shape = [S if s in kept else 1 for s in range(n)] + list(batch)
    return np.broadcast_to(t.reshape(shape), (S,) * n + batch).copy()


def pair(obs: np.ndarray, state: np.ndarray) -> float:
    """Counting-measure bracket: sum over all n-entity states of obs * state."""
    obs = np.asarray(obs, dtype=float)
    state = np.asarray(state, dtype=float)
    if obs.shape != state.shape:
        raise ArityError(f"pair of shapes {obs.shape} and {state.shape}")
    return float(np.vdot(obs.ravel(), state.ravel()))


def contract(t: np.ndarray, slots: Iterable[int]) -> np.ndarray:
    """Sum out the given slot axes (integration over those entities)."""
    slots = tuple(slots)
    if not slots:
        return np.asarray(t, dtype=float)
    return np.asarray(t, dtype=float).sum(axis=slots)


def tensor_power(f: np.ndarray, n: int) -> np.ndarray:
    """Product ``f(x_1) ... f(x_n)``; ``n = 0`` gives the scalar 1."""
    out = np.ones(())
    for _ in range(n):
        out = np.multiply.outer(out, f)
    return out


def tensor_product(*fs: np.ndarray) -> np.ndarray:
    out = np.ones(())
    for f in fs:
        out = np.multiply.outer(out, f)
    return out


def identity_basis(S: int, n: int) -> np.ndarray:
    """Identity matrix reshaped to ``(S,)*n + (S**n,)``: column c is basis tensor c."""
    return np.eye(S**n).reshape((S,) * n + (S**n,))


@dataclass
class GradedSequence:
    """A truncated sequence ``(T_0, T_1, ..., T_nmax)`` over entity numbers.

    ``scalar`` is the 0-entity component; ``components[n - 1]`` is the
    n-entity tensor.  ``kind`` is ``"observable"`` or ``"state"``.
    """

    scalar: float
    components: list = field(default_factory=list)
    kind: str = "observable"

    def __post_init__(self):
        if self.kind not in ("observable", "state"):
            raise ValueError(f"kind must be 'observable' or 'state', not {self.kind!r}")
        self.scalar = float(self.scalar)
        self.components = [np.asarray(c, dtype=float) for c in self.components]
        for n, c in enumerate(self.components, start=1):
            if c.ndim != n:
                raise ArityError(f"component {n} has arity {c.ndim}")

    @property
    def n_max(self) -> int:
        return len(self.components)

    def __getitem__(self, n: int):
        if n == 0:
            return self.scalar
        return self.components[n - 1]

    def copy(self) -> "GradedSequence":
        return GradedSequence(self.scalar, [c.copy() for c in self.components], self.kind)

    def truncated(self, n_max: int) -> "GradedSequence":
        return GradedSequence(self.scalar, [c.copy() for c in self.components[:n_max]], self.kind)

    def map(self, fn) -> "GradedSequence":
        return GradedSequence(self.scalar, [fn(c) for c in self.components], self.kind)

    def max_norm(self) -> float:
        vals = [abs(self.scalar)] + [float(np.max(np.abs(c))) for c in self.components]
        return max(vals)

    def is_finite(self) -> bool:
        return np.isfinite(self.scalar) and all(np.all(np.isfinite(c)) for c in self.components)


def graded_pairing(obs: GradedSequence, state: GradedSequence, n_max: int | None = None) -> float:
    """``sum_n (1/n!) pair(obs_n, state_n)`` including the n=0 product."""
    top = min(obs.n_max, state.n_max) if n_max is None else n_max
    total = obs.scalar * state.scalar
    for n in range(1, top + 1):
        total += pair(obs[n], state[n]) / math.factorial(n)
    return total


def chaotic_sequence(f1: np.ndarray, n_max: int, kind: str = "state") -> GradedSequence:
    """``(1, f, f x f, ...)`` truncated at ``n_max``."""
    return GradedSequence(1.0, [tensor_power(f1, n) for n in range(1, n_max + 1)], kind)
