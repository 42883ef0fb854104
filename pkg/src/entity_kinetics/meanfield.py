"""Mean-field limit: dual Vlasov hierarchy, limit expansion and the Vlasov equation.

In the limit only single-entity flows and pair couplings survive.  Limit
marginal observables ``b_s`` obey a lower-triangular linear system without
epsilon factors; the one-particle density ``f1`` obeys a closed quadratic
kinetic equation.  Each object has two independent evaluation routes (an
iterated-integral series and direct RK4 integration) that are compared in the
tests.
"""

from __future__ import annotations

import functools
import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ArityError, CapacityError, InvariantError
from .generators import (apply_lambda_m, free_flow, lambda_n, lambda_star_m,
                         single_entity_semigroup)
from .hierarchy import _block_system, _pack, _rk4, _unpack, solve_expansion
from .model import InteractionModel
from .state_space import GradedSequence, contract, embed, identity_basis, pair, tensor_power

MAX_LIMIT_LEVEL = 4
MAX_EXPANSION_LEVEL = 3
MAX_SERIES_DEPTH = 3
DEFAULT_NODES = 16
MASS_TOL = 1e-10
SERIES_STOP = 1e-10


@dataclass
class OneParticleDensity:
    f: np.ndarray
    t: float

    @property
    def mass(self) -> float:
        return float(self.f.sum())


def _free_model(model: InteractionModel) -> InteractionModel:
    return model.truncated(1)


@functools.lru_cache(maxsize=128)
def vlasov_coupling(model: InteractionModel, s: int) -> np.ndarray:
    """Matrix ``(S**s, S**(s-1))``: sum over ordered pairs ``(j1, j2)`` of
    ``Lambda[2](j1, j2)`` applied to ``b_{s-1}`` with slot ``j2`` removed."""
    if s < 2:
        raise ArityError("pair coupling needs s >= 2")
    S = model.S
    model.space.check_arity(s, operator=True)
    out = np.zeros((S,) * s + (S ** (s - 1),))
    if model.m_max >= 2:
        basis = identity_basis(S, s - 1)
        for j1, j2 in itertools.permutations(range(s), 2):
            keep = [i for i in range(s) if i != j2]
            out += apply_lambda_m(model, s, (j1, j2), embed(basis, keep, s))
    return out.reshape(S**s, S ** (s - 1))


def dual_vlasov_rhs(model: InteractionModel, b: GradedSequence, s: int) -> np.ndarray:
    if s > b.n_max:
        raise ArityError(f"level {s} requested but b stops at {b.n_max}")
    if s > MAX_LIMIT_LEVEL:
        raise CapacityError(f"limit hierarchy level {s} exceeds {MAX_LIMIT_LEVEL}")
    out = lambda_n(_free_model(model), s) @ b[s].ravel()
    if s >= 2:
        out = out + vlasov_coupling(model, s) @ b[s - 1].ravel()
    return out.reshape(b[s].shape)


def dual_vlasov_generator(model: InteractionModel, s_max: int) -> np.ndarray:
    blocks = {}
    for s in range(1, s_max + 1):
        if s > MAX_LIMIT_LEVEL:
            raise CapacityError(f"limit hierarchy level {s} exceeds {MAX_LIMIT_LEVEL}")
        blocks[(s, s)] = lambda_n(_free_model(model), s)
        if s >= 2:
            blocks[(s, s - 1)] = vlasov_coupling(model, s)
    return _block_system(s_max, model.S, blocks)


def integrate_dual_vlasov(model: InteractionModel, b0: GradedSequence, t: float,
                          dt: float = 1e-3) -> GradedSequence:
    G = dual_vlasov_generator(model, b0.n_max)
    return _unpack(_rk4(lambda y: G @ y, _pack(b0), t, dt), b0)


def _gauss_legendre(q: int):
    x, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (x + 1.0), 0.5 * w


def limit_expansion(model: InteractionModel, b0: GradedSequence, t: float,
                    quad_nodes: int = DEFAULT_NODES) -> GradedSequence:
    """Limit marginal observables from the time-ordered iterated-integral expansion.

    Each term alternates free flows of the still-active entities with pair
    insertions ``Lambda[2](i, j)`` that remove entity ``j`` from the active
    set; the innermost factor is ``b0`` of the remaining entities.  The nested
    integrals over ``t >= t_1 >= ... >= t_n >= 0`` use Gauss-Legendre rules of
    ``quad_nodes`` points per level, and terms sharing the same outer insertions
    are evaluated together.
    """
    if quad_nodes < 1:
        raise ValueError("quad_nodes must be positive")
    if b0.n_max > MAX_EXPANSION_LEVEL:
        raise CapacityError(f"limit expansion supports s <= {MAX_EXPANSION_LEVEL}")
    S = model.S
    x, w = _gauss_legendre(quad_nodes)
    pairs = model.m_max >= 2
    flows = {}

    def flow(tau):
        if tau not in flows:
            flows[tau] = single_entity_semigroup(model, tau)
        return flows[tau]

    def branch(s, tau, active):
        r = len(active)
        value = free_flow(flow(tau), embed(b0[r], active, s), active)
        if r < 2 or not pairs or tau == 0:
            return value
        for xq, wq in zip(x, w):
            sigma = tau * xq
            inner = np.zeros_like(value)
            for j in active:
                sub = branch(s, sigma, tuple(a for a in active if a != j))
                for i in active:
                    if i != j:
                        inner += apply_lambda_m(model, s, (i, j), sub)
            value = value + (tau * wq) * free_flow(flow(tau - sigma), inner, active)
        return value

    comps = [branch(s, float(t), tuple(range(s))) for s in range(1, b0.n_max + 1)]
    return GradedSequence(b0.scalar, comps, "observable")


def scaled_initial_data(b0: GradedSequence, epsilon: float) -> GradedSequence:
    """``B0_s = eps**s * b0_s``, initial data whose scaled limit is ``b0``."""
    return GradedSequence(b0.scalar, [epsilon**s * c for s, c in enumerate(b0.components, 1)],
                          "observable")


def mean_field_convergence(model: InteractionModel, b0: GradedSequence, t: float,
                           epsilons, dt: float = 1e-3) -> list[tuple[float, float]]:
    """Table of ``(eps, max_s |eps**-s B_s(t) - b_s(t)|)`` over an epsilon sweep."""
    limit = integrate_dual_vlasov(model, b0, t, dt)
    rows = []
    for eps in epsilons:
        B = solve_expansion(model.with_epsilon(eps), scaled_initial_data(b0, eps), t)
        err = max(float(np.max(np.abs(B[s] / eps**s - limit[s]))) for s in range(1, b0.n_max + 1))
        rows.append((float(eps), err))
    return rows


def _collision(model: InteractionModel, fs: list[np.ndarray]) -> np.ndarray:
    """Pair collision term: slot 1 of ``Lambda*[2](0, 1)`` on ``f x g`` summed out."""
    n = 2
    prod = np.multiply.outer(fs[0], fs[1])
    return contract(apply_lambda_m(model, n, (0, 1), prod, adjoint=True), [1])


def vlasov_rhs(model: InteractionModel, f1: np.ndarray) -> np.ndarray:
    f1 = np.asarray(f1, dtype=float)
    out = lambda_star_m(model, 1, (0,)) @ f1
    if model.m_max >= 2:
        out = out + _collision(model, [f1, f1])
    return out


def vlasov_rhs_general(model: InteractionModel, f1: np.ndarray) -> np.ndarray:
    """Kinetic equation with all interaction orders up to ``m_max``.

    Order ``n + 1`` contributes ``1/n!`` times the sum over all orderings of
    the ``n + 1`` slots of ``Lambda*[n+1]`` applied to ``f1`` to the power
    ``n + 1``, with the ``n`` added slots summed out.  Orderings in which an
    added slot jumps integrate to zero, so for ``m_max = 2`` this equals
    :func:`vlasov_rhs`.
    """
    f1 = np.asarray(f1, dtype=float)
    out = lambda_star_m(model, 1, (0,)) @ f1
    for n in range(1, model.m_max):
        model.space.check_arity(n + 1)
        prod = tensor_power(f1, n + 1)
        acc = np.zeros_like(prod)
        for J in itertools.permutations(range(n + 1)):
            acc += apply_lambda_m(model, n + 1, J, prod, adjoint=True)
        out = out + contract(acc, range(1, n + 1)) / math.factorial(n)
    return out


def integrate_vlasov(model: InteractionModel, f1_0: np.ndarray, t: float, dt: float = 1e-3,
                     general: bool = False) -> OneParticleDensity:
    """RK4 solution of the kinetic equation; asserts mass conservation and positivity."""
    f0 = np.asarray(f1_0, dtype=float)
    if f0.shape != (model.S,):
        raise ArityError(f"f1 must have shape ({model.S},)")
    if f0.min() < 0:
        raise InvariantError("initial density has negative entries")
    rhs = vlasov_rhs_general if general else vlasov_rhs
    f = _rk4(lambda y: rhs(model, y), f0, t, dt)
    drift = abs(f.sum() - f0.sum())
    if drift > MASS_TOL:
        raise InvariantError(f"kinetic equation lost mass: drift {drift:.3e}")
    if f.min() < -MASS_TOL:
        raise InvariantError(f"kinetic equation produced negative density {f.min():.3e}")
    return OneParticleDensity(f, float(t))


def f1_series(model: InteractionModel, f1_0: np.ndarray, t: float, n_max: int = 3,
              quad_nodes: int = DEFAULT_NODES):
    """Iterated-integral series for the kinetic equation's solution.

    Term ``n`` starts from ``n + 1`` independent copies of ``f1_0`` under the
    free flow and applies ``n`` pair insertions, each summing over which of
    the current entities interacts with the newest one and then summing the
    newest one out.  Returns the density and the max-norm of every term.
    """
    if not 0 <= n_max <= MAX_SERIES_DEPTH:
        raise CapacityError(f"series depth must be in 0..{MAX_SERIES_DEPTH}")
    f0 = np.asarray(f1_0, dtype=float)
    x, w = _gauss_legendre(quad_nodes)
    flows = {}

    def flow(tau):
        if tau not in flows:
            flows[tau] = single_entity_semigroup(model, tau, adjoint=True)
        return flows[tau]

    def term(s, depth, tau):
        if depth == 0:
            return tensor_power(flow(tau) @ f0, s)
        acc = np.zeros((model.S,) * s)
        if model.m_max < 2 or tau == 0:
            return acc
        for xq, wq in zip(x, w):
            sigma = tau * xq
            inner = term(s + 1, depth - 1, sigma)
            coll = np.zeros_like(inner)
            for i in range(s):
                coll += apply_lambda_m(model, s + 1, (i, s), inner, adjoint=True)
            acc += (tau * wq) * free_flow(flow(tau - sigma), contract(coll, [s]), range(s))
        return acc

    total = np.zeros(model.S)
    norms = []
    for n in range(n_max + 1):
        tn = term(1, n, float(t))
        total += tn
        norms.append(float(np.max(np.abs(tn))))
        if n >= 1 and norms[-1] < SERIES_STOP:
            break
    if len(norms) >= 3 and norms[-1] > norms[-2] > SERIES_STOP:
        warnings.warn(f"series terms are not decaying: {norms}", RuntimeWarning, stacklevel=2)
    return OneParticleDensity(total, float(t)), norms


def chaos_functional(model: InteractionModel, b0: GradedSequence, f1_0: np.ndarray, t: float,
                     s_max: int, dt: float = 1e-3) -> tuple[float, float]:
    """Both sides of the propagation-of-chaos identity for a k-ary observable.

    ``b0`` must have exactly one nonzero level ``k``.  The left side pairs the
    limit marginals ``b(t)`` (truncated at ``s_max``) with the chaotic initial
    state built from ``f1_0``; the right side pairs ``b0_k`` with the k-fold
    product of the kinetic solution ``f1(t)``.
    """
    nonzero = [s for s in range(1, b0.n_max + 1) if np.any(b0[s] != 0)]
    if len(nonzero) != 1 or b0.scalar != 0:
        raise ValueError("chaos functional needs exactly one nonzero level in b0")
    k = nonzero[0]
    f0 = np.asarray(f1_0, dtype=float)
    comps = [b0[s] if s <= b0.n_max else np.zeros((model.S,) * s) for s in range(1, s_max + 1)]
    b = integrate_dual_vlasov(model, GradedSequence(0.0, comps), t, dt)
    lhs = sum(pair(b[s], tensor_power(f0, s)) / math.factorial(s) for s in range(1, s_max + 1))
    ft = integrate_vlasov(model, f0, t, dt).f
    rhs = pair(b0[k], tensor_power(ft, k)) / math.factorial(k)
    return float(lhs), float(rhs)
