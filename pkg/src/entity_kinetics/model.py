"""Interaction models: rate tables, transition kernels and the scaling parameter.

For interaction order ``m`` the model stores

* ``rates[m]``: array of shape ``(S,) * m``, the rate ``a[m](x_1, ..., x_m)`` at
  which the ordered group ``(x_1, ..., x_m)`` interacts;
* ``kernels[m]``: array of shape ``(S,) * (m + 1)`` whose first axis is the
  post-jump state ``v`` of the first entity, so ``kernels[m][:, x_1, ..., x_m]``
  is a probability vector.

Tables are unscaled; the weight ``epsilon ** (m - 1)`` is applied when the
generator is assembled, so a single model serves a whole epsilon sweep via
:meth:`InteractionModel.with_epsilon`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ModelError
from .state_space import StateSpace

BUILTIN_MODELS = ("uniform-drift", "imitation", "mixed")

NORMALIZATION_TOL = 1e-12
RENORMALIZE_TOL = 1e-6


@dataclass(frozen=True)
class Diagnostic:
    check: str
    m: int
    index: tuple
    value: float

    def __str__(self):
        return f"{self.check}: order m={self.m}, entry {self.index}, value {self.value!r}"


@dataclass(frozen=True, eq=False)
class InteractionModel:
    space: StateSpace
    rates: Mapping[int, np.ndarray]
    kernels: Mapping[int, np.ndarray]
    epsilon: float = 1.0
    m_max: int | None = None
    rate_bounds: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        rates = {int(m): _frozen(r) for m, r in self.rates.items()}
        kernels = {int(m): _frozen(k) for m, k in self.kernels.items()}
        m_max = self.space.M if self.m_max is None else int(self.m_max)
        if m_max < 1:
            raise ModelError(f"m_max must be >= 1, got {m_max}")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ModelError(f"epsilon must be a positive finite number, got {self.epsilon}")
        S = self.space.S
        for m in range(1, m_max + 1):
            if m not in rates or m not in kernels:
                raise ModelError(f"missing rate or kernel table for interaction order {m}")
            if rates[m].shape != (S,) * m:
                raise ModelError(f"rates[{m}] has shape {rates[m].shape}, expected {(S,) * m}")
            if kernels[m].shape != (S,) * (m + 1):
                raise ModelError(
                    f"kernels[{m}] has shape {kernels[m].shape}, expected {(S,) * (m + 1)}"
                )
        bounds = {m: float(self.rate_bounds.get(m, np.max(rates[m], initial=0.0)))
                  for m in range(1, m_max + 1)}
        object.__setattr__(self, "rates", {m: rates[m] for m in range(1, m_max + 1)})
        object.__setattr__(self, "kernels", {m: kernels[m] for m in range(1, m_max + 1)})
        object.__setattr__(self, "m_max", m_max)
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "rate_bounds", bounds)

    @property
    def S(self) -> int:
        return self.space.S

    def orders(self):
        return range(1, self.m_max + 1)

    def weight(self, m: int) -> float:
        """The scaling factor ``epsilon ** (m - 1)`` of order-``m`` interactions."""
        return self.epsilon ** (m - 1)

    def with_epsilon(self, epsilon: float) -> "InteractionModel":
        return replace(self, epsilon=epsilon)

    def with_rates(self, m: int, table) -> "InteractionModel":
        rates = dict(self.rates)
        rates[m] = np.broadcast_to(np.asarray(table, dtype=float), (self.S,) * m)
        bounds = {k: v for k, v in self.rate_bounds.items() if k != m}
        return replace(self, rates=rates, rate_bounds=bounds)

    def truncated(self, m_max: int) -> "InteractionModel":
        """Same tables restricted to interaction orders ``<= m_max``."""
        return replace(self, m_max=m_max)

    def to_dict(self) -> dict:
        return {
            "M": self.space.M,
            "K": self.space.K,
            "m_max": self.m_max,
            "epsilon": self.epsilon,
            "rates": {str(m): self.rates[m].ravel().tolist() for m in self.orders()},
            "kernels": {str(m): self.kernels[m].ravel().tolist() for m in self.orders()},
            "rate_bounds": {str(m): b for m, b in self.rate_bounds.items()},
        }


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def validate(model: InteractionModel, tol: float = NORMALIZATION_TOL) -> list[Diagnostic]:
    """Check rate bounds and kernel normalization; an empty list means ok.

    Each check reports only its first violating entry per interaction order.
    """
    out = []
    for m in model.orders():
        a = model.rates[m]
        A = model.kernels[m]
        checks = [
            ("non-finite rate", ~np.isfinite(a), a),
            ("negative rate", a < 0, a),
            ("rate exceeds bound", a > model.rate_bounds[m] + tol, a),
            ("non-finite kernel entry", ~np.isfinite(A), A),
            ("negative kernel entry", A < 0, A),
        ]
        row_sums = A.sum(axis=0)
        checks.append(("kernel row not normalized", np.abs(row_sums - 1.0) > tol, row_sums))
        for name, bad, values in checks:
            if np.any(bad):
                idx = tuple(int(i) for i in np.argwhere(bad)[0])
                out.append(Diagnostic(name, m, idx, float(values[idx])))
    return out


def normalize_kernels(model: InteractionModel, tol: float = RENORMALIZE_TOL) -> InteractionModel:
    """Divide every kernel row by its sum when that sum is within ``tol`` of 1.

    Rows further off are left alone so that :func:`validate` reports them.
    """
    kernels = {}
    for m in model.orders():
        A = np.array(model.kernels[m])
        sums = A.sum(axis=0)
        fix = np.abs(sums - 1.0) <= tol
        A[:, fix] = A[:, fix] / sums[fix]
        kernels[m] = A
    return replace(model, kernels=kernels)


def require_valid(model: InteractionModel) -> InteractionModel:
    diags = validate(model)
    if diags:
        raise ModelError("; ".join(str(d) for d in diags), diags)
    return model


def builtin(name: str, space: StateSpace, epsilon: float = 1.0) -> InteractionModel:
    """One of the packaged example models.

    ``uniform-drift``
        Each entity jumps at rate 1 to a uniformly random state.
    ``imitation``
        ``uniform-drift`` plus pair interactions at rate 1 in which the first
        entity adopts the full state of its partner.
    ``mixed``
        ``imitation`` with pair rate 1 across subpopulations and 1/2 within one.
    """
    S = space.S
    a1 = np.ones(S)
    A1 = np.full((S, S), 1.0 / S)
    if name == "uniform-drift":
        return InteractionModel(space, {1: a1}, {1: A1}, epsilon=epsilon, m_max=1)
    if name not in BUILTIN_MODELS:
        raise ValueError(f"unknown builtin model {name!r}; choose from {BUILTIN_MODELS}")
    # first entity copies the second: A2[v, x1, x2] = delta(v, x2)
    A2 = np.zeros((S, S, S))
    for x2 in range(S):
        A2[x2, :, x2] = 1.0
    if name == "imitation":
        a2 = np.ones((S, S))
    else:
        j = space.subpopulation()
        a2 = np.where(j[:, None] != j[None, :], 1.0, 0.5)
    return InteractionModel(space, {1: a1, 2: a2}, {1: A1, 2: A2}, epsilon=epsilon, m_max=2)


def random_model(space: StateSpace, m_max: int = 2, epsilon: float = 1.0, seed: int = 0,
                 rate_scale: float = 1.0) -> InteractionModel:
    """A model with generic (asymmetric) random rates and kernels.

    Useful in tests because, unlike the builtins, its pair interaction leaves
    a nonzero collision term in the one-particle kinetic equation.
    """
    rng = np.random.default_rng(seed)
    S = space.S
    rates, kernels = {}, {}
    for m in range(1, m_max + 1):
        rates[m] = rate_scale * rng.uniform(0.1, 1.0, size=(S,) * m)
        A = rng.uniform(0.05, 1.0, size=(S,) * (m + 1))
        kernels[m] = A / A.sum(axis=0, keepdims=True)
    return InteractionModel(space, rates, kernels, epsilon=epsilon, m_max=m_max)


def model_from_dict(data: dict, renormalize: bool = True) -> InteractionModel:
    try:
        space = StateSpace(int(data["M"]), int(data["K"]))
        m_max = int(data.get("m_max", space.M))
        S = space.S
        rates = {int(m): np.asarray(v, dtype=float).reshape((S,) * int(m))
                 for m, v in data["rates"].items() if int(m) <= m_max}
        kernels = {int(m): np.asarray(v, dtype=float).reshape((S,) * (int(m) + 1))
                   for m, v in data["kernels"].items() if int(m) <= m_max}
        bounds = {int(m): float(b) for m, b in data.get("rate_bounds", {}).items()
                  if int(m) <= m_max}
        model = InteractionModel(space, rates, kernels, epsilon=float(data.get("epsilon", 1.0)),
                                 m_max=m_max, rate_bounds=bounds)
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed model description: {exc!r}") from exc
    except ValueError as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"malformed model description: {exc}") from exc
    if renormalize:
        model = normalize_kernels(model)
    return require_valid(model)


def load_model(path) -> InteractionModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def save_model(model: InteractionModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=1))


@dataclass(frozen=True)
class ScalingConfig:
    """A decreasing sequence of scaling parameters for convergence studies."""

    epsilon_sequence: tuple

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilon_sequence)
        if not eps or any(e <= 0 for e in eps):
            raise ValueError("epsilons must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilon sequence must be strictly decreasing")
        object.__setattr__(self, "epsilon_sequence", eps)

    @staticmethod
    def N_of_epsilon(epsilon: float) -> int:
        return int(round(1.0 / epsilon))
