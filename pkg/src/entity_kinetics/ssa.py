"""Exact stochastic simulation of the N-entity jump process.

Events are ordered tuples of distinct entities ``(i_1, ..., i_m)`` firing at
rate ``eps**(m-1) a[m](x_{i_1}, ..., x_{i_m})``; entity ``i_1`` then jumps to
``v ~ A[m](v; x_{i_1}, ..., x_{i_m})``.

The event loop lives in a compiled kernel when available, with a pure-Python
kernel as fallback.  Both draw from per-replica xoshiro256** streams seeded by
``numpy.random.SeedSequence(seed, spawn_key=(stream,))`` and produce
bit-identical results.  Set ``ENTITY_KINETICS_BACKEND=python`` to force the
fallback and ``ENTITY_KINETICS_THREADS`` to cap the worker threads (0 = auto).
"""

from __future__ import annotations

import functools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _ssa_py
from .errors import ArityError
from .model import InteractionModel
from .state_space import EntityState, StateSpace

try:
    from . import _ssa_kernel as _compiled
except ImportError:  # extension not built
    _compiled = None

INIT_STREAM = 2**32
MAX_REPLICAS = 2**32


def available_backends() -> tuple:
    return ("compiled", "python") if _compiled is not None else ("python",)


def default_backend() -> str:
    if os.environ.get("ENTITY_KINETICS_BACKEND", "").lower() == "python" or _compiled is None:
        return "python"
    return "compiled"


BACKEND = default_backend()


def thread_count() -> int:
    raw = os.environ.get("ENTITY_KINETICS_THREADS", "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError(f"ENTITY_KINETICS_THREADS must be >= 0, got {n}")
    return n if n > 0 else (os.cpu_count() or 1)


def _kernel(backend: str | None):
    backend = backend or BACKEND
    if backend == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled SSA kernel is not built")
        return _compiled.run_batch
    if backend == "python":
        return _ssa_py.run_batch
    raise ValueError(f"unknown backend {backend!r}")


@dataclass(frozen=True)
class RngSpec:
    """Seed plus stream id; each replica owns one stream."""

    seed: int
    stream: int = 0

    def state(self) -> np.ndarray:
        return stream_states(self.seed, [self.stream])[0]


def stream_states(seed: int, streams) -> np.ndarray:
    """xoshiro256** states, shape ``(len(streams), 4)``, one per stream id."""
    out = np.empty((len(streams), 4), dtype=np.uint64)
    for k, stream in enumerate(streams):
        st = np.random.SeedSequence(int(seed), spawn_key=(int(stream),)).generate_state(4, np.uint64)
        if not st.any():
            st[0] = 1
        out[k] = st
    return out


class Stream:
    """Mutable xoshiro256** stream, shared format with the kernels."""

    def __init__(self, spec: RngSpec):
        self.spec = spec
        self.words = [int(w) for w in spec.state()]

    def uniform(self) -> float:
        return _ssa_py.next_uniform(self.words)


@dataclass
class Configuration:
    """States of N entities (flat indices ``j * K + u``) at a given time."""

    states: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.int64).ravel()

    @property
    def N(self) -> int:
        return int(self.states.size)

    @classmethod
    def from_entities(cls, space: StateSpace, entities, time: float = 0.0) -> "Configuration":
        return cls([space.flatten(e) for e in entities], time)

    def entities(self, space: StateSpace) -> list[EntityState]:
        return [space.unflatten(int(x)) for x in self.states]

    def counts(self, S: int) -> np.ndarray:
        return np.bincount(self.states, minlength=S)


@dataclass(frozen=True)
class JumpTables:
    """Rate weights and cumulative kernel rows in the layout the kernels read."""

    S: int
    m_max: int
    weights: np.ndarray
    cdf: np.ndarray
    offsets: np.ndarray = field(repr=False)


@functools.lru_cache(maxsize=64)
def jump_tables(model: InteractionModel) -> JumpTables:
    S = model.S
    weights, rows, offsets = [], [], []
    pos = 0
    for m in range(1, model.m_max + 1):
        offsets.append(pos)
        w = model.weight(m) * np.asarray(model.rates[m], dtype=float).ravel()
        probs = np.moveaxis(np.asarray(model.kernels[m], dtype=float), 0, -1).reshape(-1, S)
        weights.append(w)
        rows.append(probs)
        pos += S**m
    probs = np.concatenate(rows)
    cdf = np.cumsum(probs, axis=1)
    for r in range(cdf.shape[0]):
        positive = np.flatnonzero(probs[r] > 0)
        last = positive[-1] if positive.size else 0
        # roundoff in the cumulative sum must never select a zero-probability state
        cdf[r, last:] = 1.0
    return JumpTables(S, model.m_max, np.ascontiguousarray(np.concatenate(weights)),
                      np.ascontiguousarray(cdf), np.asarray(offsets, dtype=np.int64))


def total_rate(model: InteractionModel, cfg: Configuration) -> float:
    tb = jump_tables(model)
    tables = _ssa_py.Tables(tb.S, tb.m_max, tb.weights, tb.cdf, tb.offsets)
    return _ssa_py._scan(tables, [int(c) for c in cfg.counts(tb.S)], None)


def step(model: InteractionModel, cfg: Configuration, rng: Stream,
         horizon: float = math.inf) -> Configuration:
    """Fire one event; with no event before ``horizon`` the state freezes at the horizon."""
    tb = jump_tables(model)
    tables = _ssa_py.Tables(tb.S, tb.m_max, tb.weights, tb.cdf, tb.offsets)
    x = [int(v) for v in cfg.states]
    counts = [int(c) for c in cfg.counts(tb.S)]
    time, _ = _ssa_py.step(tables, x, counts, rng.words, float(cfg.time), horizon)
    return Configuration(x, time)


def simulate(model: InteractionModel, x0: np.ndarray, t: float, seed: int,
             streams=None, backend: str | None = None, threads: int | None = None):
    """Evolve every row of ``x0`` (shape ``(R, N)``) to time ``t``.

    Row ``r`` uses stream ``streams[r]`` (default ``r``).  Returns the final
    states and the number of events per replica; results do not depend on
    the thread count.
    """
    if t < 0 or not math.isfinite(t):
        raise ValueError(f"time must be finite and >= 0, got {t}")
    x = np.ascontiguousarray(np.array(x0, dtype=np.int64, ndmin=2))
    R = x.shape[0]
    if R > MAX_REPLICAS:
        raise ValueError(f"at most {MAX_REPLICAS} replicas")
    tb = jump_tables(model)
    if x.size and (x.min() < 0 or x.max() >= tb.S):
        raise ArityError(f"entity states must lie in range({tb.S})")
    streams = range(R) if streams is None else streams
    rng = stream_states(seed, list(streams))
    run = _kernel(backend)
    args = (float(t), tb.weights, tb.cdf, tb.offsets, tb.S, tb.m_max, rng)
    n_threads = 1 if (backend or BACKEND) == "python" else (threads or thread_count())
    n_threads = max(1, min(n_threads, R))
    if n_threads == 1:
        events = run(x, *args, 0, R)
    else:
        bounds = np.linspace(0, R, n_threads + 1).astype(int)
        with ThreadPoolExecutor(n_threads) as pool:
            parts = list(pool.map(lambda k: run(x, *args, int(bounds[k]), int(bounds[k + 1])),
                                  range(n_threads)))
        events = np.concatenate(parts)
    return x, np.asarray(events, dtype=np.int64)


def estimate_observable(model: InteractionModel, cfg0: Configuration, b: np.ndarray, t: float,
                        replicas: int = 10_000, seed: int = 0, backend: str | None = None):
    """Monte Carlo ``E[b(X_t) | X_0 = cfg0]``: returns ``(mean, stderr)``."""
    if replicas < 2:
        raise ValueError("need at least 2 replicas")
    b = np.asarray(b, dtype=float)
    if b.shape != (model.S,) * cfg0.N:
        raise ArityError(f"observable shape {b.shape} does not match N={cfg0.N}")
    x0 = np.broadcast_to(cfg0.states, (replicas, cfg0.N))
    x, _ = simulate(model, x0, t, seed, backend=backend)
    values = b[tuple(x.T)]
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(replicas))


@dataclass
class EmpiricalMarginal:
    f: np.ndarray
    stderr: np.ndarray
    N: int
    t: float
    replicas: int
    events: np.ndarray = field(repr=False, default=None)
    per_replica: np.ndarray = field(repr=False, default=None)

    @property
    def mass(self) -> float:
        return float(self.f.sum())


def sample_initial(f1_0: np.ndarray, N: int, replicas: int, seed: int) -> np.ndarray:
    """i.i.d. initial states from ``f1_0``, from a stream disjoint from the replica streams."""
    p = np.asarray(f1_0, dtype=float)
    if p.min() < 0 or not math.isclose(p.sum(), 1.0, abs_tol=1e-12):
        raise ValueError("initial density must be a probability vector")
    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(INIT_STREAM,))))
    return gen.choice(p.size, size=(replicas, N), p=p / p.sum()).astype(np.int64)


def histograms(x: np.ndarray, S: int) -> np.ndarray:
    """Per-replica state frequencies, shape ``(R, S)``."""
    R, N = x.shape
    flat = (x + S * np.arange(R)[:, None]).ravel()
    return np.bincount(flat, minlength=R * S).reshape(R, S) / N


def empirical_marginal(model: InteractionModel, f1_0: np.ndarray, N: int, t: float,
                       replicas: int = 10_000, seed: int = 0, couple_epsilon: bool = True,
                       backend: str | None = None) -> EmpiricalMarginal:
    """Empirical one-entity law at time ``t`` from i.i.d. initial entities.

    With ``couple_epsilon`` the rates use ``eps = 1/N``.
    """
    if N < 1 or replicas < 2:
        raise ValueError("need N >= 1 and replicas >= 2")
    if couple_epsilon:
        model = model.with_epsilon(1.0 / N)
    x0 = sample_initial(f1_0, N, replicas, seed)
    x, events = simulate(model, x0, t, seed, backend=backend)
    h = histograms(x, model.S)
    return EmpiricalMarginal(h.mean(axis=0), h.std(axis=0, ddof=1) / math.sqrt(replicas),
                             N, float(t), replicas, events, h)


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())
