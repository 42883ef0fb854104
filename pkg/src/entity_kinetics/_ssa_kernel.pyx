# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled SSA kernel, a line-by-line twin of ``_ssa_py``.

Same RNG (xoshiro256**), same summation order and same selection rules, so
trajectories match the pure-Python kernel bit for bit.
"""

import numpy as np

from libc.math cimport log
from libc.stdint cimport int64_t, uint64_t
from libc.stdlib cimport free, malloc


cdef inline uint64_t _rotl(uint64_t x, int k) noexcept nogil:
    return (x << k) | (x >> (64 - k))


cdef inline uint64_t _next_u64(uint64_t* s) noexcept nogil:
    cdef uint64_t result = _rotl(s[1] * 5, 7) * 9
    cdef uint64_t t = s[1] << 17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


cdef inline double _next_uniform(uint64_t* s) noexcept nogil:
    return <double>(_next_u64(s) >> 11) * (1.0 / 9007199254740992.0)


cdef inline void _digits(int64_t idx, int m, int S, int64_t* d) noexcept nogil:
    cdef int l
    for l in range(m - 1, -1, -1):
        d[l] = idx % S
        idx = idx // S


cdef inline int64_t _multiplicity(const int64_t* counts, const int64_t* d, int m) noexcept nogil:
    cdef int64_t mult = 1, used, avail
    cdef int l, p
    for l in range(m):
        used = 0
        for p in range(l):
            if d[p] == d[l]:
                used += 1
        avail = counts[d[l]] - used
        if avail <= 0:
            return 0
        mult *= avail
    return mult


cdef double _scan(const double[::1] weights, const int64_t[::1] offsets, int S, int m_max,
                  const int64_t* counts, int64_t* d, double target, bint select,
                  int64_t* row) noexcept nogil:
    cdef double acc = 0.0, w
    cdef int64_t off, idx, n_rows, mult
    cdef int m
    row[0] = -1
    for m in range(1, m_max + 1):
        off = offsets[m - 1]
        n_rows = 1
        for idx in range(m):
            n_rows *= S
        for idx in range(n_rows):
            w = weights[off + idx]
            if w == 0.0:
                continue
            _digits(idx, m, S, d)
            mult = _multiplicity(counts, d, m)
            if mult == 0:
                continue
            acc += w * <double>mult
            row[0] = off + idx
            if select and target < acc:
                return acc
    return acc


cdef int64_t _run_one(int64_t[::1] x, double t_end, const double[::1] weights,
                      const double[:, ::1] cdf, const int64_t[::1] offsets, int S, int m_max,
                      uint64_t* s, int64_t* counts, int64_t* d) noexcept nogil:
    cdef Py_ssize_t N = x.shape[0], i, seen
    cdef int64_t n = 0, row, k, first, v
    cdef int m
    cdef double time = 0.0, R, u, tau
    for v in range(S):
        counts[v] = 0
    for i in range(N):
        counts[x[i]] += 1
    while time < t_end:
        R = _scan(weights, offsets, S, m_max, counts, d, 0.0, False, &row)
        if R <= 0.0:
            break
        u = _next_uniform(s)
        tau = -log(1.0 - u) / R
        if time + tau > t_end:
            break
        time += tau
        _scan(weights, offsets, S, m_max, counts, d, _next_uniform(s) * R, True, &row)
        m = 1
        while m < m_max and row >= offsets[m]:
            m += 1
        _digits(row - offsets[m - 1], m, S, d)
        first = d[0]
        k = <int64_t>(_next_uniform(s) * <double>counts[first])
        if k >= counts[first]:
            k = counts[first] - 1
        seen = 0
        for i in range(N):
            if x[i] == first:
                if seen == k:
                    break
                seen += 1
        u = _next_uniform(s)
        v = 0
        while u >= cdf[row, v]:
            v += 1
        x[i] = v
        counts[first] -= 1
        counts[v] += 1
        n += 1
    return n


def run_batch(int64_t[:, ::1] x, double t_end, const double[::1] weights,
              const double[:, ::1] cdf, const int64_t[::1] offsets, int S, int m_max,
              uint64_t[:, ::1] rng_states, Py_ssize_t start=0, stop=None):
    """Evolve replicas ``start:stop`` of ``x`` to ``t_end`` in place; returns event counts."""
    cdef Py_ssize_t r, lo = start, hi = x.shape[0] if stop is None else stop
    events = np.zeros(hi - lo, dtype=np.int64)
    cdef int64_t[::1] ev = events
    cdef int64_t* counts = <int64_t*>malloc(S * sizeof(int64_t))
    cdef int64_t* d = <int64_t*>malloc((m_max + 1) * sizeof(int64_t))
    if counts == NULL or d == NULL:
        free(counts)
        free(d)
        raise MemoryError()
    try:
        with nogil:
            for r in range(lo, hi):
                ev[r - lo] = _run_one(x[r], t_end, weights, cdf, offsets, S, m_max,
                                      &rng_states[r, 0], counts, d)
    finally:
        free(counts)
        free(d)
    return events
