"""Pure-Python SSA kernel; the reference for the compiled ``_ssa_kernel``.

Both kernels consume the same xoshiro256** streams and perform the same
floating-point operations in the same order, so their trajectories are
bit-identical.

Events are grouped by the ordered tuple of entity *states*: for counts
``c`` the number of ordered tuples of distinct entities in states
``(a_1, ..., a_m)`` is a product of falling counts, so the total rate costs
``O(S**m)`` per step instead of ``O(N**m)``.  Once a state tuple is chosen, the
jumping entity is drawn uniformly among those in state ``a_1``; partner
identities never matter because the kernel only reads their states.
"""

import math

import numpy as np

MASK = 0xFFFFFFFFFFFFFFFF
INV_2_53 = 1.0 / 9007199254740992.0


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & MASK


def next_u64(s):
    """Advance the 4-word xoshiro256** state ``s`` in place and return 64 bits."""
    result = (_rotl((s[1] * 5) & MASK, 7) * 9) & MASK
    t = (s[1] << 17) & MASK
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


def next_uniform(s):
    return (next_u64(s) >> 11) * INV_2_53


def _tuple_multiplicity(counts, digits):
    mult = 1
    for l, d in enumerate(digits):
        used = 0
        for p in range(l):
            if digits[p] == d:
                used += 1
        avail = counts[d] - used
        if avail <= 0:
            return 0
        mult *= avail
    return mult


def _digits(idx, m, S):
    d = [0] * m
    for l in range(m - 1, -1, -1):
        d[l] = idx % S
        idx //= S
    return d


class Tables:
    """Flattened rate and kernel tables consumed by the kernels.

    ``weights`` concatenates ``eps**(m-1) * a[m]`` over orders; ``cdf`` holds
    one cumulative post-jump distribution per state tuple (row), with the
    tail forced to exactly 1.0.
    """

    def __init__(self, S, m_max, weights, cdf, offsets):
        self.S = int(S)
        self.m_max = int(m_max)
        self.weights = list(map(float, weights))
        self.cdf = [list(map(float, row)) for row in cdf]
        self.offsets = list(map(int, offsets))


def _scan(tables, counts, target):
    """Total rate when ``target`` is None, else the row index selected by ``target``."""
    S = tables.S
    acc = 0.0
    last = -1
    for m in range(1, tables.m_max + 1):
        off = tables.offsets[m - 1]
        for idx in range(S**m):
            w = tables.weights[off + idx]
            if w == 0.0:
                continue
            mult = _tuple_multiplicity(counts, _digits(idx, m, S))
            if mult == 0:
                continue
            acc += w * float(mult)
            last = off + idx
            if target is not None and target < acc:
                return off + idx
    return acc if target is None else last


def _order_of(tables, row):
    m = 1
    while m < tables.m_max and row >= tables.offsets[m]:
        m += 1
    return m


def step(tables, x, counts, s, time, t_end):
    """One event of the direct method; returns ``(time, fired)``.

    If no event fires before ``t_end`` (or the total rate is zero) the time is
    set to ``t_end`` and the configuration is left untouched.
    """
    S = tables.S
    R = _scan(tables, counts, None)
    if R <= 0.0:
        return t_end, False
    u = next_uniform(s)
    tau = -math.log(1.0 - u) / R
    if time + tau > t_end:
        return t_end, False
    time += tau
    row = _scan(tables, counts, next_uniform(s) * R)
    m = _order_of(tables, row)
    first = _digits(row - tables.offsets[m - 1], m, S)[0]
    k = int(next_uniform(s) * counts[first])
    if k >= counts[first]:
        k = counts[first] - 1
    i = 0
    seen = 0
    for i in range(len(x)):
        if x[i] == first:
            if seen == k:
                break
            seen += 1
    u = next_uniform(s)
    cdf = tables.cdf[row]
    v = 0
    while u >= cdf[v]:
        v += 1
    x[i] = v
    counts[first] -= 1
    counts[v] += 1
    return time, True


def run_batch(x, t_end, weights, cdf, offsets, S, m_max, rng_states, start=0, stop=None):
    """Evolve replicas ``start:stop`` of ``x`` (shape ``(R, N)``) to ``t_end`` in place.

    ``rng_states`` (shape ``(R, 4)``, uint64) is advanced in place.  Returns
    the number of events per replica.
    """
    tables = Tables(S, m_max, weights, cdf, offsets)
    stop = x.shape[0] if stop is None else stop
    events = np.zeros(stop - start, dtype=np.int64)
    for r in range(start, stop):
        s = [int(w) for w in rng_states[r]]
        xr = [int(v) for v in x[r]]
        counts = [0] * tables.S
        for v in xr:
            counts[v] += 1
        time = 0.0
        n = 0
        while time < t_end:
            time, fired = step(tables, xr, counts, s, time, t_end)
            if not fired:
                break
            n += 1
        x[r, :] = xr
        rng_states[r, :] = s
        events[r - start] = n
    return events
