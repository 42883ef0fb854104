"""Set partitions and cumulants of the Liouville semigroups.

A cluster argument is a list of elements, each a tuple of 0-based entity
slots.  Its first element is the block of all slots not in ``Z`` (possibly
empty); the others are the singletons of ``Z``.  The cumulant of order
``1 + len(Z)`` is the alternating sum over set partitions of these elements
of products of semigroups, each acting on the slots of one block.
"""

from __future__ import annotations

import functools
import math
from typing import Sequence

import numpy as np

from .errors import ArityError, CapacityError
from .generators import observable_semigroup, slot_operator
from .model import InteractionModel

MAX_ELEMENTS = 6


@functools.lru_cache(maxsize=None)
def partitions(k: int) -> tuple:
    """All set partitions of ``range(k)``, as tuples of sorted blocks.

    Generated from restricted-growth strings, which enumerate each partition
    exactly once.
    """
    if not 1 <= k <= MAX_ELEMENTS:
        raise CapacityError(f"partitions supported for 1 <= k <= {MAX_ELEMENTS}, got {k}")
    out = []

    def grow(prefix, top):
        if len(prefix) == k:
            blocks = [tuple(i for i, b in enumerate(prefix) if b == label) for label in range(top + 1)]
            out.append(tuple(blocks))
            return
        for label in range(top + 2):
            grow(prefix + [label], max(top, label))

    grow([0], 0)
    return tuple(out)


@functools.lru_cache(maxsize=None)
def bell(k: int) -> int:
    # Bell triangle
    row = [1]
    for _ in range(k):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]


def partition_weight(size: int) -> int:
    """``(-1)**(|P| - 1) * (|P| - 1)!`` for a partition with ``size`` blocks."""
    return (-1) ** (size - 1) * math.factorial(size - 1)


def cluster_argument(s: int, Z: Sequence[int]) -> list:
    Z = tuple(int(j) for j in Z)
    if len(set(Z)) != len(Z) or any(not 0 <= j < s for j in Z):
        raise ArityError(f"Z={Z} must be distinct slots in range({s})")
    rest = tuple(i for i in range(s) if i not in Z)
    return [rest] + [(j,) for j in Z]


def declusterize(elements) -> tuple:
    """Union of the entity slots contained in a collection of cluster elements."""
    return tuple(sorted(i for el in elements for i in el))


def cumulant(model: InteractionModel, t: float, s: int, Z: Sequence[int] = ()) -> np.ndarray:
    """Dense ``(S**s, S**s)`` matrix of the cumulant for cluster ``({Y \\ Z}, Z)``."""
    elements = cluster_argument(s, Z)
    k = len(elements)
    if k > MAX_ELEMENTS:
        raise CapacityError(f"cumulant order {k} exceeds {MAX_ELEMENTS}")
    model.space.check_arity(s, operator=True)
    S = model.S
    D = S**s
    block_ops = {}

    def block_operator(slots):
        if slots not in block_ops:
            if slots:
                E = observable_semigroup(model, len(slots), float(t))
                block_ops[slots] = slot_operator(E, slots, s, S)
            else:
                block_ops[slots] = None
        return block_ops[slots]

    total = np.zeros((D, D))
    for P in partitions(k):
        prod = None
        for block in P:
            op = block_operator(declusterize(elements[i] for i in block))
            if op is not None:
                prod = op if prod is None else prod @ op
        if prod is None:
            prod = np.eye(D)
        total += partition_weight(len(P)) * prod
    return total
