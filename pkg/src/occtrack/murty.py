"""Murty's ranked assignments on top of scipy's linear assignment solver."""

from __future__ import annotations

import heapq
import itertools

import numpy as np
from scipy.optimize import linear_sum_assignment

# Stand-in for forbidden entries; any solution using one is infeasible.
_BIG = 1e15


def _solve(C: np.ndarray) -> tuple[int, ...] | None:
    if C.shape[0] == 0:
        return ()
    rows, cols = linear_sum_assignment(C)
    if np.any(C[rows, cols] >= _BIG):
        return None
    return tuple(int(c) for c in cols[np.argsort(rows)])


def _total(C: np.ndarray, a: tuple[int, ...]) -> float:
    return float(sum(C[i, j] for i, j in enumerate(a)))


def murty_kbest(cost, K: int) -> list[tuple[float, tuple[int, ...]]]:
    """The ``K`` cheapest row-complete assignments of ``cost``.

    ``cost`` is ``n x m`` with ``n <= m``; ``inf`` marks forbidden pairs.
    Returns ``(total_cost, cols)`` pairs where ``cols[i]`` is the column of
    row ``i``, sorted by cost and then lexicographically by ``cols``.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    C = np.asarray(cost, dtype=float)
    if C.ndim != 2 or C.shape[0] > C.shape[1]:
        raise ValueError("cost must be n x m with n <= m")
    n = C.shape[0]
    base = np.where(np.isfinite(C), C, _BIG)
    first = _solve(base)
    if first is None:
        return []
    if n == 0:
        return [(0.0, ())]
    if K == 1:
        return [(_total(C, first), first)]
    heap = [(_total(C, first), first, (), ())]
    seen = {first}
    out = []
    while heap and len(out) < K:
        c, a, forced, forbidden = heapq.heappop(heap)
        out.append((c, a))
        # Partition the remaining solution space of this node around ``a``.
        for i in range(n):
            sub_forbidden = forbidden + ((i, a[i]),)
            sub_forced = forced + tuple((k, a[k]) for k in range(i) if (k, a[k]) not in forced)
            M = base.copy()
            for r, col in sub_forbidden:
                M[r, col] = _BIG
            for r, col in sub_forced:
                keep = M[r, col]
                M[r, :] = _BIG
                M[:, col] = _BIG
                M[r, col] = keep
            sol = _solve(M)
            if sol is None or sol in seen:
                continue
            seen.add(sol)
            heapq.heappush(heap, (_total(C, sol), sol, sub_forced, sub_forbidden))
    return out


def brute_force_kbest(cost, K: int) -> list[tuple[float, tuple[int, ...]]]:
    """Reference enumeration of all finite-cost assignments."""
    C = np.asarray(cost, dtype=float)
    n, m = C.shape
    sols = []
    for cols in itertools.permutations(range(m), n):
        c = _total(C, cols)
        if np.isfinite(c):
            sols.append((c, tuple(cols)))
    sols.sort()
    return sols[:K]
