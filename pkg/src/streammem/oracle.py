"""Exact knapsack solvers used as test oracles, plus the greedy simulator.

The exhaustive solver enumerates all subsets (refused above 20 items); a
dynamic-program fallback covers larger integer-cost instances. The greedy
simulator replays the engine's eviction rule on bare (utility, cost) items
so policy and oracle can be compared on thousands of instances quickly.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import PreconditionError
from .optimizer import victim_order_key

EXHAUSTIVE_LIMIT = 20
DP_CAPACITY_LIMIT = 10_000


@lru_cache(maxsize=8)
def _bit_matrix(n: int) -> np.ndarray:
    masks = np.arange(1 << n, dtype=np.uint32)
    return ((masks[:, None] >> np.arange(n, dtype=np.uint32)) & 1).astype(np.uint8)


def oracle_knapsack(
    items: list[tuple[float, float]], capacity: float
) -> tuple[tuple[int, ...], float]:
    """Exact maximizer of total utility under a cost cap.

    Returns (indices, optimal value); ties resolve to the lexicographically
    smallest index set. Uses exhaustive enumeration up to 20 items and a
    dynamic program beyond that (integer costs, capacity <= 10,000 only).
    """
    if not items:
        return (), 0.0
    n = len(items)
    if n > EXHAUSTIVE_LIMIT:
        return _knapsack_dp(items, capacity)

    utilities = np.array([u for u, _ in items], dtype=np.float64)
    costs = np.array([c for _, c in items], dtype=np.float64)
    # uint8 keeps the n=20 case around 20MB; cached across repeated solves
    bits = _bit_matrix(n)
    feasible = bits @ costs <= capacity
    values = np.where(feasible, bits @ utilities, -np.inf)
    best_value = float(values.max())
    if best_value == -np.inf:  # capacity < 0: nothing fits, empty set wins
        return (), 0.0
    winners = np.flatnonzero(values == best_value)
    best_set = min(
        tuple(i for i in range(n) if mask >> i & 1) for mask in winners
    )
    return best_set, best_value


def _knapsack_dp(
    items: list[tuple[float, float]], capacity: float
) -> tuple[tuple[int, ...], float]:
    costs = [c for _, c in items]
    if any(int(c) != c or c < 0 for c in costs):
        raise PreconditionError(
            f"more than {EXHAUSTIVE_LIMIT} items requires integer costs for the DP fallback"
        )
    cap = int(min(capacity, sum(costs)))
    if cap > DP_CAPACITY_LIMIT:
        raise PreconditionError(f"DP fallback supports capacity <= {DP_CAPACITY_LIMIT}")
    if cap < 0:
        return (), 0.0
    n = len(items)
    best = np.zeros(cap + 1, dtype=np.float64)
    take = np.zeros((n, cap + 1), dtype=bool)
    for i, (u, c) in enumerate(items):
        c = int(c)
        if c > cap:
            continue
        candidate = best[: cap - c + 1] + u
        improved = candidate > best[c:]
        best[c:] = np.where(improved, candidate, best[c:])
        take[i, c:] = improved
    chosen: list[int] = []
    remaining = int(np.argmax(best))
    for i in range(n - 1, -1, -1):
        if take[i, remaining]:
            chosen.append(i)
            remaining -= int(items[i][1])
    chosen.reverse()
    return tuple(chosen), float(best.max())


def greedy_retain(
    items: list[tuple[float, float]], capacity: float
) -> tuple[int, ...]:
    """Simulate least-regret eviction on bare items; returns retained indices.

    Uses the engine's victim ordering exactly: minimal utility density
    first, larger cost breaking ties, then smaller index.
    """
    alive = set(range(len(items)))
    total = sum(c for _, c in items)
    order = sorted(
        victim_order_key(u / c, c, i) for i, (u, c) in enumerate(items)
    )
    for _, _, idx in order:
        if total <= capacity:
            break
        alive.discard(idx)
        total -= items[idx][1]
    return tuple(sorted(alive))
