"""Best caching action under the capacity limit: 0/1 knapsack over the
per-task value contributions.

Sizes are rounded *up* to the capacity grid and the capacity down, so a
returned selection never exceeds the true byte budget.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

BRUTE_FORCE_MAX_F = 20


@dataclass
class DpTables:
    value: np.ndarray
    choice: np.ndarray


def to_units(sizes, unit: float) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=float)
    # 1e-9 slack keeps exact multiples of the unit from rounding up
    return np.ceil(sizes / unit - 1e-9).astype(np.int64)


def capacity_units(capacity: float, unit: float) -> int:
    return int(math.floor(capacity / unit + 1e-9))


def solve_units(values, weights, cap: int) -> tuple[np.ndarray, DpTables]:
    """Knapsack on integer weights and capacity."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=np.int64)
    if len(values) != len(weights):
        raise ValueError("values and weights differ in length")
    if cap < 0:
        raise ValueError("capacity must be non-negative")
    if len(values) == 0:
        return np.zeros(0, dtype=np.int8), DpTables(np.zeros((1, cap + 1)), np.zeros((1, cap + 1), np.int8))
    xi, xr, b = kernels.knapsack_tables(values, weights, int(cap))
    return b, DpTables(xi, xr)


def solve(values, sizes, capacity: float, unit: float = 1.0) -> np.ndarray:
    """Cache state maximising sum(b_f * O_f) with sum(b_f * D_f) <= C."""
    b, _ = solve_units(values, to_units(sizes, unit), capacity_units(capacity, unit))
    return b


def selection_value(values, b) -> float:
    """Correctly rounded value of a selection (independent of summation order)."""
    values = np.asarray(values, dtype=float)
    return math.fsum(values[np.asarray(b, dtype=bool)].tolist())


def max_value(values, sizes, capacity: float, unit: float = 1.0) -> float:
    """Best achievable sum(b_f * O_f) under the capacity; 0 for the empty cache."""
    return selection_value(values, solve(values, sizes, capacity, unit))


def brute_force_units(values, weights, cap: int) -> tuple[np.ndarray, float]:
    """Exhaustive search over all 2^F subsets (F <= 20).

    Ties go to the lighter subset, then to the lexicographically smaller mask.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=np.int64)
    F = len(values)
    if F > BRUTE_FORCE_MAX_F:
        raise ValueError(f"brute force limited to F <= {BRUTE_FORCE_MAX_F}")
    masks = ((np.arange(2 ** F)[:, None] >> np.arange(F)) & 1).astype(np.int8)
    w = masks.astype(np.int64) @ weights
    masks = masks[w <= cap]
    w = w[w <= cap]
    approx = masks @ values
    # rescore the near-best subsets exactly; matmul rounding cannot hide more than this
    slack = 1e-9 * (np.abs(values).sum() + 1.0)
    best, best_val, best_w = np.zeros(F, dtype=np.int8), 0.0, 0
    for i in np.flatnonzero(approx >= approx.max() - slack):
        val = selection_value(values, masks[i])
        if val > best_val or (val == best_val and w[i] < best_w):
            best, best_val, best_w = masks[i], val, int(w[i])
    return best.copy(), best_val


def brute_force(values, sizes, capacity: float, unit: float = 1.0) -> tuple[np.ndarray, float]:
    return brute_force_units(values, to_units(sizes, unit), capacity_units(capacity, unit))
