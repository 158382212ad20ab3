"""Comparison caching policies.

Every update runs at slot end: it sees the slot's requests and the current
cache and returns the per-task update (-1/0/+1). LRU and FIFO admit software
only when it is requested; LFU and LMP rebuild the whole cache each slot.
Task software larger than the cache is never admitted.
"""
from __future__ import annotations

from collections import deque

import numpy as np

from . import game
from .config import SystemConfig
from .env import SlotRealization, TaskLibrary


class PolicyState:
    """Bookkeeping shared by the baseline policies (ids are 1-based)."""

    def __init__(self, F: int):
        self.F = F
        self.t = 0
        self.last_request = np.full(F + 1, -1, dtype=np.int64)
        self.counts = np.zeros(F + 1, dtype=np.int64)
        self.queue: deque[int] = deque()
        self.transitions = np.zeros((F + 1, F + 1), dtype=np.int64)
        self.prev_mu: np.ndarray | None = None

    def observe(self, mu) -> None:
        """Record one slot of requests."""
        self.t += 1
        for f in mu:
            if f > 0:
                self.last_request[f] = self.t
                self.counts[f] += 1
        if self.prev_mu is not None:
            for i, j in zip(self.prev_mu, mu):
                self.transitions[i, j] += 1
        self.prev_mu = np.array(mu, copy=True)


def _requested(mu) -> list[int]:
    return sorted({int(f) for f in mu if f > 0})


def _used(b, sizes) -> float:
    return float(np.asarray(sizes)[np.asarray(b, dtype=bool)].sum())


def _reactive_update(state: PolicyState, mu, b, tasks: TaskLibrary, C: float, victim) -> np.ndarray:
    """Admit requested uncached software, evicting ``victim(cached)`` until it fits."""
    sizes = tasks.software_bytes
    new = np.array(b, dtype=np.int8)
    for f in _requested(mu):
        if new[f - 1] or sizes[f - 1] > C:
            continue
        while _used(new, sizes) + sizes[f - 1] > C:
            cached = [g for g in range(1, state.F + 1) if new[g - 1]]
            out = victim(cached)
            new[out - 1] = 0
            if out in state.queue:
                state.queue.remove(out)
        new[f - 1] = 1
        state.queue.append(f)
    return new - np.asarray(b, dtype=np.int8)


def lru_update(state: PolicyState, mu, b, tasks: TaskLibrary, C: float) -> np.ndarray:
    state.observe(mu)
    return _reactive_update(state, mu, b, tasks, C,
                            lambda cached: min(cached, key=lambda g: (state.last_request[g], g)))


def fifo_update(state: PolicyState, mu, b, tasks: TaskLibrary, C: float) -> np.ndarray:
    state.observe(mu)
    return _reactive_update(state, mu, b, tasks, C, lambda cached: state.queue[0])


def _fill(order, sizes, C: float, F: int) -> np.ndarray:
    """Walk tasks in ``order`` caching each one that still fits."""
    new = np.zeros(F, dtype=np.int8)
    used = 0.0
    for f in order:
        if used + sizes[f - 1] <= C:
            new[f - 1] = 1
            used += sizes[f - 1]
    return new


def lfu_update(state: PolicyState, mu, b, tasks: TaskLibrary, C: float) -> np.ndarray:
    """Cache by descending request count (ties: lower id); never-requested tasks stay out."""
    state.observe(mu)
    seen = [f for f in range(1, state.F + 1) if state.counts[f] > 0]
    order = sorted(seen, key=lambda f: (-state.counts[f], f))
    return _fill(order, tasks.software_bytes, C, state.F) - np.asarray(b, dtype=np.int8)


def lmp_scores(state: PolicyState, mu) -> np.ndarray:
    """Predicted next-slot request share per task (index f-1).

    Half short-term: empirical transition frequencies out of each user's current
    request, normalised over tasks. Half long-term: normalised request counts.
    Falls back to uniform pieces where there is no history.
    """
    F = state.F
    uniform = np.full(F, 1.0 / F)
    total = state.counts[1:].sum()
    longterm = state.counts[1:] / total if total > 0 else uniform
    short = np.zeros(F)
    for i in mu:
        row = state.transitions[i, 1:]
        if row.sum() > 0:
            short += row / row.sum()
        else:
            short += longterm
    short = short / short.sum() if short.sum() > 0 else uniform
    return 0.5 * short + 0.5 * longterm


def lmp_update(state: PolicyState, mu, b, tasks: TaskLibrary, C: float) -> np.ndarray:
    """Fill by predicted share per byte, descending (ties: lower id)."""
    state.observe(mu)
    score = lmp_scores(state, mu)
    sizes = tasks.software_bytes
    density = score / sizes
    order = sorted((f for f in range(1, state.F + 1) if score[f - 1] > 0),
                   key=lambda f: (-density[f - 1], f))
    return _fill(order, sizes, C, state.F) - np.asarray(b, dtype=np.int8)


def pure_offloading(mu, slot: SlotRealization, tasks: TaskLibrary, cfg: SystemConfig,
                    rng: np.random.Generator) -> game.GameOutcome:
    """Offloading game with nothing cached."""
    return game.solve_ne(mu, np.zeros(cfg.F, dtype=np.int8), slot, tasks, cfg, rng)


UPDATES = {"lru": lru_update, "lfu": lfu_update, "fifo": fifo_update, "lmp": lmp_update}
