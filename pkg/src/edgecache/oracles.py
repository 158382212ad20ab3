"""Brute-force reference checks built only on the formulas in ``env``."""
from __future__ import annotations

import itertools

import numpy as np

from . import env
from .config import SystemConfig
from .env import SlotRealization, TaskLibrary


def _cost(k, alpha, mu, b, slot, tasks, cfg):
    """User k's energy, or None when its offload misses the deadline."""
    f = int(mu[k])
    task = tasks[f]
    if alpha[k] == 0:
        return env.local_energy(task, cfg)
    cached = int(b[f - 1])
    if env.offload_delay(k, task, cached, alpha, slot, cfg) > cfg.slot_len:
        return None
    return env.offload_energy(k, task, cached, alpha, slot, cfg)


def profitable_deviations(alpha, mu, b, slot: SlotRealization, tasks: TaskLibrary,
                          cfg: SystemConfig, rtol: float = 1e-12) -> list[tuple[int, int]]:
    """Every (user, option) that would strictly lower that user's own energy.

    An offloading user whose current channel misses the deadline counts as
    deviating to each of its feasible options.
    """
    alpha = np.asarray(alpha, dtype=np.int64)
    out = []
    for k in range(len(mu)):
        if mu[k] == 0:
            if alpha[k] != 0:
                out.append((k, 0))
            continue
        here = _cost(k, alpha, mu, b, slot, tasks, cfg)
        for m in range(cfg.M + 1):
            if m == alpha[k]:
                continue
            trial = alpha.copy()
            trial[k] = m
            there = _cost(k, trial, mu, b, slot, tasks, cfg)
            if there is None:
                continue
            if here is None or there < here * (1.0 - rtol):
                out.append((k, m))
    return out


def is_nash(alpha, mu, b, slot, tasks, cfg, rtol: float = 1e-12) -> bool:
    return not profitable_deviations(alpha, mu, b, slot, tasks, cfg, rtol)


def exhaustive_equilibria(mu, b, slot, tasks, cfg, rtol: float = 1e-12) -> list[tuple[int, ...]]:
    """All pure equilibria, found by enumerating every profile of the requesting users."""
    mu = np.asarray(mu)
    players = np.flatnonzero(mu > 0)
    found = []
    for choice in itertools.product(range(cfg.M + 1), repeat=len(players)):
        alpha = np.zeros(len(mu), dtype=np.int64)
        alpha[players] = choice
        if is_nash(alpha, mu, b, slot, tasks, cfg, rtol):
            found.append(tuple(int(a) for a in alpha))
    return found


def random_game_instance(rng: np.random.Generator, cfg: SystemConfig,
                         max_K=4, max_M=2, max_F=5):
    """Small random instance: (cfg, tasks, users, mu, b, slot)."""
    import dataclasses

    K = int(rng.integers(1, max_K + 1))
    M = int(rng.integers(1, max_M + 1))
    F = int(rng.integers(1, max_F + 1))
    small = dataclasses.replace(cfg, K=K, M=M, F=F)
    tasks = env.make_tasks(small, rng)
    users = env.make_users(small, rng)
    mu = rng.integers(0, F + 1, size=K)
    b = rng.integers(0, 2, size=F).astype(np.int8)
    slot = env.sample_fading(users, small, rng)
    return small, tasks, users, mu, b, slot
