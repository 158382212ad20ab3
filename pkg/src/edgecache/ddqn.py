"""Caching agent: replay memory, epsilon-greedy behaviour, double-network
training and inference of per-slot cache updates.

The action for a state is the next slot's cache bit vector. The greedy action
is the knapsack optimum over the network's per-task outputs, which stands in
for an argmax over the exponentially many feasible caches.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import game, knapsack
from .config import AgentConfig, SystemConfig
from .env import SlotRealization, TaskLibrary
from .scaa import ScaaNetwork, clone_weights, encode_state, huber_loss


class InsufficientReplayError(RuntimeError):
    pass


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray


class ReplayMemory:
    """Fixed-capacity ring buffer; the oldest transition is overwritten first."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._items: list[Transition] = []
        self._cursor = 0

    def __len__(self):
        return len(self._items)

    def push(self, tr: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(tr)
        else:
            self._items[self._cursor] = tr
        self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, n: int, rng: np.random.Generator) -> list[Transition]:
        if len(self._items) < n:
            raise InsufficientReplayError(f"replay holds {len(self._items)} < {n} transitions")
        idx = rng.choice(len(self._items), size=n, replace=False)
        return [self._items[i] for i in idx]

    def __iter__(self):
        return iter(self._items)


def compute_reward(mu, action, slot: SlotRealization, tasks: TaskLibrary, cfg: SystemConfig,
                   rng_cached: np.random.Generator, rng_empty: np.random.Generator):
    """Energy saved by the cache ``action`` against an empty cache, same slot.

    Returns ``(reward, outcome_cached, outcome_empty)``. When no requested task
    is cached both games are identical and the cached outcome is reused.
    """
    mu = np.asarray(mu)
    action = np.asarray(action, dtype=np.int8)
    cached = game.solve_ne(mu, action, slot, tasks, cfg, rng_cached)
    if not any(action[f - 1] for f in mu if f > 0):
        return 0.0, cached, cached
    empty = game.solve_ne(mu, np.zeros_like(action), slot, tasks, cfg, rng_empty)
    return empty.energy - cached.energy, cached, empty


class Agent:
    def __init__(self, cfg: AgentConfig, system: SystemConfig, tasks: TaskLibrary,
                 rng: np.random.Generator, train_slots: int = 0):
        self.cfg = cfg
        self.system = system
        self.eval_net = ScaaNetwork(system.K, system.F, cfg.hidden, rng)
        self.target_net = self.eval_net.copy()
        self.replay = ReplayMemory(cfg.replay_capacity)
        self.weights = knapsack.to_units(tasks.software_bytes, system.knapsack_unit)
        self.cap = knapsack.capacity_units(system.cache_capacity, system.knapsack_unit)
        decay = cfg.eps_decay_slots
        self.eps_decay_slots = max(1, train_slots // 2) if decay is None else max(1, decay)

    def epsilon(self, t: int) -> float:
        """Linear decay from eps_start to eps_end; t counts training slots from 0."""
        frac = min(1.0, t / self.eps_decay_slots)
        return self.cfg.eps_start + frac * (self.cfg.eps_end - self.cfg.eps_start)

    # -- actions

    def knapsack_action(self, values) -> np.ndarray:
        b, _ = knapsack.solve_units(values, self.weights, self.cap)
        return b

    def greedy_action(self, state, net: ScaaNetwork | None = None) -> np.ndarray:
        net = self.eval_net if net is None else net
        return self.knapsack_action(net.outputs(encode_state(state, self.system.F)))

    def random_action(self, rng: np.random.Generator) -> np.ndarray:
        """Visit tasks in random order, caching each one that still fits."""
        b = np.zeros(self.system.F, dtype=np.int8)
        room = self.cap
        for i in rng.permutation(self.system.F):
            if self.weights[i] <= room:
                b[i] = 1
                room -= self.weights[i]
        return b

    def select_action(self, state, eps: float, rng: np.random.Generator) -> np.ndarray:
        # one uniform draw per call; the random action draws a permutation on top
        if rng.random() < eps:
            return self.random_action(rng)
        return self.greedy_action(state)

    def infer_update(self, state, b) -> np.ndarray:
        """Cache update (-1/0/+1 per task) moving ``b`` to the greedy next cache."""
        return self.greedy_action(state).astype(np.int8) - np.asarray(b, dtype=np.int8)

    # -- learning

    def bootstrap_target(self, tr: Transition) -> float:
        """R + gamma * max_a Q_target(S', a), the max taken by knapsack on target outputs."""
        out = self.target_net.outputs(encode_state(tr.next_state, self.system.F))
        best = knapsack.selection_value(out, self.knapsack_action(out))
        return tr.reward + self.cfg.gamma * best

    def train_step(self, batch: list[Transition]) -> float:
        if not batch:
            raise InsufficientReplayError("empty batch")
        net = self.eval_net
        net.zero_grad()
        total = 0.0
        n = len(batch)
        for tr in batch:
            target = self.bootstrap_target(tr)
            enc = encode_state(tr.state, self.system.F)
            q = net.forward(enc, tr.action)
            loss, dq = huber_loss(q, target)
            net.backward(enc, tr.action, dq / n)
            total += loss
        net.sgd_step(self.cfg.learning_rate)
        return total / n

    def train_from_replay(self, rng: np.random.Generator) -> float:
        if len(self.replay) < self.cfg.batch_size:
            return math.nan
        return self.train_step(self.replay.sample(self.cfg.batch_size, rng))

    def maybe_copy_target(self, t: int) -> bool:
        if t % self.cfg.target_period == 0:
            clone_weights(self.eval_net, self.target_net)
            return True
        return False


def maybe_copy_target(agent: Agent, t: int) -> bool:
    return agent.maybe_copy_target(t)


def infer_update(state, b, agent: Agent) -> np.ndarray:
    return agent.infer_update(state, b)
