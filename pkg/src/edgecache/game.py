"""Multi-user computation-offloading game.

Each requesting user picks local computing (0) or one of M shared uplink
channels. A user's cost is its own energy; channels that would break the slot
deadline are not in its strategy space. Best-response dynamics with a random
single-user arbiter reach a pure Nash equilibrium, tracked through the
potential function.

Users with no request sit out: they take no channel and add no interference.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import env, kernels
from .config import SystemConfig
from .env import SlotRealization, Task, TaskLibrary

LN2 = math.log(2.0)
# beyond this exponent 2**x - 1 overflows a double
_MAX_EXP = 1000.0


class NonConvergenceError(RuntimeError):
    pass


@dataclass
class GameInputs:
    """Per-user quantities of one slot, derived once and shared by all solves."""

    active: np.ndarray
    ph: np.ndarray
    power: np.ndarray
    bits: np.ndarray
    e_local: np.ndarray
    server_delay: np.ndarray
    thresholds: np.ndarray
    delay_thresholds: np.ndarray

    @property
    def effective_thresholds(self) -> np.ndarray:
        return np.minimum(self.thresholds, self.delay_thresholds)


@dataclass
class BoundTerms:
    delta_max: float
    delta_min: float
    v_max: float
    v_min: float
    eps_obs: float | None
    # sum_k max(p_k h_k V_k, 0): the most the potential can fall from all-local
    potential_drop_cap: float = 0.0


@dataclass
class GameOutcome:
    decision: np.ndarray
    iterations: int
    rounds: int
    potential_trace: list[float]
    energy: float
    user_energy: np.ndarray
    bound_terms: BoundTerms | None = None
    movers: list[int] = field(default_factory=list)
    n_players: int = 0

    @property
    def bound(self) -> float:
        if self.bound_terms is None or self.bound_terms.eps_obs is None:
            return math.inf
        return iteration_bound(self.bound_terms, int(self.n_players))


def _threshold_from_exponent(ph: float, x: float, noise: float) -> float:
    if x > _MAX_EXP:
        return -noise
    if x <= 0.0:
        return math.inf
    return ph / math.expm1(x * LN2) - noise


def threshold(k: int, task: Task, cached: int, slot: SlotRealization, cfg: SystemConfig) -> float:
    """Interference level below which offloading beats local computing for user k.

    Negative when offloading can never pay off.
    """
    ph = float(slot.received[k])
    p = float(slot.power[k])
    x = (p * cfg.slot_len ** 2 * cfg.M * env.upload_bits(task, cached)
         / (cfg.bandwidth * cfg.energy_coeff * task.cycles ** 3))
    return _threshold_from_exponent(ph, x, cfg.noise_var)


def delay_threshold(k: int, task: Task, cached: int, slot: SlotRealization,
                    cfg: SystemConfig) -> float:
    """Largest interference at which offloading still meets the slot deadline."""
    slack = cfg.slot_len - task.cycles / cfg.edge_cpu
    if slack <= 0:
        return -math.inf
    y = env.upload_bits(task, cached) / slack / cfg.channel_bandwidth
    return _threshold_from_exponent(float(slot.received[k]), y, cfg.noise_var)


def prepare(mu, b, slot: SlotRealization, tasks: TaskLibrary, cfg: SystemConfig) -> GameInputs:
    mu = np.asarray(mu)
    K = len(mu)
    active = mu > 0
    bits = np.zeros(K)
    e_local = np.zeros(K)
    sdelay = np.zeros(K)
    v = np.full(K, -math.inf)
    w = np.full(K, -math.inf)
    for k in range(K):
        if not active[k]:
            continue
        task = tasks[int(mu[k])]
        cached = int(b[task.id - 1])
        bits[k] = env.upload_bits(task, cached)
        e_local[k] = env.local_energy(task, cfg)
        sdelay[k] = task.cycles / cfg.edge_cpu
        v[k] = threshold(k, task, cached, slot, cfg)
        w[k] = delay_threshold(k, task, cached, slot, cfg)
    return GameInputs(active, slot.received.astype(float), slot.power.astype(float), bits,
                      e_local, sdelay, v, w)


def interference(k: int, alpha, slot: SlotRealization) -> float:
    return env.interference(k, alpha, slot)


def strategy_space(k: int, alpha, mu, b, slot: SlotRealization, tasks: TaskLibrary,
                   cfg: SystemConfig) -> list[int]:
    """Local computing plus every channel meeting the deadline against the others' current choices."""
    task = tasks[int(mu[k])]
    cached = int(b[task.id - 1])
    space = [0]
    trial = np.array(alpha, dtype=np.int64)
    for m in range(1, cfg.M + 1):
        trial[k] = m
        if env.offload_delay(k, task, cached, trial, slot, cfg) <= cfg.slot_len:
            space.append(m)
    return space


def _best_responses(alpha, gi: GameInputs, cfg: SystemConfig, active=None) -> np.ndarray:
    return kernels.best_responses(
        alpha, gi.active if active is None else active, gi.ph, gi.power, gi.bits,
        gi.e_local, gi.server_delay, cfg.slot_len, cfg.channel_bandwidth, cfg.noise_var, cfg.M)


def best_response(k: int, alpha, mu, b, slot: SlotRealization, tasks: TaskLibrary,
                  cfg: SystemConfig) -> int:
    """User k's cheapest option with the others held fixed (incumbent wins ties)."""
    if int(mu[k]) == 0:
        return 0
    gi = prepare(mu, b, slot, tasks, cfg)
    only = np.zeros(len(mu), dtype=bool)
    only[k] = True
    return int(_best_responses(np.asarray(alpha, dtype=np.int64), gi, cfg, only)[k])


def potential_terms(alpha, active, ph, thresholds) -> dict[tuple[int, int], float]:
    """Summands of the potential keyed by user pair (k, n), or (k, -1) for k's local term.

    Each co-channel pair appears twice, (k, n) and (n, k), at half weight.
    """
    alpha = np.asarray(alpha)
    terms = {}
    for k in range(len(alpha)):
        if not active[k]:
            continue
        if alpha[k] > 0:
            for n in range(len(alpha)):
                if n != k and active[n] and alpha[n] == alpha[k]:
                    terms[(k, n)] = 0.5 * (ph[k] * ph[n])
        else:
            terms[(k, -1)] = ph[k] * thresholds[k]
    return terms


def potential_value(alpha, active, ph, thresholds) -> float:
    return math.fsum(potential_terms(alpha, active, ph, thresholds).values())


def potential(alpha, mu, b, slot: SlotRealization, tasks: TaskLibrary, cfg: SystemConfig,
              thresholds=None) -> float:
    """Potential of an offloading profile.

    Pairwise co-channel products of received powers, plus p_k h_k V_k for every
    requesting user that computes locally. ``thresholds`` overrides V_k.
    """
    gi = prepare(mu, b, slot, tasks, cfg)
    v = gi.thresholds if thresholds is None else thresholds
    return potential_value(alpha, gi.active, gi.ph, v)


def potential_change(alpha, moved, mu, b, slot: SlotRealization, tasks: TaskLibrary,
                     cfg: SystemConfig) -> tuple[float, float]:
    """Exact potential difference between two profiles, and the size of the terms that changed.

    Terms common to both profiles cancel exactly, so a change far below the
    potential's own magnitude keeps its sign.
    """
    gi = prepare(mu, b, slot, tasks, cfg)
    t0 = potential_terms(alpha, gi.active, gi.ph, gi.thresholds)
    t1 = potential_terms(moved, gi.active, gi.ph, gi.thresholds)
    delta = math.fsum(list(t1.values()) + [-v for v in t0.values()])
    changed = [abs(v) for key, v in t0.items() if t1.get(key) != v]
    changed += [abs(v) for key, v in t1.items() if t0.get(key) != v]
    return delta, math.fsum(changed)


def iteration_bound(terms: BoundTerms, K: int) -> float:
    """Closed-form bound on the number of accepted updates.

    Returns 1 when the numerator is not positive.
    """
    if terms.eps_obs is None or not terms.eps_obs > 0:
        raise ValueError("eps_obs must be positive")
    num = (0.5 * K ** 2 * terms.delta_max ** 2
           + K * (terms.delta_max * terms.v_max - terms.delta_min * terms.v_min))
    if not num > 0:
        return 1.0
    return num / (terms.eps_obs * terms.delta_min)


def _guard_bound(terms: BoundTerms) -> float:
    # total fall of the potential over the min guaranteed fall per update
    return terms.potential_drop_cap / (terms.eps_obs * terms.delta_min)


def _slot_cost(alpha_k: int, k: int, alpha, gi: GameInputs, v_eff: np.ndarray) -> float:
    """k's share of the potential: co-channel interference, or V_k when local."""
    if alpha_k == 0:
        return float(v_eff[k])
    total = 0.0
    for n in range(len(alpha)):
        if n != k and alpha[n] == alpha_k:
            total += gi.ph[n]
    return total


def solve_ne(mu, b, slot: SlotRealization, tasks: TaskLibrary, cfg: SystemConfig,
             rng: np.random.Generator, max_iterations: int = 100_000) -> GameOutcome:
    """Best-response dynamics from the all-local profile.

    Each round every requesting user computes its best response; one of the
    users wanting to move, chosen uniformly at random, is allowed to. Stops when
    nobody wants to move.
    """
    mu = np.asarray(mu)
    gi = prepare(mu, b, slot, tasks, cfg)
    v_eff = gi.effective_thresholds
    K = len(mu)
    alpha = np.zeros(K, dtype=np.int64)
    act = np.flatnonzero(gi.active)
    trace = [potential_value(alpha, gi.active, gi.ph, v_eff)]
    terms = None
    if len(act):
        ph_act = gi.ph[act]
        v_act = v_eff[act]
        terms = BoundTerms(
            delta_max=float(ph_act.max()), delta_min=float(ph_act.min()),
            v_max=float(v_act.max()), v_min=float(v_act.min()), eps_obs=None,
            potential_drop_cap=float(np.maximum(ph_act * v_act, 0.0).sum()))
    iterations = 0
    rounds = 0
    movers = []
    while True:
        rounds += 1
        br = _best_responses(alpha, gi, cfg)
        want = np.flatnonzero(br != alpha)
        if len(want) == 0:
            break
        j = int(want[rng.integers(len(want))])
        eps = _slot_cost(int(alpha[j]), j, alpha, gi, v_eff) - _slot_cost(int(br[j]), j, alpha, gi, v_eff)
        alpha[j] = br[j]
        iterations += 1
        movers.append(j)
        trace.append(potential_value(alpha, gi.active, gi.ph, v_eff))
        if eps > 0 and (terms.eps_obs is None or eps < terms.eps_obs):
            terms.eps_obs = eps
        limit = max_iterations
        if terms.eps_obs is not None:
            limit = min(limit, 10.0 * _guard_bound(terms) + 10)
        if iterations > limit:
            raise NonConvergenceError(
                f"no equilibrium after {iterations} updates (limit {limit:.3g}); "
                f"requests={mu.tolist()} profile={alpha.tolist()}")
    energies = env.user_energies(mu, alpha, b, slot, tasks, cfg)
    total = 0.0
    for e in energies:
        total += e
    return GameOutcome(alpha, iterations, rounds, trace, total, energies, terms, movers,
                       n_players=len(act))
