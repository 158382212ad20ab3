"""Physical model of the cell: tasks, users, channels, request dynamics, and
the per-slot energy/delay formulas.

Tasks are numbered 1..F; a request value of 0 means the user is idle. Arrays
indexed by task use position ``f - 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import RequestModel, SystemConfig

BITS_PER_BYTE = 8.0


class InfeasibleError(ValueError):
    """Local execution would need a clock above the device maximum."""


class ChannelError(ValueError):
    """A rate or offload quantity was asked for a user that is not offloading."""


@dataclass(frozen=True)
class Task:
    id: int
    input_bytes: float
    software_bytes: float
    cycles: float

    def __post_init__(self):
        if not (self.input_bytes > 0 and self.software_bytes > 0 and self.cycles > 0):
            raise ValueError(f"task {self.id}: sizes and cycles must be positive")


class TaskLibrary:
    """The F tasks, stored column-wise for vectorised use."""

    def __init__(self, input_bytes, software_bytes, cycles):
        self.input_bytes = np.asarray(input_bytes, dtype=float)
        self.software_bytes = np.asarray(software_bytes, dtype=float)
        self.cycles = np.asarray(cycles, dtype=float)
        if not (self.input_bytes.shape == self.software_bytes.shape == self.cycles.shape):
            raise ValueError("task arrays must share one shape")
        if (self.input_bytes <= 0).any() or (self.software_bytes <= 0).any() \
                or (self.cycles <= 0).any():
            raise ValueError("task sizes and cycles must be positive")

    @classmethod
    def from_tasks(cls, tasks) -> "TaskLibrary":
        tasks = sorted(tasks, key=lambda t: t.id)
        if [t.id for t in tasks] != list(range(1, len(tasks) + 1)):
            raise ValueError("task ids must be exactly 1..F")
        return cls([t.input_bytes for t in tasks], [t.software_bytes for t in tasks],
                   [t.cycles for t in tasks])

    def __len__(self):
        return len(self.cycles)

    def __getitem__(self, f: int) -> Task:
        if not 1 <= f <= len(self):
            raise IndexError(f"task id {f} outside 1..{len(self)}")
        i = f - 1
        return Task(f, float(self.input_bytes[i]), float(self.software_bytes[i]),
                    float(self.cycles[i]))

    def __iter__(self):
        return (self[f] for f in range(1, len(self) + 1))

    @property
    def total_software(self) -> float:
        return float(self.software_bytes.sum())


@dataclass(frozen=True)
class User:
    id: int
    distance: float
    tx_power: float
    local_cpu_max: float

    def __post_init__(self):
        if not (self.distance > 0 and self.tx_power > 0 and self.local_cpu_max > 0):
            raise ValueError(f"user {self.id}: distance, power and cpu must be positive")


@dataclass(frozen=True)
class SlotRealization:
    """Per-slot fading draw together with the derived channel gains.

    ``power`` is carried along so that rate formulas need nothing else.
    """

    fading: np.ndarray
    gain: np.ndarray
    power: np.ndarray

    @property
    def received(self) -> np.ndarray:
        """p_k * h_k for every user."""
        return self.power * self.gain


def make_tasks(cfg: SystemConfig, rng: np.random.Generator) -> TaskLibrary:
    """Draw the task library: I, D and S uniform in their configured ranges."""
    F = cfg.F
    inp = rng.uniform(*cfg.input_range, size=F) * cfg.input_unit
    sw = rng.uniform(*cfg.software_range, size=F) * cfg.software_unit
    cyc = rng.uniform(*cfg.cycles_range, size=F) * cfg.cycles_unit
    return TaskLibrary(inp, sw, cyc)


def make_users(cfg: SystemConfig, rng: np.random.Generator) -> list[User]:
    """Place K users uniformly in the square cell with the BS at its centre."""
    half = cfg.cell_size / 2.0
    xy = rng.uniform(-half, half, size=(cfg.K, 2))
    dist = np.maximum(np.hypot(xy[:, 0], xy[:, 1]), cfg.min_distance)
    return [User(k, float(dist[k]), cfg.tx_power, cfg.local_cpu_max) for k in range(cfg.K)]


def check_feasibility(tasks: TaskLibrary, users: list[User], cfg: SystemConfig) -> None:
    """Strict mode: reject libraries whose slowest task cannot run locally in one slot."""
    if not cfg.strict_feasibility:
        return
    need = float(tasks.cycles.max()) / cfg.slot_len
    slowest = min(u.local_cpu_max for u in users)
    if need > slowest:
        raise InfeasibleError(
            f"local execution needs {need:.3g} Hz but devices top out at {slowest:.3g} Hz")


# ---------------------------------------------------------------- requests

def neighbors(i: int, F: int, N: int) -> list[int]:
    """The N tasks that may follow task i: the next N ids, wrapping over 1..F."""
    return [(i - 1 + q) % F + 1 for q in range(1, N + 1)]


def transition_matrix(model: RequestModel, F: int) -> np.ndarray:
    """(F+1) x (F+1) request transition matrix; row/column 0 is the idle state."""
    if model.neighbor_count > F:
        raise ValueError("neighbor_count must not exceed F")
    R, N = model.idle_prob, model.neighbor_count
    P = np.zeros((F + 1, F + 1))
    P[:, 0] = R
    zipf = 1.0 / np.arange(1, F + 1, dtype=float) ** model.zipf_exp
    P[0, 1:] = (1.0 - R) * zipf / zipf.sum()
    for i in range(1, F + 1):
        for j in neighbors(i, F, N):
            P[i, j] += (1.0 - R) / N
    return P


class RequestSampler:
    """Samples the next request vector from a fixed transition matrix.

    One uniform draw per user, in user order, per call.
    """

    def __init__(self, model: RequestModel, F: int):
        self.model = model
        self.F = F
        self.matrix = transition_matrix(model, F)
        cum = np.cumsum(self.matrix, axis=1)
        cum[:, -1] = 1.0
        self._cum = cum

    def __call__(self, prev: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        prev = np.asarray(prev)
        u = rng.random(len(prev))
        nxt = np.empty(len(prev), dtype=np.int64)
        for k, (i, x) in enumerate(zip(prev, u)):
            nxt[k] = np.searchsorted(self._cum[i], x, side="right")
        return np.minimum(nxt, self.F)


def sample_requests(prev, model: RequestModel, rng: np.random.Generator, F: int) -> np.ndarray:
    """One step of the request chain for every user."""
    prev = np.asarray(prev)
    if prev.min(initial=0) < 0 or prev.max(initial=0) > F:
        raise ValueError("request entries must lie in [0, F]")
    return RequestSampler(model, F)(prev, rng)


def sample_fading(users: list[User], cfg: SystemConfig, rng: np.random.Generator) -> SlotRealization:
    """Unit-mean exponential small-scale fading; gain = rho * d^-n."""
    rho = rng.exponential(1.0, size=len(users))
    dist = np.array([u.distance for u in users])
    power = np.array([u.tx_power for u in users])
    gain = rho * dist ** (-cfg.path_loss_exp)
    return SlotRealization(rho, gain, power)


# ---------------------------------------------------------------- formulas

def interference(k: int, alpha, slot: SlotRealization) -> float:
    """Received power of the other users sharing user k's channel."""
    alpha = np.asarray(alpha)
    if alpha[k] == 0:
        raise ChannelError(f"user {k} is computing locally")
    ph = slot.received
    total = 0.0
    for n in range(len(alpha)):
        if n != k and alpha[n] == alpha[k]:
            total += ph[n]
    return total


def rate_from_interference(ph: float, interf: float, cfg: SystemConfig) -> float:
    return cfg.channel_bandwidth * math.log2(1.0 + ph / (interf + cfg.noise_var))


def uplink_rate(k: int, alpha, slot: SlotRealization, cfg: SystemConfig) -> float:
    """Worst-case uplink rate of user k (bits/s) given the co-channel users."""
    return rate_from_interference(float(slot.received[k]), interference(k, alpha, slot), cfg)


def local_energy(task: Task, cfg: SystemConfig, local_cpu_max: float | None = None) -> float:
    """Energy of running ``task`` on the device at the slowest deadline-meeting clock."""
    if cfg.strict_feasibility:
        cap = cfg.local_cpu_max if local_cpu_max is None else local_cpu_max
        if task.cycles / cfg.slot_len > cap:
            raise InfeasibleError(f"task {task.id} needs {task.cycles / cfg.slot_len:.3g} Hz")
    return cfg.energy_coeff * task.cycles ** 3 / cfg.slot_len ** 2


def upload_bits(task: Task, cached: int) -> float:
    return BITS_PER_BYTE * (task.input_bytes + (1 - cached) * task.software_bytes)


def offload_delay(k: int, task: Task, cached: int, alpha, slot: SlotRealization,
                  cfg: SystemConfig) -> float:
    r = uplink_rate(k, alpha, slot, cfg)
    return task.cycles / cfg.edge_cpu + upload_bits(task, cached) / r


def offload_energy(k: int, task: Task, cached: int, alpha, slot: SlotRealization,
                   cfg: SystemConfig) -> float:
    r = uplink_rate(k, alpha, slot, cfg)
    return float(slot.power[k]) * upload_bits(task, cached) / r


def user_energy(k: int, mu, alpha, b, slot: SlotRealization, tasks: TaskLibrary,
                cfg: SystemConfig) -> float:
    """Energy of user k in the slot: idle, local, or (cached / uncached) offload."""
    f = int(mu[k])
    if f == 0:
        return 0.0
    task = tasks[f]
    if alpha[k] == 0:
        return local_energy(task, cfg)
    return offload_energy(k, task, int(b[f - 1]), alpha, slot, cfg)


def user_energies(mu, alpha, b, slot: SlotRealization, tasks: TaskLibrary,
                  cfg: SystemConfig) -> np.ndarray:
    return np.array([user_energy(k, mu, alpha, b, slot, tasks, cfg) for k in range(len(mu))])


def system_energy(mu, alpha, b, slot: SlotRealization, tasks: TaskLibrary,
                  cfg: SystemConfig) -> float:
    """Total energy of all users; summed in user order."""
    total = 0.0
    for e in user_energies(mu, alpha, b, slot, tasks, cfg):
        total += e
    return total
