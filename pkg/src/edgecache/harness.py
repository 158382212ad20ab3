"""Experiment orchestration: the per-slot loop, seeded runs, sweeps and metrics.

Slot t runs in this order: requests mu_t and fading are drawn; the offloading
game is solved under the live cache b_t (and, when some request hits the
cache, once more under an empty cache); the live state is audited; then the
policy chooses the next cache and the update is applied at slot end.

For the learning policy the transition stored at slot t is
(mu_{t-1}, b_t, E^NC_t - E^C_t, mu_t): b_t was chosen from mu_{t-1}.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines, env, game
from .config import RunConfig, SystemConfig
from .ddqn import Agent, Transition, compute_reward
from .scaa import ScaaNetwork

STREAMS = ("init", "net_init", "requests", "fading", "arbiter", "arbiter_nc",
           "exploration", "replay")
COLUMNS = ("slot", "phase", "energy", "energy_nc", "reward", "iterations", "hits",
           "offloaders", "loss", "epsilon")
SWEEP_AXES = {
    "cache_capacity": ("system", "cache_capacity"),
    "C": ("system", "cache_capacity"),
    "F": ("system", "F"),
    "K": ("system", "K"),
    "M": ("system", "M"),
    "zipf_exp": ("requests", "zipf_exp"),
    "idle_prob": ("requests", "idle_prob"),
    "neighbor_count": ("requests", "neighbor_count"),
    "cycles_max": ("system", "cycles_range"),
    "software_max": ("system", "software_range"),
    "input_max": ("system", "input_range"),
}


class ConstraintViolation(RuntimeError):
    def __init__(self, constraint: str, slot: int, detail: str):
        super().__init__(f"constraint {constraint} violated at slot {slot}: {detail}")
        self.constraint = constraint
        self.slot = slot
        self.detail = detail


class SweepError(RuntimeError):
    pass


def make_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent generators per subsystem, keyed by name."""
    return {name: np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
            for i, name in enumerate(STREAMS)}


def slot_stream(seed: int, name: str, t: int) -> np.random.Generator:
    """Generator for one subsystem in one slot.

    The game's arbitration draws a variable number of values per slot; keying
    it by slot keeps every policy on the same arbitration in slot t however
    its earlier games went.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(STREAMS.index(name), t)))


@dataclass
class SlotRecord:
    slot: int
    phase: str
    energy: float
    energy_nc: float
    reward: float
    iterations: int
    hits: int
    offloaders: int
    loss: float = math.nan
    epsilon: float = 0.0
    user_energy: np.ndarray = field(default=None, repr=False)
    decision: np.ndarray = field(default=None, repr=False)
    cache: np.ndarray = field(default=None, repr=False)

    def row(self) -> list[str]:
        return [str(self.slot), self.phase, _fmt(self.energy), _fmt(self.energy_nc),
                _fmt(self.reward), str(self.iterations), str(self.hits),
                str(self.offloaders), _fmt(self.loss), _fmt(self.epsilon)]


def _fmt(x: float) -> str:
    return "" if isinstance(x, float) and math.isnan(x) else repr(float(x))


class World:
    """All state of one run: environment, live cache and the policy's bookkeeping."""

    def __init__(self, cfg: RunConfig, network: ScaaNetwork | None = None):
        self.cfg = cfg
        self.system: SystemConfig = cfg.system
        self.rng = make_streams(cfg.seed)
        self.tasks = env.make_tasks(self.system, self.rng["init"])
        self.users = env.make_users(self.system, self.rng["init"])
        env.check_feasibility(self.tasks, self.users, self.system)
        self.sampler = env.RequestSampler(cfg.requests, self.system.F)
        self.cache = np.zeros(self.system.F, dtype=np.int8)
        self.prev_mu = np.zeros(self.system.K, dtype=np.int64)
        self.policy = cfg.policy
        self.agent = None
        self.state = None
        if self.policy == "proposed":
            self.agent = Agent(cfg.agent, self.system, self.tasks, self.rng["net_init"],
                               cfg.train_slots)
            if network is not None:
                self.agent.eval_net = network.copy()
                self.agent.target_net = network.copy()
        elif self.policy in baselines.UPDATES:
            self.state = baselines.PolicyState(self.system.F)

    def phase(self, t: int) -> str:
        return "train" if t <= self.cfg.train_slots else "eval"


def audit_state(t: int, world: World, mu, outcome: game.GameOutcome, slot) -> None:
    """Capacity, delay and decision-range constraints on the live slot."""
    cfg = world.system
    used = math.fsum(world.tasks.software_bytes[world.cache.astype(bool)].tolist())
    if used > cfg.cache_capacity:
        raise ConstraintViolation("10a", t, f"cached {used} bytes > capacity {cfg.cache_capacity}")
    alpha = outcome.decision
    for k in range(len(mu)):
        if not 0 <= alpha[k] <= cfg.M:
            raise ConstraintViolation("10e", t, f"user {k} decision {alpha[k]} outside 0..{cfg.M}")
        if alpha[k] > 0:
            if mu[k] == 0:
                raise ConstraintViolation("10e", t, f"idle user {k} holds channel {alpha[k]}")
            task = world.tasks[int(mu[k])]
            d = env.offload_delay(k, task, int(world.cache[task.id - 1]), alpha, slot, cfg)
            if d > cfg.slot_len:
                raise ConstraintViolation("10b", t, f"user {k} delay {d} > {cfg.slot_len}")


def audit_update(t: int, world: World, beta, nxt) -> None:
    """Update range, eviction sign, chain rule and capacity of the next cache."""
    beta = np.asarray(beta)
    if not np.isin(beta, (-1, 0, 1)).all():
        raise ConstraintViolation("10f", t, f"update entries {sorted(set(beta.tolist()))}")
    if (beta < -world.cache).any():
        raise ConstraintViolation("10d", t, "update evicts software that is not cached")
    if not np.array_equal(world.cache + beta, nxt):
        raise ConstraintViolation("10c", t, "next cache differs from current cache plus update")
    used = math.fsum(world.tasks.software_bytes[np.asarray(nxt, dtype=bool)].tolist())
    if used > world.system.cache_capacity:
        raise ConstraintViolation("10a", t, f"next cache holds {used} bytes")


def run_slot(world: World, t: int) -> SlotRecord:
    """Play slot t (1-based) and apply the policy's cache update at its end."""
    cfg, rng = world.system, world.rng
    mu = world.sampler(world.prev_mu, rng["requests"])
    slot = env.sample_fading(world.users, cfg, rng["fading"])
    seed = world.cfg.seed
    reward, out, nc = compute_reward(mu, world.cache, slot, world.tasks, cfg,
                                     slot_stream(seed, "arbiter", t),
                                     slot_stream(seed, "arbiter_nc", t))
    audit_state(t, world, mu, out, slot)
    phase = world.phase(t)
    loss, eps = math.nan, 0.0

    if world.policy == "proposed":
        agent = world.agent
        if phase == "train":
            if t > 1:
                agent.replay.push(Transition(world.prev_mu.copy(), world.cache.copy(),
                                             reward / world.cfg.agent.reward_scale, mu.copy()))
                loss = agent.train_from_replay(rng["replay"])
                agent.maybe_copy_target(t)
            eps = agent.epsilon(t - 1)
            nxt = agent.select_action(mu, eps, rng["exploration"])
        else:
            nxt = agent.greedy_action(mu)
        beta = nxt.astype(np.int8) - world.cache
    elif world.policy == "offload-only":
        beta = np.zeros(cfg.F, dtype=np.int8)
    else:
        update = baselines.UPDATES[world.policy]
        beta = update(world.state, mu, world.cache, world.tasks, cfg.cache_capacity)

    nxt = world.cache + beta
    audit_update(t, world, beta, nxt)
    hits = int(sum(1 for f in mu if f > 0 and world.cache[f - 1]))
    record = SlotRecord(t, phase, out.energy, nc.energy, reward, out.iterations, hits,
                        int((out.decision > 0).sum()), loss, eps,
                        out.user_energy, out.decision.copy(), world.cache.copy())
    world.cache = nxt.astype(np.int8)
    world.prev_mu = mu
    return record


def run_records(cfg: RunConfig, network: ScaaNetwork | None = None) -> tuple[World, list[SlotRecord]]:
    world = World(cfg, network)
    return world, [run_slot(world, t) for t in range(1, cfg.horizon + 1)]


def summary_window(records: list[SlotRecord]) -> list[SlotRecord]:
    """The evaluation slots, or every slot when the run has none."""
    ev = [r for r in records if r.phase == "eval"]
    return ev if ev else list(records)


def summarize(records: list[SlotRecord]) -> dict[str, float]:
    win = summary_window(records)
    n = len(win)
    return {"energy": math.fsum(r.energy for r in win) / n,
            "energy_nc": math.fsum(r.energy_nc for r in win) / n,
            "reward": math.fsum(r.reward for r in win) / n}


def metrics_text(records: list[SlotRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in records:
        w.writerow(r.row())
    s = summarize(records)
    w.writerow(["summary", summary_window(records)[0].phase, _fmt(s["energy"]),
                _fmt(s["energy_nc"]), _fmt(s["reward"]), "", "", "", "", ""])
    return buf.getvalue()


def run_name(cfg: RunConfig) -> str:
    return f"{cfg.policy}-seed{cfg.seed}"


def run_experiment(cfg: RunConfig, out_dir: str | Path, network: ScaaNetwork | None = None,
                   checkpoint: bool = False) -> Path:
    """Run the whole horizon and write ``<policy>-seed<seed>.csv`` into ``out_dir``.

    With ``checkpoint`` the trained network is saved next to it.
    """
    world, records = run_records(cfg, network)
    out_dir = Path(out_dir)
    path = out_dir / f"{run_name(cfg)}.csv"
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(metrics_text(records))
        if checkpoint and world.agent is not None:
            world.agent.eval_net.save(out_dir / f"{run_name(cfg)}.npz")
    except OSError as exc:
        raise OSError(f"cannot write metrics for {run_name(cfg)} to {out_dir}: {exc}") from exc
    return path


def read_metrics(path: str | Path) -> tuple[list[dict[str, str]], dict[str, str]]:
    """Data rows and the summary row of a metrics file."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows[:-1], rows[-1]


def moving_average(series, window: int = 20) -> np.ndarray:
    """Trailing mean; the first ``window - 1`` points (incomplete windows) are dropped."""
    x = np.asarray(series, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    if window > len(x):
        raise ValueError(f"window {window} exceeds series length {len(x)}")
    c = np.concatenate(([0.0], np.cumsum(x)))
    return (c[window:] - c[:-window]) / window


# ---------------------------------------------------------------- sweeps

def apply_axis(base: RunConfig, axis: str, value) -> RunConfig:
    """Copy of ``base`` with one sweep axis set. ``*_max`` axes move the range's upper end."""
    import dataclasses

    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {sorted(SWEEP_AXES)}")
    section, name = SWEEP_AXES[axis]
    sub = getattr(base, section)
    if name.endswith("_range"):
        lo, _ = getattr(sub, name)
        value = (min(lo, float(value)), float(value))
    elif name in ("K", "F", "M", "neighbor_count"):
        value = int(value)
    else:
        value = float(value)
    return base.replace(**{section: dataclasses.replace(sub, **{name: value})})


def _run_cell(args):
    base, axis, value, policy, seed, out_dir = args
    try:
        cfg = apply_axis(base, axis, value).replace(policy=policy, seed=seed)
        path = run_experiment(cfg, out_dir)
        _, summary = read_metrics(path)
        return float(summary["energy"]), None
    except Exception as exc:  # reported per cell, the sweep carries on
        return math.nan, f"{type(exc).__name__}: {exc}"


@dataclass
class SweepResult:
    table: list[dict]
    failures: list[dict]
    path: Path


def run_sweep(base: RunConfig, axis: str, grid, seeds, policies, out_dir: str | Path,
              workers: int | None = 1) -> SweepResult:
    """Every (grid value, seed, policy) cell; mean and sample sd of the summary energy.

    Cells run in worker processes when ``workers`` > 1. Failed cells are listed
    in ``failures`` and in ``sweep-<axis>-failures.csv``.
    """
    out_dir = Path(out_dir)
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {sorted(SWEEP_AXES)}")
    cells = []
    for value in grid:
        for policy in policies:
            for seed in seeds:
                cells.append(((value, policy, int(seed)),
                              (base, axis, value, policy, int(seed),
                               out_dir / "runs" / f"{axis}={value}")))
    if workers is not None and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, [c[1] for c in cells]))
    else:
        results = [_run_cell(c[1]) for c in cells]

    groups: dict[tuple, list[float]] = {}
    failures = []
    for (key, _), (energy, err) in zip(cells, results):
        value, policy, seed = key
        if err is not None:
            failures.append({"value": value, "policy": policy, "seed": seed, "error": err})
            continue
        groups.setdefault((value, policy), []).append(energy)
    table = []
    for value in grid:
        for policy in policies:
            vals = groups.get((value, policy), [])
            n = len(vals)
            mean = math.fsum(vals) / n if n else math.nan
            sd = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (n - 1)) if n > 1 else 0.0
            table.append({"axis": axis, "value": value, "policy": policy, "runs": n,
                          "mean_energy": mean, "sd_energy": sd if n else math.nan})

    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"sweep-{axis}.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["axis", "value", "policy", "runs", "mean_energy", "sd_energy"])
        for row in table:
            w.writerow([axis, row["value"], row["policy"], row["runs"],
                        _fmt(row["mean_energy"]), _fmt(row["sd_energy"])])
    if failures:
        with open(out_dir / f"sweep-{axis}-failures.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.DictWriter(fh, ["value", "policy", "seed", "error"], lineterminator="\n")
            w.writeheader()
            w.writerows(failures)
    return SweepResult(table, failures, path)


def default_workers() -> int:
    return max(1, (os.cpu_count() or 1) - 1)
