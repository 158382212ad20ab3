"""Acceptance procedures shared by the test suite and ``edgecache selftest``.

Each check returns a :class:`CheckResult`; none of them raises on a failed
criterion, so a report can list every outcome.
"""
from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import env, game, harness, knapsack, oracles
from .config import RequestModel, RunConfig, profile_defaults
from .scaa import ScaaNetwork, encode_state, huber_loss, PARAMS


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    data: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:>2} {self.name}: {self.detail}"


def desk_config(**changes) -> RunConfig:
    return profile_defaults("desk-consistent").replace(**changes)


# -- offloading game

def ne_oracle(n: int = 200, seed: int = 0) -> CheckResult:
    """solve_ne on small random instances against exhaustive equilibrium enumeration."""
    cfg = desk_config().system
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    failures = []
    instances = []
    for i in range(n):
        small, tasks, _, mu, b, slot = oracles.random_game_instance(rng, cfg)
        out = game.solve_ne(mu, b, slot, tasks, small, rng)
        eqs = oracles.exhaustive_equilibria(mu, b, slot, tasks, small)
        if tuple(int(a) for a in out.decision) not in eqs:
            failures.append(i)
        instances.append(out)
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 60.0
    return CheckResult(1, "NE oracle equivalence", ok,
                       f"{n - len(failures)}/{n} equilibria confirmed in {elapsed:.1f}s",
                       {"failures": failures, "elapsed": elapsed, "outcomes": instances})


def _relative_sign(a: float, scale: float, rtol: float) -> int:
    if abs(a) <= rtol * scale:
        return 0
    return 1 if a > 0 else -1


def sign_agreement(n: int = 10_000, seed: int = 1, rtol: float = 1e-12) -> CheckResult:
    """Unilateral deviations: the potential moves the same way as the mover's energy.

    Received powers span many orders of magnitude, so the potential change is
    taken exactly and "zero" is judged against the terms that changed.
    """
    base = desk_config().system
    rng = np.random.default_rng(seed)
    mismatches = []
    done = 0
    while done < n:
        small, tasks, _, mu, b, slot = oracles.random_game_instance(rng, base, max_K=10,
                                                                   max_M=5, max_F=20)
        players = np.flatnonzero(mu > 0)
        if len(players) == 0:
            continue
        for _ in range(10):
            alpha = np.zeros(small.K, dtype=np.int64)
            alpha[players] = rng.integers(0, small.M + 1, size=len(players))
            k = int(rng.choice(players))
            m = int(rng.integers(0, small.M))
            m = m if m < alpha[k] else m + 1
            moved = alpha.copy()
            moved[k] = m
            dphi, scale = game.potential_change(alpha, moved, mu, b, slot, tasks, small)
            e0 = env.user_energy(k, mu, alpha, b, slot, tasks, small)
            e1 = env.user_energy(k, mu, moved, b, slot, tasks, small)
            sp = _relative_sign(dphi, scale, rtol)
            se = _relative_sign(e1 - e0, max(abs(e0), abs(e1)), rtol)
            if sp != se:
                mismatches.append((done, sp, se))
            done += 1
            if done == n:
                break
    return CheckResult(2, "sign agreement", not mismatches,
                       f"{n - len(mismatches)}/{n} deviations agree", {"mismatches": mismatches})


def iteration_bound(outcomes=None, desk_slots: int = 200, seed: int = 0) -> CheckResult:
    """Accepted updates against the closed-form bound, on the oracle instances and
    on every game of a short desk-scale run."""
    if outcomes is None:
        outcomes = ne_oracle(seed=seed).data["outcomes"]
    outcomes = list(outcomes)
    cfg = desk_config(policy="lfu", train_slots=0, eval_slots=desk_slots, seed=seed)
    world = harness.World(cfg)
    for t in range(1, desk_slots + 1):
        mu = world.sampler(world.prev_mu, world.rng["requests"])
        slot = env.sample_fading(world.users, cfg.system, world.rng["fading"])
        outcomes.append(game.solve_ne(mu, world.cache, slot, world.tasks, cfg.system,
                                      harness.slot_stream(seed, "arbiter", t)))
        world.prev_mu = mu
    checked = [o for o in outcomes if o.iterations > 0]
    worst = 0.0
    violations = 0
    for o in checked:
        ratio = o.iterations / o.bound
        worst = max(worst, ratio)
        violations += o.iterations > o.bound
    return CheckResult(3, "iteration bound", violations == 0,
                       f"{violations} violations over {len(checked)} games with updates "
                       f"(worst iterations/bound {worst:.3g})",
                       {"violations": violations, "games": len(checked), "worst_ratio": worst})


# -- knapsack

def knapsack_exactness(n: int = 500, seed: int = 2) -> CheckResult:
    rng = np.random.default_rng(seed)
    bad = []
    for i in range(n):
        F = int(rng.integers(1, 16))
        values = rng.normal(0.0, 1.0, size=F)
        weights = rng.integers(1, 21, size=F)
        cap = int(rng.integers(0, weights.sum() + 1))
        b, _ = knapsack.solve_units(values, weights, cap)
        _, best = knapsack.brute_force_units(values, weights, cap)
        if knapsack.selection_value(values, b) != best or int(weights @ b) > cap:
            bad.append(i)
    return CheckResult(4, "knapsack exactness", not bad,
                       f"{n - len(bad)}/{n} instances optimal and feasible", {"failures": bad})


# -- network

def _loss(net, enc, action, target) -> float:
    return huber_loss(net.forward(enc, action), target)[0]


def _loss_extended(net, enc, action, target):
    """The same loss evaluated in the platform's extended precision."""
    ld = np.longdouble
    z1 = net.b1.astype(ld)
    for k, f in enumerate(enc.mu):
        if f > 0:
            z1[f - 1] += ld(net.w1[k, f - 1]) * ld(enc.x[k])
    h1 = np.maximum(z1, ld(0))
    h2 = np.maximum(net.w2.astype(ld) @ h1 + net.b2.astype(ld), ld(0))
    out = net.w3.astype(ld) @ h2 + net.b3.astype(ld)
    e = out[np.asarray(action, dtype=bool)].sum() - ld(target)
    return ld(0.5) * e * e if abs(e) < 1 else abs(e) - ld(0.5)


def gradient_check(n: int = 50, seed: int = 3, h: float = 1e-6, tol: float = 1e-4,
                   floor: float = 1e-8, extended: bool = False) -> CheckResult:
    """Analytic gradients of the Huber loss against central differences.

    With ``extended`` the differenced loss is evaluated in extended precision,
    which removes most of the rounding noise from the reference.
    """
    K, F = 6, 8
    rng = np.random.default_rng(seed)
    loss = _loss_extended if extended else _loss
    worst = 0.0
    over = []
    checked = 0
    for trial in range(n):
        net = ScaaNetwork(K, F, rng=rng)
        mu = rng.integers(0, F + 1, size=K)
        action = rng.integers(0, 2, size=F).astype(np.int8)
        enc = encode_state(mu, F)
        target = net.forward(enc, action) + rng.normal(0.0, 1.5)
        net._cache = None
        net.zero_grad()
        q = net.forward(enc, action)
        net.backward(enc, action, huber_loss(q, target)[1])
        for name in PARAMS:
            w = getattr(net, name)
            g = getattr(net, "g" + name)
            for idx in np.ndindex(w.shape):
                old = w[idx]
                w[idx] = old + h
                up = loss(net, enc, action, target)
                w[idx] = old - h
                down = loss(net, enc, action, target)
                w[idx] = old
                num = float((up - down) / (2 * h))
                err = abs(g[idx] - num) / max(abs(g[idx]), abs(num), floor)
                checked += 1
                worst = max(worst, err)
                if err > tol:
                    over.append((trial, name, idx, float(g[idx]), num))
    smallest = min((abs(o[3]) for o in over), default=math.nan)
    detail = f"worst relative error {worst:.2e} (limit {tol:g}); {len(over)}/{checked} entries over"
    if over:
        detail += f", largest offending |gradient| {max(abs(o[3]) for o in over):.1e}"
    return CheckResult(5, "gradient check", worst <= tol, detail,
                       {"worst": worst, "over": over, "checked": checked, "smallest": smallest})


def masking(n: int = 100, seed: int = 4) -> CheckResult:
    """Cut first-layer weights change neither Q nor receive gradient."""
    K, F = 6, 8
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n):
        net = ScaaNetwork(K, F, rng=rng)
        mu = rng.integers(0, F + 1, size=K)
        mu[0] = max(mu[0], 1)
        enc = encode_state(mu, F)
        action = rng.integers(0, 2, size=F).astype(np.int8)
        q0 = net.forward(enc, action)
        net.backward(enc, action, 1.0)
        live = np.zeros((K, F), dtype=bool)
        for k, f in enumerate(mu):
            if f > 0:
                live[k, f - 1] = True
        if np.any(net.gw1[~live] != 0.0):
            bad += 1
            continue
        cut = np.argwhere(~live)
        net.w1[tuple(cut.T)] += rng.normal(0.0, 10.0, size=len(cut))
        if net.forward(enc, action) != q0:
            bad += 1
    return CheckResult(6, "masking soundness", bad == 0, f"{n - bad}/{n} perturbations inert")


# -- requests

def markov_fidelity(steps: int = 100_000, seed: int = 5) -> CheckResult:
    F = 20
    model = RequestModel(idle_prob=0.2, zipf_exp=0.8, neighbor_count=3)
    sampler = env.RequestSampler(model, F)
    rng = np.random.default_rng(seed)
    counts = np.zeros((F + 1, F + 1), dtype=np.int64)
    state = np.zeros(1, dtype=np.int64)
    for _ in range(steps):
        nxt = sampler(state, rng)
        counts[state[0], nxt[0]] += 1
        state = nxt
    P = env.transition_matrix(model, F)
    n_i = counts.sum(axis=1, keepdims=True)
    sd = np.sqrt(n_i * P * (1 - P))
    dev = np.abs(counts - n_i * P)
    outside = (dev > 3 * sd) | ((P == 0) & (counts > 0))
    worst = float(np.max(np.where(sd > 0, dev / np.where(sd > 0, sd, 1), 0)))
    return CheckResult(7, "Markov sampler fidelity", not outside.any(),
                       f"{int(outside.sum())} of {int((P > 0).sum())} transitions outside 3 sd "
                       f"(worst {worst:.2f} sd)", {"worst_sd": worst})


# -- experiments

def boundary_equivalence(seed: int = 0, train_slots: int = 1500, eval_slots: int = 500,
                         rtol: float = 0.01) -> CheckResult:
    """Empty cache: learner equals offload-only slot by slot. Cache holding every
    task: every caching policy reaches the same mean energy."""
    cfg = desk_config(seed=seed, train_slots=train_slots, eval_slots=eval_slots)
    zero = cfg.replace(system=dataclasses.replace(cfg.system, cache_capacity=0.0))
    _, a = harness.run_records(zero.replace(policy="proposed"))
    _, b = harness.run_records(zero.replace(policy="offload-only"))
    same = [x.energy for x in a] == [y.energy for y in b]

    world = harness.World(cfg)
    full_c = world.tasks.total_software + cfg.system.F * cfg.system.knapsack_unit
    full = cfg.replace(system=dataclasses.replace(cfg.system, cache_capacity=full_c))
    means = {}
    for policy in ("proposed", "lru", "lfu", "fifo", "lmp"):
        _, recs = harness.run_records(full.replace(policy=policy))
        means[policy] = harness.summarize(recs)["energy"]
    spread = max(means.values()) / min(means.values()) - 1.0
    ok = same and spread <= rtol
    return CheckResult(8, "boundary equivalences", ok,
                       f"empty cache series identical: {same}; full-cache spread {spread:.3%}",
                       {"identical": same, "means": means, "spread": spread})


def desk_runs(seeds=(0, 1, 2), policies=("proposed", "lru", "lfu", "fifo"), **changes):
    """Eval-window mean energy per (policy, seed), plus the learner's training rewards."""
    energies: dict[str, list[float]] = {p: [] for p in policies}
    rewards = {}
    for seed in seeds:
        for policy in policies:
            _, recs = harness.run_records(desk_config(policy=policy, seed=seed, **changes))
            energies[policy].append(harness.summarize(recs)["energy"])
            if policy == "proposed":
                rewards[seed] = [r.reward for r in recs if r.phase == "train"]
    return energies, rewards


def desk_trend(energies, margin: float = 0.05) -> CheckResult:
    means = {p: float(np.mean(v)) for p, v in energies.items()}
    best = min(means[p] for p in ("lru", "lfu", "fifo"))
    gain = 1.0 - means["proposed"] / best
    return CheckResult(9, "desk-scale trend", gain >= margin,
                       f"learner {means['proposed']:.4f} J vs best classic {best:.4f} J "
                       f"({gain:.1%} lower, need {margin:.0%})", {"means": means, "gain": gain})


def plateau_slot(rewards, window: int = 20, tail: int = 500, frac: float = 0.9) -> tuple[int, float]:
    """First training slot whose trailing average reaches ``frac`` of the final plateau.

    The plateau is the mean of the trailing average over the last ``tail`` slots.
    Returns ``(slot, plateau)``; slot is -1 when never reached.
    """
    ma = harness.moving_average(rewards, window)
    plateau = float(ma[-tail:].mean())
    hit = np.flatnonzero(ma >= frac * plateau)
    return (int(hit[0]) + window if len(hit) else -1), plateau


def convergence(rewards_by_seed, within: int = 2000) -> CheckResult:
    slots = {s: plateau_slot(r) for s, r in rewards_by_seed.items()}
    ok = all(0 < slot <= within for slot, _ in slots.values())
    text = ", ".join(f"seed {s}: slot {v[0]} (plateau {v[1]:.3f} J)" for s, v in slots.items())
    return CheckResult(10, "convergence shape", ok, text, {"slots": slots})


def determinism(tmpdir, seed: int = 7) -> CheckResult:
    """Two runs of one configuration, compared byte for byte."""
    from pathlib import Path

    cfg = desk_config(seed=seed, train_slots=150, eval_slots=50)
    a = harness.run_experiment(cfg, Path(tmpdir) / "a")
    b = harness.run_experiment(cfg, Path(tmpdir) / "b")
    same = a.read_bytes() == b.read_bytes()
    return CheckResult(11, "determinism", same, f"metrics files identical: {same}")


def run_all(tmpdir, full: bool = True) -> list[CheckResult]:
    """Every criterion in order. ``full=False`` shortens the desk-scale runs."""
    results = []
    ne = ne_oracle()
    results.append(ne)
    results.append(sign_agreement())
    results.append(iteration_bound(ne.data["outcomes"]))
    results.append(knapsack_exactness())
    results.append(gradient_check())
    results.append(masking())
    results.append(markov_fidelity())
    results.append(boundary_equivalence() if full else
                   boundary_equivalence(train_slots=300, eval_slots=100))
    energies, rewards = desk_runs() if full else desk_runs(seeds=(0,), train_slots=600,
                                                           eval_slots=100)
    results.append(desk_trend(energies))
    results.append(convergence(rewards, within=2000 if full else 400))
    results.append(determinism(tmpdir))
    return results
