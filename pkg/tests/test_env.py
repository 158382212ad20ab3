import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from edgecache import env
from edgecache.config import RequestModel, SystemConfig
from conftest import fixed_slot


def test_three_task_chain_row():
    P = env.transition_matrix(RequestModel(idle_prob=0.2, zipf_exp=0.8, neighbor_count=1), 3)
    assert dict((j, p) for j, p in enumerate(P[1]) if p > 0) == {0: 0.2, 2: pytest.approx(0.8)}


def test_uniform_zipf_from_idle():
    P = env.transition_matrix(RequestModel(idle_prob=0.3, zipf_exp=0.0, neighbor_count=2), 7)
    np.testing.assert_allclose(P[0, 1:], 0.7 / 7)


def test_outside_window_is_zero():
    P = env.transition_matrix(RequestModel(neighbor_count=3), 20)
    assert set(np.flatnonzero(P[5])) == {0, 6, 7, 8}
    # wraps past F back to task 1, never onto the idle state
    assert set(np.flatnonzero(P[19])) == {0, 20, 1, 2}


@given(R=st.floats(0, 1), delta=st.floats(0, 3), F=st.integers(1, 30), data=st.data())
def test_rows_sum_to_one(R, delta, F, data):
    N = data.draw(st.integers(1, F))
    P = env.transition_matrix(RequestModel(idle_prob=R, zipf_exp=delta, neighbor_count=N), F)
    assert np.all(P >= 0)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, rtol=0, atol=1e-12)


def test_sampler_empirical_rows():
    model = RequestModel(idle_prob=0.2, zipf_exp=0.8, neighbor_count=1)
    rng = np.random.default_rng(0)
    draws = env.sample_requests(np.ones(20000, dtype=int), model, rng, 3)
    assert set(np.unique(draws)) == {0, 2}
    assert abs((draws == 0).mean() - 0.2) < 0.01


def test_sample_requests_rejects_bad_state():
    with pytest.raises(ValueError):
        env.sample_requests([4], RequestModel(), np.random.default_rng(0), 3)


def _users(distances):
    return [env.User(k, d, 0.5, 1e9) for k, d in enumerate(distances)]


def test_fading_unit_mean_and_exponential():
    users = _users([50.0] * 10)
    rng = np.random.default_rng(1)
    rho = np.concatenate([env.sample_fading(users, SystemConfig(), rng).fading
                          for _ in range(10_000)])
    assert abs(rho.mean() - 1.0) < 0.01
    assert stats.kstest(rho, "expon").statistic < 0.01


class _UnitFading:
    def exponential(self, scale, size):
        return np.ones(size)


def test_gain_power_law():
    slot = env.sample_fading(_users([100.0]), SystemConfig(path_loss_exp=4.0), _UnitFading())
    assert slot.gain[0] == pytest.approx(1e-8, rel=1e-15)


def test_users_inside_cell():
    cfg = SystemConfig(K=500)
    users = env.make_users(cfg, np.random.default_rng(2))
    d = np.array([u.distance for u in users])
    assert d.min() >= cfg.min_distance and d.max() <= cfg.cell_size / math.sqrt(2)


def _decimal_rate(p, h, noise, B, M):
    getcontext().prec = 50
    snr = Decimal(p) * Decimal(h) / Decimal(noise)
    return Decimal(B) / Decimal(M) * (1 + snr).ln() / Decimal(2).ln()


def test_rate_against_high_precision():
    cfg = SystemConfig(M=10, bandwidth=30e6, noise_var=2e-13)
    slot = fixed_slot([0.5 * 1e-8])
    r = env.uplink_rate(0, [1], slot, cfg)
    assert r == pytest.approx(float(_decimal_rate(0.5, 1e-8, 2e-13, 30e6, 10)), rel=1e-14)
    # frozen: (30e6/10) * log2(25001)
    assert r == pytest.approx(43_829_094.543252966, rel=1e-14)


def test_rate_requires_channel():
    with pytest.raises(env.ChannelError):
        env.uplink_rate(0, [0], fixed_slot([1e-9]), SystemConfig())


def test_symmetric_users_share_rate():
    slot = fixed_slot([2e-9, 2e-9])
    cfg = SystemConfig()
    assert env.uplink_rate(0, [1, 1], slot, cfg) == env.uplink_rate(1, [1, 1], slot, cfg)


def test_co_channel_only():
    slot = fixed_slot([1e-9, 5e-9, 7e-9])
    assert env.interference(0, [1, 2, 1], slot) == 7e-9
    assert env.interference(1, [1, 2, 1], slot) == 0.0


@given(st.lists(st.floats(1e-12, 1e-6), min_size=2, max_size=6))
def test_rate_monotone_in_interferers(ph):
    cfg = SystemConfig()
    slot = fixed_slot(ph)
    K = len(ph)
    alone = [1] + [2] * (K - 1)
    rates = []
    alpha = list(alone)
    for n in range(1, K):
        rates.append(env.uplink_rate(0, alpha, slot, cfg))
        alpha[n] = 1
    rates.append(env.uplink_rate(0, alpha, slot, cfg))
    assert all(a >= b for a, b in zip(rates, rates[1:]))


def test_local_energy_scaling():
    cfg = SystemConfig()
    t = env.Task(1, 1e6, 1e7, 5e8)
    e = env.local_energy(t, cfg)
    assert e == pytest.approx(5e-27 * 5e8 ** 3 / 25.0, rel=1e-15)
    assert env.local_energy(env.Task(1, 1e6, 1e7, 1e9), cfg) == pytest.approx(8 * e, rel=1e-15)
    slow = SystemConfig(slot_len=10.0)
    assert env.local_energy(t, slow) == pytest.approx(e / 4, rel=1e-15)


def test_strict_feasibility_flags_fast_clock():
    cfg = SystemConfig(strict_feasibility=True, local_cpu_max=1e8)
    with pytest.raises(env.InfeasibleError):
        env.local_energy(env.Task(1, 1e6, 1e7, 1e9), cfg)


@given(inp=st.floats(1e5, 1e7), sw=st.floats(1e5, 1e8), ph=st.floats(1e-12, 1e-6))
def test_caching_never_costs_more(inp, sw, ph):
    cfg = SystemConfig()
    t = env.Task(1, inp, sw, 1e8)
    slot = fixed_slot([ph])
    assert env.offload_energy(0, t, 1, [1], slot, cfg) < env.offload_energy(0, t, 0, [1], slot, cfg)
    assert env.offload_delay(0, t, 1, [1], slot, cfg) < env.offload_delay(0, t, 0, [1], slot, cfg)


def test_delay_and_energy_decomposition():
    cfg = SystemConfig()
    t = env.Task(1, 2e6, 3e7, 4e8)
    slot = fixed_slot([3e-9])
    r = env.uplink_rate(0, [1], slot, cfg)
    d0 = env.offload_delay(0, t, 0, [1], slot, cfg)
    d1 = env.offload_delay(0, t, 1, [1], slot, cfg)
    assert d0 - d1 == pytest.approx(8 * 3e7 / r, rel=1e-12)
    assert env.offload_energy(0, t, 1, [1], slot, cfg) == 0.5 * (8 * 2e6) / r
    fast = SystemConfig(edge_cpu=1e30)
    assert env.offload_delay(0, t, 1, [1], slot, fast) == pytest.approx(8 * 2e6 / r, rel=1e-12)


def test_user_energy_dispatch():
    cfg = SystemConfig()
    tasks = env.TaskLibrary([1e6, 2e6], [1e7, 2e7], [1e8, 3e8])
    slot = fixed_slot([1e-9, 2e-9, 3e-9])
    mu, alpha, b = [0, 1, 2], [0, 0, 1], [0, 1]
    assert env.user_energy(0, mu, alpha, b, slot, tasks, cfg) == 0.0
    assert env.user_energy(1, mu, alpha, b, slot, tasks, cfg) == env.local_energy(tasks[1], cfg)
    assert env.user_energy(2, mu, alpha, b, slot, tasks, cfg) == \
        env.offload_energy(2, tasks[2], 1, alpha, slot, cfg)
    total = env.system_energy(mu, alpha, b, slot, tasks, cfg)
    assert total == sum(env.user_energy(k, mu, alpha, b, slot, tasks, cfg) for k in range(3))
    assert env.system_energy([0, 0, 0], [0, 0, 0], b, slot, tasks, cfg) == 0.0


def test_task_library_indexing():
    lib = env.TaskLibrary.from_tasks([env.Task(2, 1, 2, 3), env.Task(1, 4, 5, 6)])
    assert lib[1].input_bytes == 4 and lib[2].cycles == 3 and len(lib) == 2
    with pytest.raises(ValueError):
        env.TaskLibrary.from_tasks([env.Task(2, 1, 2, 3)])
    with pytest.raises(ValueError):
        env.Task(1, 0, 1, 1)
