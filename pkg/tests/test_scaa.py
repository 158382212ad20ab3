import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgecache import checks
from edgecache.scaa import (ScaaNetwork, StaleActivationError, clone_weights, encode_state,
                            huber_loss, PARAMS)

seeds = st.integers(0, 2 ** 32 - 1)
K, F = 5, 7


def _net(seed=0, **kw):
    return ScaaNetwork(K, F, rng=np.random.default_rng(seed), **kw)


def _sample(rng):
    return rng.integers(0, F + 1, K), rng.integers(0, 2, F).astype(np.int8)


def test_encoding():
    enc = encode_state([2, 0, 2], 3)
    assert list(enc.x) == [1, 0, 1]
    assert enc.mask[0].tolist() == [False, True, False]
    assert enc.mask[1].all()
    with pytest.raises(ValueError):
        encode_state([4], 3)


def test_idle_state_reaches_bias_only():
    net = _net()
    z1 = net._trunk(encode_state(np.zeros(K, int), F))[0]
    np.testing.assert_array_equal(z1, net.b1)


def test_second_layer_identity():
    net = _net(3)
    mu = np.array([1, 1, 4, 0, 7])
    z1 = net._trunk(encode_state(mu, F))[0]
    expect = net.b1.copy()
    expect[0] += net.w1[0, 0]
    expect[0] += net.w1[1, 0]
    expect[3] += net.w1[2, 3]
    expect[6] += net.w1[4, 6]
    np.testing.assert_array_equal(z1, expect)


def test_action_aggregation():
    net = _net(1)
    enc = encode_state([1, 2, 0, 3, 3], F)
    out = net.outputs(enc)
    assert net.forward(enc, np.zeros(F, np.int8)) == 0.0
    for f in range(F):
        e = np.zeros(F, np.int8)
        e[f] = 1
        assert net.forward(enc, e) == out[f]


@given(seeds)
def test_disjoint_actions_add(seed):
    rng = np.random.default_rng(seed)
    net = _net(seed % 7)
    mu, _ = _sample(rng)
    enc = encode_state(mu, F)
    split = rng.integers(0, 3, F)
    a, b = (split == 1).astype(np.int8), (split == 2).astype(np.int8)
    q = net.forward(enc, a + b)
    assert q == pytest.approx(net.forward(enc, a) + net.forward(enc, b), rel=1e-15, abs=1e-15)


def test_task_relabelling_is_neutral():
    rng = np.random.default_rng(4)
    net = _net(4)
    perm = rng.permutation(F)  # new task index i holds old task perm[i]
    other = net.copy()
    other.w1 = net.w1[:, perm]
    other.b1 = net.b1[perm]
    other.w2 = net.w2[:, perm]
    other.w3 = net.w3[perm]
    other.b3 = net.b3[perm]
    inv = np.argsort(perm)
    for _ in range(20):
        mu, a = _sample(rng)
        mu2 = np.where(mu > 0, inv[np.maximum(mu, 1) - 1] + 1, 0)
        q = net.forward(encode_state(mu, F), a)
        q2 = other.forward(encode_state(mu2, F), a[perm])
        assert q2 == pytest.approx(q, rel=1e-12, abs=1e-12)


def test_huber_values():
    assert huber_loss(0.0, 0.0) == (0.0, 0.0)
    assert huber_loss(0.5, 0.0) == (0.125, 0.5)
    assert huber_loss(3.0, 0.0) == (2.5, 1.0)
    assert huber_loss(-3.0, 0.0) == (2.5, -1.0)


def test_unused_outputs_get_no_gradient():
    net = _net(2)
    enc = encode_state([1, 0, 2, 2, 5], F)
    a = np.zeros(F, np.int8)
    a[[1, 4]] = 1
    net.forward(enc, a)
    net.backward(enc, a, 0.7)
    assert not net.gw3[a == 0].any() and not net.gb3[a == 0].any()


def test_zero_upstream_zero_gradient():
    net = _net()
    enc = encode_state([1, 2, 3, 4, 5], F)
    a = np.ones(F, np.int8)
    net.forward(enc, a)
    net.backward(enc, a, 0.0)
    assert all(not g.any() for g in net.grads().values())


def test_stale_backward_rejected():
    net = _net()
    enc = encode_state([1, 2, 3, 4, 5], F)
    a = np.ones(F, np.int8)
    with pytest.raises(StaleActivationError):
        net.backward(enc, a, 1.0)
    net.forward(enc, a)
    with pytest.raises(StaleActivationError):
        net.backward(enc, np.zeros(F, np.int8), 1.0)


def test_gradients_against_extended_precision_differences():
    result = checks.gradient_check(n=5, extended=True)
    assert result.passed, result.detail


def test_sgd_zero_rate_and_descent():
    net = _net(5)
    before = {k: v.copy() for k, v in net.params().items()}
    enc = encode_state([1, 2, 0, 0, 3], F)
    a = np.array([1, 1, 0, 1, 0, 0, 0], np.int8)
    net.forward(enc, a)
    net.backward(enc, a, 1.0)
    net.sgd_step(0.0)
    assert all(np.array_equal(before[k], v) for k, v in net.params().items())
    target = net.forward(enc, a) + 0.8
    losses = []
    for _ in range(50):
        net.zero_grad()
        q = net.forward(enc, a)
        loss, dq = huber_loss(q, target)
        losses.append(loss)
        net.backward(enc, a, dq)
        net.sgd_step(1e-3)
    assert all(x >= y for x, y in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]


def test_clone_and_divergence():
    src, dst = _net(1), _net(2)
    rng = np.random.default_rng(0)
    clone_weights(src, dst)
    clone_weights(src, dst)
    for _ in range(100):
        mu, a = _sample(rng)
        enc = encode_state(mu, F)
        assert src.forward(enc, a) == dst.forward(enc, a)
    enc = encode_state([1, 2, 3, 4, 5], F)
    a = np.ones(F, np.int8)
    src.forward(enc, a)
    src.backward(enc, a, 1.0)
    src.sgd_step(0.1)
    assert src.forward(enc, a) != dst.forward(enc, a)
    with pytest.raises(ValueError):
        clone_weights(src, ScaaNetwork(K, F + 1))


def test_checkpoint_round_trip(tmp_path):
    net = _net(9)
    net.save(tmp_path / "n.npz")
    back = ScaaNetwork.load(tmp_path / "n.npz")
    rng = np.random.default_rng(1)
    for _ in range(20):
        mu, a = _sample(rng)
        enc = encode_state(mu, F)
        assert back.forward(enc, a) == net.forward(enc, a)
    for name in PARAMS:
        assert np.array_equal(getattr(back, name), getattr(net, name))


def test_checkpoint_shape_checked(tmp_path):
    net = _net()
    with open(tmp_path / "bad.npz", "wb") as fh:
        params = net.params()
        params["w2"] = params["w2"][:-1]
        np.savez(fh, format_version=np.array(1), shape=np.array([K, F, 128]), **params)
    with pytest.raises(ValueError):
        ScaaNetwork.load(tmp_path / "bad.npz")
