"""State-coding / action-aggregation Q network with hand-written backprop.

Layout::

    X (K)  --masked w1-->  second layer (F, ReLU)  -->  hidden (H, ReLU)
           -->  per-task outputs O (F, linear)  --action bits-->  Q

User k's input is 1 when it requests a task. When user k requests task f only
the connection (k, f) of ``w1`` is live; the rest of row k is cut for that
sample. Q is the sum of O over the cached tasks, so a forward pass for every
action at once costs one pass to O.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CHECKPOINT_VERSION = 1
PARAMS = ("w1", "b1", "w2", "b2", "w3", "b3")


class StaleActivationError(RuntimeError):
    pass


@dataclass(frozen=True)
class InputEncoding:
    mu: np.ndarray
    x: np.ndarray
    mask: np.ndarray


def encode_state(mu, F: int) -> InputEncoding:
    """Input vector and connection mask for a request vector."""
    mu = np.asarray(mu, dtype=np.int64)
    if mu.min(initial=0) < 0 or mu.max(initial=0) > F:
        raise ValueError("request entries must lie in [0, F]")
    x = (mu > 0).astype(float)
    mask = np.ones((len(mu), F), dtype=bool)
    for k, f in enumerate(mu):
        if f > 0:
            mask[k] = False
            mask[k, f - 1] = True
    return InputEncoding(mu, x, mask)


def huber_loss(q: float, target: float) -> tuple[float, float]:
    """Huber loss with unit threshold and its derivative in q."""
    e = q - target
    if abs(e) < 1.0:
        return 0.5 * e * e, e
    return abs(e) - 0.5, (1.0 if e > 0 else -1.0)


class ScaaNetwork:
    def __init__(self, K: int, F: int, hidden: int = 128, rng: np.random.Generator | None = None):
        self.K, self.F, self.hidden = K, F, hidden
        rng = np.random.default_rng(0) if rng is None else rng

        def uniform(shape, fan_in):
            lim = 1.0 / math.sqrt(fan_in)
            return rng.uniform(-lim, lim, size=shape)

        self.w1 = uniform((K, F), K)
        self.b1 = uniform(F, K)
        self.w2 = uniform((hidden, F), F)
        self.b2 = uniform(hidden, F)
        self.w3 = uniform((F, hidden), hidden)
        self.b3 = uniform(F, hidden)
        self.zero_grad()
        self._cache = None

    # -- parameters

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAMS}

    def grads(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, "g" + name) for name in PARAMS}

    def zero_grad(self) -> None:
        for name in PARAMS:
            setattr(self, "g" + name, np.zeros_like(getattr(self, name)))

    # -- forward / backward

    def _trunk(self, enc: InputEncoding):
        z1 = self.b1.copy()
        for k, f in enumerate(enc.mu):
            if f > 0:
                z1[f - 1] += self.w1[k, f - 1] * enc.x[k]
        h1 = np.maximum(z1, 0.0)
        z2 = self.w2 @ h1 + self.b2
        h2 = np.maximum(z2, 0.0)
        out = self.w3 @ h2 + self.b3
        return z1, h1, z2, h2, out

    def outputs(self, enc: InputEncoding) -> np.ndarray:
        """Per-task value contributions O for a state."""
        return self._trunk(enc)[-1]

    def forward(self, enc: InputEncoding, action) -> float:
        action = np.asarray(action, dtype=np.int8)
        z1, h1, z2, h2, out = self._trunk(enc)
        self._cache = (enc, action.copy(), z1, h1, z2, h2)
        return math.fsum(out[action.astype(bool)].tolist())

    def backward(self, enc: InputEncoding, action, dq: float) -> None:
        """Accumulate dLoss/dparam for the last forward pass (which must match)."""
        action = np.asarray(action, dtype=np.int8)
        if self._cache is None or self._cache[0] is not enc or \
                not np.array_equal(self._cache[1], action):
            raise StaleActivationError("backward() does not match the last forward()")
        _, _, z1, h1, z2, h2 = self._cache
        self._cache = None
        d_out = dq * action.astype(float)
        self.gw3 += np.outer(d_out, h2)
        self.gb3 += d_out
        d_z2 = (self.w3.T @ d_out) * (z2 > 0)
        self.gw2 += np.outer(d_z2, h1)
        self.gb2 += d_z2
        d_z1 = (self.w2.T @ d_z2) * (z1 > 0)
        self.gb1 += d_z1
        for k, f in enumerate(enc.mu):
            if f > 0:
                self.gw1[k, f - 1] += enc.x[k] * d_z1[f - 1]

    def sgd_step(self, lr: float) -> None:
        for name in PARAMS:
            getattr(self, name)[...] -= lr * getattr(self, "g" + name)

    # -- copies and checkpoints

    def copy(self) -> "ScaaNetwork":
        other = ScaaNetwork.__new__(ScaaNetwork)
        other.K, other.F, other.hidden = self.K, self.F, self.hidden
        for name in PARAMS:
            setattr(other, name, getattr(self, name).copy())
        other.zero_grad()
        other._cache = None
        return other

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as fh:
            np.savez(fh, format_version=np.array(CHECKPOINT_VERSION),
                     shape=np.array([self.K, self.F, self.hidden]), **self.params())

    @classmethod
    def load(cls, path: str | Path) -> "ScaaNetwork":
        with np.load(path) as data:
            version = int(data["format_version"])
            if version != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {version}")
            K, F, hidden = (int(v) for v in data["shape"])
            net = cls.__new__(cls)
            net.K, net.F, net.hidden = K, F, hidden
            expected = {"w1": (K, F), "b1": (F,), "w2": (hidden, F), "b2": (hidden,),
                        "w3": (F, hidden), "b3": (F,)}
            for name in PARAMS:
                arr = np.array(data[name], dtype=float)
                if arr.shape != expected[name]:
                    raise ValueError(f"{name}: shape {arr.shape}, expected {expected[name]}")
                setattr(net, name, arr)
        net.zero_grad()
        net._cache = None
        return net


def clone_weights(src: ScaaNetwork, dst: ScaaNetwork) -> None:
    """Copy every parameter of ``src`` into ``dst`` in place."""
    for name in PARAMS:
        a, b = getattr(src, name), getattr(dst, name)
        if a.shape != b.shape:
            raise ValueError(f"{name}: shape mismatch {a.shape} vs {b.shape}")
        b[...] = a


def forward(net: ScaaNetwork, enc: InputEncoding, action) -> float:
    return net.forward(enc, action)


def backward(net: ScaaNetwork, enc: InputEncoding, action, dq: float) -> None:
    net.backward(enc, action, dq)


def sgd_step(net: ScaaNetwork, lr: float) -> None:
    net.sgd_step(lr)
