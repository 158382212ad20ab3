"""The compiled kernels must reproduce the pure-Python ones exactly."""
import numpy as np
import pytest
from hypothesis import given, strategies as st

from edgecache import _pykernels, kernels

ck = pytest.importorskip("edgecache._ckernels")


def test_backend_selected():
    assert kernels.BACKEND == "cython"


@given(st.integers(0, 2 ** 32 - 1))
def test_best_responses_identical(seed):
    rng = np.random.default_rng(seed)
    K, M = int(rng.integers(1, 12)), int(rng.integers(1, 6))
    args = (rng.integers(0, M + 1, K), rng.random(K) < 0.8, 10 ** rng.uniform(-12, -6, K),
            np.full(K, 0.5), rng.uniform(1e7, 5e8, K), rng.uniform(0, 2, K),
            rng.uniform(0, 0.1, K), 5.0, 30e6 / M, 2e-13, M)
    a = _pykernels.best_responses(*args)
    b = ck.best_responses(*args)
    np.testing.assert_array_equal(a, b)


@given(st.integers(0, 2 ** 32 - 1))
def test_knapsack_tables_identical(seed):
    rng = np.random.default_rng(seed)
    F = int(rng.integers(1, 25))
    values = rng.normal(0, 1, F)
    weights = rng.integers(1, 30, F)
    cap = int(rng.integers(0, 200))
    for x, y in zip(_pykernels.knapsack_tables(values, weights, cap),
                    ck.knapsack_tables(values, weights, cap)):
        np.testing.assert_array_equal(x, y)
