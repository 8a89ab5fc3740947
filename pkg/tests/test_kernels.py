"""The compiled kernels and the numpy fallback must agree bit for bit."""

import numpy as np
import pytest

from marketpower import _fallback, kernels

compiled = pytest.importorskip("marketpower._kernels")


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("seed", range(5))
def test_solve_dp_parity(seed):
    rng = np.random.default_rng(seed)
    n = 200
    args = (rng.uniform(-50, 200, n), rng.uniform(0, 150, n), rng.uniform(0, 5000, n), 250.0, 80.0, bool(seed % 2))
    s1, o1 = compiled.solve_dp(*args)
    s2, o2 = _fallback.solve_dp(*args)
    assert np.array_equal(np.asarray(s1), np.asarray(s2))
    assert o1 == pytest.approx(o2, rel=1e-12, abs=1e-9)


def test_chain_parity():
    rng = np.random.default_rng(9)
    n = 2000
    args = (rng.uniform(-50, 200, n), rng.uniform(0, 150, n), rng.uniform(0, 5000, n), 250.0, 80.0, False, 744, 24)
    assert np.array_equal(np.asarray(compiled.chain_dispatch(*args)), np.asarray(_fallback.chain_dispatch(*args)))


def test_mc_counts_parity():
    rng = np.random.default_rng(3)
    n = 900
    mult = np.maximum(1 + 0.05 * rng.standard_normal((40, 3)), 0.01)
    args = (rng.uniform(0, 150, n), rng.uniform(10, 40, n), rng.uniform(5, 20, n), 300.0, 100.0, 0.45,
            20.0, 3.0, 1.0, mult, False, 744, 24)
    assert np.array_equal(np.asarray(compiled.mc_on_counts(*args)), np.asarray(_fallback.mc_on_counts(*args)))


def test_partition_parity():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(120, 2))
    c1 = np.vstack([np.zeros(2), np.cumsum(X, 0)])
    c2 = np.vstack([np.zeros(2), np.cumsum(X * X, 0)])
    cnt = np.arange(121, dtype=float)
    C1, T1 = compiled.partition_dp(c1, c2, cnt, 5)
    C2, T2 = _fallback.partition_dp(c1, c2, cnt, 5)
    assert np.allclose(np.asarray(C1), np.asarray(C2), rtol=1e-12, atol=1e-9)
    assert np.array_equal(np.asarray(T1), np.asarray(T2))


def test_segreg_parity():
    rng = np.random.default_rng(5)
    x = np.sort(rng.normal(size=300))
    y = np.maximum(x, 0) + 0.1 * rng.normal(size=300)
    S = np.column_stack([np.ones(300), x, y, x * x, x * y, y * y])
    S = np.vstack([np.zeros(6), np.cumsum(S, 0)])[::10]
    C1, T1 = compiled.segreg_dp(np.ascontiguousarray(S), 4)
    C2, T2 = _fallback.segreg_dp(np.ascontiguousarray(S), 4)
    assert np.allclose(np.asarray(C1), np.asarray(C2), rtol=1e-9, atol=1e-9)
    assert np.array_equal(np.asarray(T1), np.asarray(T2))
