"""Kernel-level checks: backend dispatch, binning, and numba/numpy agreement."""

import os
import subprocess
import sys

import numpy as np
import pytest

from calibkit import kernels

HAVE_NUMBA = kernels._HAVE_NUMBA
needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not importable")


def random_batch(rng, n, k):
    logits = rng.normal(0.0, 2.0, (n, k))
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    probs = e / e.sum(axis=1, keepdims=True)
    labels = rng.integers(0, k, n)
    return np.ascontiguousarray(probs), labels.astype(np.int64)


def test_backend_is_one_of_the_two():
    assert kernels.BACKEND in ("numba", "numpy")


def test_env_var_forces_numpy_backend():
    code = "import calibkit.kernels as k; print(k.BACKEND)"
    out = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True, text=True,
        env={**os.environ, "CALIBKIT_KERNELS": "numpy"},
    )
    assert out.returncode == 0
    assert out.stdout.strip() == "numpy"


def test_unknown_backend_name_fails_at_import():
    code = "import calibkit.kernels"
    out = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True, text=True,
        env={**os.environ, "CALIBKIT_KERNELS": "fortran"},
    )
    assert out.returncode != 0
    assert "CALIBKIT_KERNELS" in out.stderr


def test_bin_edges_are_interior_multiples():
    np.testing.assert_allclose(kernels.bin_edges(10), np.arange(1, 10) / 10.0)
    assert kernels.bin_edges(1).size == 0


def test_bin_indices_match_interval_membership():
    edges = kernels.bin_edges(10)
    conf = np.array([0.0, 0.05, 0.1, 0.10000001, 0.5, 0.95, 1.0])
    expect = np.array([0, 0, 0, 1, 4, 9, 9])
    np.testing.assert_array_equal(kernels.bin_indices_numpy(conf, edges), expect)


@needs_numba
def test_bin_indices_backends_agree_including_edge_values():
    rng = np.random.default_rng(11)
    for m in (1, 2, 7, 10, 15):
        edges = kernels.bin_edges(m)
        conf = rng.uniform(0.0, 1.0, 500)
        conf[:m] = np.arange(m) / m  # exact edge values
        np.testing.assert_array_equal(
            kernels.bin_indices_numpy(conf, edges),
            kernels.bin_indices_numba(conf, edges),
        )


def test_reliability_sums_match_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n, m = int(rng.integers(1, 200)), int(rng.integers(1, 16))
        conf = rng.uniform(0, 1, n)
        correct = rng.integers(0, 2, n).astype(np.float64)
        edges = kernels.bin_edges(m)
        counts, acc_sums, conf_sums = kernels.reliability_sums(conf, correct, edges, m)
        for b in range(m):
            lo, hi = b / m, (b + 1) / m
            mask = (conf > lo) & (conf <= hi) if b else (conf <= hi)
            assert counts[b] == mask.sum()
            np.testing.assert_allclose(acc_sums[b], correct[mask].sum(), atol=1e-12)
            np.testing.assert_allclose(conf_sums[b], conf[mask].sum(), atol=1e-12)
        assert counts.sum() == n


@needs_numba
def test_reliability_sums_backends_agree():
    rng = np.random.default_rng(6)
    for _ in range(10):
        n, m = int(rng.integers(1, 300)), int(rng.integers(1, 16))
        conf = rng.uniform(0, 1, n)
        correct = rng.integers(0, 2, n).astype(np.float64)
        edges = kernels.bin_edges(m)
        a = kernels.reliability_sums_numpy(conf, correct, edges, m)
        b = kernels.reliability_sums_numba(conf, correct, edges, m)
        for x, y in zip(a, b):
            np.testing.assert_allclose(x, y, rtol=0, atol=1e-12)


@needs_numba
@pytest.mark.parametrize("use_true_q", [False, True])
def test_soft_ece_forward_backends_agree(use_true_q):
    rng = np.random.default_rng(7)
    for _ in range(25):
        n, k, m = int(rng.integers(1, 64)), int(rng.integers(2, 8)), int(rng.integers(1, 16))
        probs, labels = random_batch(rng, n, k)
        edges = kernels.bin_edges(m)
        a = kernels.soft_ece_forward_numpy(probs, labels, edges, 1e-6, use_true_q)
        b = kernels.soft_ece_forward_numba(probs, labels, edges, 1e-6, use_true_q)
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)


@needs_numba
@pytest.mark.parametrize("use_true_q", [False, True])
def test_soft_ece_backward_backends_agree(use_true_q):
    rng = np.random.default_rng(8)
    for _ in range(25):
        n, k, m = int(rng.integers(1, 64)), int(rng.integers(2, 8)), int(rng.integers(1, 16))
        probs, labels = random_batch(rng, n, k)
        edges = kernels.bin_edges(m)
        va, ga = kernels.soft_ece_backward_numpy(probs, labels, edges, 1e-6, use_true_q)
        vb, gb = kernels.soft_ece_backward_numba(probs, labels, edges, 1e-6, use_true_q)
        np.testing.assert_allclose(va, vb, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(ga, gb, rtol=1e-10, atol=1e-14)


def test_forward_is_finite_for_extreme_probabilities():
    # a max-probability within epsilon of 1 must not overflow the sigmoid
    probs = np.array([[1.0 - 1e-9, 1e-9], [0.5, 0.5]])
    labels = np.array([0, 1], dtype=np.int64)
    v = kernels.soft_ece_forward(probs, labels, kernels.bin_edges(10), 1e-6, False)
    assert np.isfinite(v)
    _, g = kernels.soft_ece_backward(probs, labels, kernels.bin_edges(10), 1e-6, False)
    assert np.all(np.isfinite(g))
