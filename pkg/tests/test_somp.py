import numpy as np
import pytest

from neurem.experiments import random_band_plan
from neurem.nn import rng_stream
from neurem.signal_mcs import (
    CosetSampler,
    Measurement,
    band_truth,
    measure,
    sensing_matrix,
    synthesize_signal,
)
from neurem.somp import somp


def one_row_measurement(row, rng, P=16, L=40, N=16):
    s = CosetSampler.random(L, P, N, rng)
    A = sensing_matrix(s)
    X = np.zeros((L, N), complex)
    X[row] = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    return Measurement(A @ X, A, 1.0, None, s), X


def test_single_row_exact_recovery():
    for seed in range(10):
        rng = rng_stream(seed, 0)
        row = int(rng.integers(40))
        m, X = one_row_measurement(row, rng)
        r = somp(m, 1)
        assert r.support == [row]
        assert r.residual_norm < 1e-9
        assert np.allclose(r.X_hat, X, atol=1e-9)


def test_three_band_support_at_p16():
    for seed in range(10):
        rng = rng_stream(seed, 1)
        s = CosetSampler.random(40, 16, 16, rng)
        plan = random_band_plan(40, 3, rng)
        m = measure(synthesize_signal(plan, s, rng), s)
        r = somp(m, 3)
        assert sorted(r.support) == np.flatnonzero(band_truth(plan, 40)).tolist()


def test_zero_measurement():
    A = sensing_matrix(CosetSampler(8, 4, (0, 1, 4, 6), 3))
    for k in (1, 2, 4):
        r = somp(Measurement(np.zeros((4, 3), complex), A), k)
        assert r.residual_norm == 0 and not r.X_hat.any() and len(r.support) == k


def test_sparsity_bounds():
    A = sensing_matrix(CosetSampler(8, 4, (0, 1, 4, 6), 3))
    m = Measurement(np.ones((4, 3), complex), A)
    for k in (0, 5):
        with pytest.raises(ValueError):
            somp(m, k)


def test_residual_monotone_and_ls_orthogonality(rng):
    s = CosetSampler.random(40, 10, 16, rng)
    A = sensing_matrix(s)
    Y = rng.standard_normal((10, 16)) + 1j * rng.standard_normal((10, 16))
    r = somp(Measurement(Y, A, 0.25), 6)
    h = r.residual_history
    assert all(b <= a + 1e-12 for a, b in zip(h, h[1:]))
    assert len(set(r.support)) == 6
    outside = np.setdiff1d(np.arange(40), r.support)
    assert not r.X_hat[outside].any()
    As = A[:, r.support]
    R = Y - 0.25 * A @ r.X_hat
    assert np.max(np.abs(As.conj().T @ R)) < 1e-10 * np.linalg.norm(Y)
