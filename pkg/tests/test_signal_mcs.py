import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from neurem.nn import rng_stream
from neurem.signal_mcs import (
    Band,
    CosetSampler,
    WidebandSignal,
    band_truth,
    measure,
    sensing_matrix,
    spectrum_of,
    synthesize_signal,
)
from neurem.experiments import random_band_plan


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_sampler_validation():
    with pytest.raises(ValueError):
        CosetSampler(8, 3, (0, 2), 4)
    with pytest.raises(ValueError):
        CosetSampler(8, 2, (3, 3), 4)
    with pytest.raises(ValueError):
        CosetSampler(8, 2, (0, 8), 4)
    with pytest.raises(ValueError):
        CosetSampler(8, 9, tuple(range(9)), 4)
    s = CosetSampler(8, 2, (1, 5), 4, bandwidth=2e9)
    assert s.nyquist_interval == pytest.approx(2.5e-10)


def test_random_cosets_sorted_distinct(rng):
    s = CosetSampler.random(40, 10, 16, rng)
    assert len(set(s.cosets)) == 10 and list(s.cosets) == sorted(s.cosets)


def test_empty_plan_gives_zero_signal(rng):
    s = CosetSampler(8, 3, (0, 1, 5), 4)
    assert not synthesize_signal([], s, rng).samples.any()


def test_single_band_energy_concentration(rng):
    s = CosetSampler(40, 10, tuple(range(0, 40, 4)), 16)
    x = synthesize_signal([Band(7, 8, -70.0)], s, rng)
    X = spectrum_of(x, 40, 16)
    e = np.sum(np.abs(X) ** 2, axis=1)
    assert e[7] / e.sum() >= 0.99


def test_band_power_is_planned_power(rng):
    s = CosetSampler(40, 10, tuple(range(10)), 16)
    x = synthesize_signal([Band(3, 5, -73.0)], s, rng)
    assert 10 * np.log10(np.mean(np.abs(x.samples) ** 2)) == pytest.approx(-73.0, abs=1e-9)


def test_three_band_threshold_count(rng):
    s = CosetSampler(40, 16, tuple(range(16)), 16)
    plan = random_band_plan(40, 3, rng)
    X = spectrum_of(synthesize_signal(plan, s, rng), 40, 16)
    p = np.sum(np.abs(X) ** 2, axis=1)
    assert np.sum(10 * np.log10(p / p.max() + 1e-300) > -20) == 3


def test_overlapping_bands_rejected(rng):
    s = CosetSampler(8, 3, (0, 1, 5), 4)
    with pytest.raises(ValueError):
        synthesize_signal([Band(1, 3, -70), Band(2, 4, -70)], s, rng)
    with pytest.raises(ValueError):
        synthesize_signal([Band(6, 9, -70)], s, rng)


def test_spectrum_of_examples(rng):
    assert not spectrum_of(np.zeros(12), 3, 4).any()
    X = spectrum_of(np.ones(12), 3, 4)
    assert X[0, 0] == pytest.approx(12) and np.count_nonzero(np.abs(X) > 1e-9) == 1
    with pytest.raises(ValueError):
        spectrum_of(np.zeros(11), 3, 4)


def test_spectrum_of_naive_dft_oracle(rng):
    L, N = 5, 4
    x = rng.standard_normal(L * N) + 1j * rng.standard_normal(L * N)
    naive = np.zeros((L, N), complex)
    for l in range(L):
        for n in range(N):
            k = l * N + n
            naive[l, n] = sum(x[t] * np.exp(-2j * np.pi * k * t / (L * N)) for t in range(L * N))
    X = spectrum_of(x, L, N)
    assert np.max(np.abs(X - naive)) < 1e-9 * np.max(np.abs(X))


def test_sensing_matrix_examples():
    A = sensing_matrix(CosetSampler(4, 2, (0, 1), 3))
    assert np.allclose(A[0], 1)
    assert np.allclose(A[1], [1, 1j, -1, -1j])
    A = sensing_matrix(CosetSampler(40, 16, tuple(range(0, 32, 2)), 16))
    assert A.shape == (16, 40) and np.allclose(np.abs(A), 1)


def test_full_coset_matrix_is_scaled_unitary():
    A = sensing_matrix(CosetSampler(12, 12, tuple(range(12)), 4))
    assert np.allclose(A @ A.conj().T, 12 * np.eye(12), atol=1e-10)


def test_zero_signal_measures_zero():
    s = CosetSampler(8, 3, (0, 1, 5), 4)
    assert not measure(WidebandSignal(np.zeros(32, complex), 8, 4), s).Y.any()


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), P=st.sampled_from([10, 16]), nb=st.integers(1, 4))
def test_model_consistency_property(seed, P, nb):
    rng = rng_stream(seed, 0)
    s = CosetSampler.random(40, P, 16, rng)
    x = synthesize_signal(random_band_plan(40, nb, rng), s, rng)
    m = measure(x, s)
    assert rel(m.Y, m.gain * m.A @ spectrum_of(x, 40, 16)) < 1e-9


def test_measure_on_arbitrary_signal(rng):
    # consistency does not depend on band-limited structure
    s = CosetSampler(6, 4, (0, 2, 3, 5), 5)
    x = rng.standard_normal(30) + 1j * rng.standard_normal(30)
    m = measure(x, s)
    assert rel(m.Y, m.gain * m.A @ spectrum_of(x, 6, 5)) < 1e-12


def test_single_row_measurement_is_rank_one(rng):
    s = CosetSampler(8, 4, (0, 3, 4, 6), 6)
    X = np.zeros((8, 6), complex)
    X[5] = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    x = np.fft.ifft(X.reshape(-1))
    m = measure(x, s)
    assert np.allclose(m.Y, m.gain * np.outer(m.A[:, 5], X[5]), atol=1e-20)
    assert np.linalg.matrix_rank(m.Y / np.abs(m.Y).max()) == 1


def test_realized_snr(rng):
    s = CosetSampler(40, 10, tuple(range(0, 40, 4)), 16)
    ratios = []
    for t in range(1000):
        r = rng_stream(9, t)
        x = synthesize_signal(random_band_plan(40, 3, r), s, r)
        clean = measure(x, s).Y
        noisy = measure(x, s, 10.0, r).Y
        ratios.append(np.mean(np.abs(clean) ** 2) / np.mean(np.abs(noisy - clean) ** 2))
    assert abs(10 * np.log10(np.mean(ratios)) - 10.0) < 0.2


def test_noisy_measure_requires_rng():
    s = CosetSampler(8, 3, (0, 1, 5), 4)
    with pytest.raises(ValueError):
        measure(np.ones(32), s, 10.0)


def test_band_truth():
    occ = band_truth([Band(1, 3, -70), Band(5, 6, -72)], 8)
    assert occ.tolist() == [False, True, True, False, False, True, False, False]
