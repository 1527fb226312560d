"""Multiband test signals and multi-coset sub-Nyquist sampling.

Indices are 0-based throughout.  With ``x[m] = x(m T)`` for ``m < L N``:

* spectrum matrix ``X[l, n] = F[l N + n]`` where ``F`` is the ``L N``-point DFT,
  so row ``l`` is sub-band ``l`` of width ``B / L`` counted from DC;
* coset stream ``x_r[i] = x[i L + c_r]``;
* measurement ``Y[r, n] = L T exp(-2j pi c_r n / (L N)) sum_i x_r[i] exp(-2j pi n i / N)``;
* sensing matrix ``A[r, l] = exp(2j pi c_r l / L)``.

These satisfy ``Y = T * A @ X`` exactly in the noiseless case; ``T`` is stored
as :attr:`Measurement.gain`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Band",
    "CosetSampler",
    "WidebandSignal",
    "Measurement",
    "synthesize_signal",
    "spectrum_of",
    "sensing_matrix",
    "measure",
    "band_truth",
]


@dataclass(frozen=True)
class Band:
    """Occupied sub-bands ``start <= l < end`` carrying ``power_dbm`` in total."""

    start: int
    end: int
    power_dbm: float

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid band [{self.start}, {self.end})")


@dataclass(frozen=True)
class CosetSampler:
    L: int
    P: int
    cosets: tuple[int, ...]
    N: int
    bandwidth: float = 2e9

    def __post_init__(self):
        object.__setattr__(self, "cosets", tuple(int(c) for c in self.cosets))
        if self.L < 1 or self.N < 1:
            raise ValueError("L and N must be positive")
        if not 1 <= self.P <= self.L:
            raise ValueError(f"need 1 <= P <= L, got P={self.P}, L={self.L}")
        if len(self.cosets) != self.P:
            raise ValueError(f"expected {self.P} cosets, got {len(self.cosets)}")
        if any(c < 0 or c >= self.L for c in self.cosets):
            raise ValueError(f"coset offsets must lie in [0, {self.L})")
        if any(b <= a for a, b in zip(self.cosets, self.cosets[1:])):
            raise ValueError("coset offsets must be distinct and increasing")

    @property
    def nyquist_interval(self) -> float:
        return 1.0 / (2.0 * self.bandwidth)

    @classmethod
    def random(cls, L: int, P: int, N: int, rng, bandwidth: float = 2e9) -> "CosetSampler":
        cosets = np.sort(rng.choice(L, size=P, replace=False))
        return cls(L, P, tuple(int(c) for c in cosets), N, bandwidth)


@dataclass
class WidebandSignal:
    samples: np.ndarray
    L: int
    N: int
    bandwidth: float = 2e9
    band_plan: list[Band] = field(default_factory=list)

    def __post_init__(self):
        if self.samples.shape != (self.L * self.N,):
            raise ValueError(f"signal must have L*N={self.L * self.N} samples")
        for b in self.band_plan:
            if b.end > self.L:
                raise ValueError(f"band {b} exceeds L={self.L}")


@dataclass
class Measurement:
    Y: np.ndarray
    A: np.ndarray
    gain: float = 1.0
    snr_db: float | None = None
    sampler: CosetSampler | None = None


def _check_plan(band_plan, L: int) -> list[Band]:
    bands = sorted(band_plan, key=lambda b: b.start)
    for b in bands:
        if b.end > L:
            raise ValueError(f"band {b} exceeds L={L}")
    for a, b in zip(bands, bands[1:]):
        if b.start < a.end:
            raise ValueError(f"bands {a} and {b} overlap")
    return bands


def synthesize_signal(band_plan, sampler: CosetSampler, rng) -> WidebandSignal:
    """Complex baseband signal with flat, random-phase spectrum in each band.

    Each band's mean time-domain power equals ``10**(power_dbm/10)`` (mW).
    """
    L, N = sampler.L, sampler.N
    bands = _check_plan(band_plan, L)
    spec = np.zeros(L * N, dtype=np.complex128)
    for b in bands:
        k = np.arange(b.start * N, b.end * N)
        power = 10.0 ** (b.power_dbm / 10.0)
        amp = L * N * np.sqrt(power / k.size)
        spec[k] = amp * np.exp(2j * np.pi * rng.random(k.size))
    x = np.fft.ifft(spec)
    return WidebandSignal(x, L, N, sampler.bandwidth, list(bands))


def spectrum_of(x, L: int, N: int) -> np.ndarray:
    samples = x.samples if isinstance(x, WidebandSignal) else np.asarray(x)
    if samples.shape != (L * N,):
        raise ValueError(f"signal length {samples.shape} != L*N = {L * N}")
    return np.fft.fft(samples).reshape(L, N)


def sensing_matrix(sampler: CosetSampler) -> np.ndarray:
    c = np.asarray(sampler.cosets, dtype=np.float64)[:, None]
    l = np.arange(sampler.L)[None, :]
    return np.exp(2j * np.pi * c * l / sampler.L)


def measure(x: WidebandSignal, sampler: CosetSampler, snr_db: float | None = None,
            rng=None) -> Measurement:
    """Multi-coset sampling followed by the per-coset DFT and phase correction.

    When ``snr_db`` is given, circular complex Gaussian noise is added to ``Y``
    with variance ``mean(|Y|^2) / 10**(snr_db/10)``.
    """
    L, N = sampler.L, sampler.N
    samples = x.samples if isinstance(x, WidebandSignal) else np.asarray(x)
    if samples.shape != (L * N,):
        raise ValueError(f"signal length {samples.shape} != L*N = {L * N}")
    if any(c < 0 or c >= L for c in sampler.cosets):
        raise ValueError("coset index out of range")
    T = sampler.nyquist_interval
    c = np.asarray(sampler.cosets)
    streams = samples.reshape(N, L).T[c]          # streams[r, i] = x[i L + c_r]
    n = np.arange(N)
    phase = np.exp(-2j * np.pi * np.outer(c, n) / (L * N))
    Y = L * T * phase * np.fft.fft(streams, axis=1)
    if snr_db is not None:
        if rng is None:
            raise ValueError("a noisy measurement needs an rng")
        sig = np.mean(np.abs(Y) ** 2)
        var = sig / 10.0 ** (snr_db / 10.0)
        noise = rng.standard_normal(Y.shape) + 1j * rng.standard_normal(Y.shape)
        Y = Y + np.sqrt(var / 2.0) * noise
    return Measurement(Y, sensing_matrix(sampler), T, snr_db, sampler)


def band_truth(band_plan, L: int) -> np.ndarray:
    """Boolean occupancy vector of length ``L``."""
    occ = np.zeros(L, dtype=bool)
    for b in band_plan:
        occ[b.start:b.end] = True
    return occ
