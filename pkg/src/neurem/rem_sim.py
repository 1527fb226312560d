"""Synthetic 3-D / 4-D radio environment maps and sparse sensor masks.

Grid convention: a 3-D map has shape ``(I, J, K)`` where ``(i, j)`` is the
horizontal position and ``k`` the height index, ``k = 0`` being the top
(highest, least shadowed) slice.  A 4-D map stacks ``N_f`` such maps along a
leading frequency axis.

Each beam contributes ``10**(peak/10) * max(d, 1)**(-gamma) * 10**(v/10)`` mW,
where ``d`` is the horizontal distance (in cells) to the beam centre and ``v``
is a zero-mean Gaussian shadowing field with covariance
``sigma_k**2 * exp(-dist / X_c)``.  Beams in the same frequency bin add in
linear power.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .nn import rng_stream

log = logging.getLogger(__name__)

__all__ = [
    "BeamSpec",
    "ShadowSpec",
    "SampleMask",
    "Rem4D",
    "gaussian_field",
    "slice_sigmas",
    "generate_rem",
    "sample_mask",
    "project",
]

# eigenvalues of the circulant embedding below -tol * max are reported
_EMBED_TOL = 1e-8


@dataclass(frozen=True)
class BeamSpec:
    center: tuple[float, float]
    gamma: float = 2.0
    peak_rss_dbm: float = -70.0
    band_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != 2:
            raise ValueError("beam centre needs two grid coordinates")
        if self.gamma <= 0:
            raise ValueError("path-loss exponent must be positive")


@dataclass(frozen=True)
class ShadowSpec:
    """Shadowing strength per slice, linear from top (k=0) to bottom (k=K-1).

    ``vertical_corr`` is the correlation between the shadowing patterns of
    different slices (the same obstacles shadow every height).
    """

    sigma_top: float = 2.0
    sigma_bottom: float = 8.0
    decorrelation: float = 5.0
    vertical_corr: float = 0.8

    def __post_init__(self):
        if self.sigma_top < 0 or self.sigma_bottom < 0:
            raise ValueError("shadowing std-dev must be non-negative")
        if self.decorrelation <= 0:
            raise ValueError("decorrelation distance must be positive")
        if not 0.0 <= self.vertical_corr <= 1.0:
            raise ValueError("vertical_corr must lie in [0, 1]")


@dataclass
class SampleMask:
    indices: np.ndarray          # (n, 3) int, lexicographically sorted
    dims: tuple[int, int, int]

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.indices = np.asarray(self.indices, dtype=np.int64).reshape(-1, 3)
        if len(self.indices):
            if np.any(self.indices < 0) or np.any(self.indices >= np.array(self.dims)):
                raise ValueError("mask index out of range")
            flat = np.ravel_multi_index(self.indices.T, self.dims)
            if np.any(np.diff(flat) <= 0):
                raise ValueError("mask indices must be unique and sorted")

    def __len__(self) -> int:
        return len(self.indices)

    def boolean(self) -> np.ndarray:
        b = np.zeros(self.dims, dtype=bool)
        if len(self.indices):
            b[tuple(self.indices.T)] = True
        return b

    @classmethod
    def from_boolean(cls, b: np.ndarray) -> "SampleMask":
        return cls(np.argwhere(b), b.shape)


@dataclass
class Rem4D:
    values: np.ndarray            # (N_f, I, J, K) dBm
    band_indices: list[int] = field(default_factory=list)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(self.values.shape[1:])


def gaussian_field(shape, sigma: float, decorrelation: float, rng) -> np.ndarray:
    """Stationary zero-mean field with covariance ``sigma**2 exp(-d / decorrelation)``.

    Circulant embedding on the doubled periodic grid.  Negative embedding
    eigenvalues are clamped to zero (with a warning when they are not
    round-off).
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if decorrelation <= 0:
        raise ValueError("decorrelation distance must be positive")
    n1, n2 = (int(s) for s in shape)
    if sigma == 0:
        return np.zeros((n1, n2))
    m1, m2 = 2 * n1, 2 * n2
    d1 = np.minimum(np.arange(m1), m1 - np.arange(m1))[:, None]
    d2 = np.minimum(np.arange(m2), m2 - np.arange(m2))[None, :]
    cov = np.exp(-np.sqrt(d1 ** 2 + d2 ** 2) / decorrelation)
    lam = np.real(np.fft.fft2(cov))
    if lam.min() < -_EMBED_TOL * lam.max():
        log.warning("circulant embedding not positive semi-definite "
                    "(min eigenvalue %.3g); clamping", lam.min())
    lam = np.clip(lam, 0.0, None)
    eps = rng.standard_normal((m1, m2)) + 1j * rng.standard_normal((m1, m2))
    f = np.fft.fft2(np.sqrt(lam / (m1 * m2)) * eps)
    return sigma * np.real(f[:n1, :n2])


def slice_sigmas(shadow: ShadowSpec, K: int) -> np.ndarray:
    if K == 1:
        return np.array([shadow.sigma_top])
    return np.linspace(shadow.sigma_top, shadow.sigma_bottom, K)


def _beam_fields(shadow: ShadowSpec, dims, rng) -> np.ndarray:
    """Unit-variance shadowing patterns for one beam, shape ``(I, J, K)``."""
    I, J, K = dims
    rho = shadow.vertical_corr
    common = gaussian_field((I, J), 1.0, shadow.decorrelation, rng)
    out = np.empty((I, J, K))
    for k in range(K):
        own = gaussian_field((I, J), 1.0, shadow.decorrelation, rng)
        out[:, :, k] = rho * common + np.sqrt(1.0 - rho * rho) * own
    return out


def generate_rem(beams, shadow: ShadowSpec, dims, seed: int = 0) -> Rem4D:
    """Ground-truth map stacked over the distinct beam frequency bins.

    Every beam draws its shadowing from its own seeded substream, so maps are
    reproducible per ``seed`` regardless of evaluation order.
    """
    beams = list(beams)
    if not beams:
        raise ValueError("at least one beam is required")
    I, J, K = (int(d) for d in dims)
    for b in beams:
        if not (0 <= b.center[0] <= I - 1 and 0 <= b.center[1] <= J - 1):
            raise ValueError(f"beam centre {b.center} outside the {I}x{J} grid")
    bins = sorted({b.band_index for b in beams})
    sig = slice_sigmas(shadow, K)
    ii, jj = np.meshgrid(np.arange(I), np.arange(J), indexing="ij")
    linear = np.zeros((len(bins), I, J, K))
    for r, b in enumerate(beams):
        d = np.hypot(ii - b.center[0], jj - b.center[1])
        d = np.maximum(d, 1.0)              # singularity guard at the centre
        path = 10.0 ** (b.peak_rss_dbm / 10.0) * d ** (-b.gamma)
        v = _beam_fields(shadow, (I, J, K), rng_stream(seed, r)) * sig
        linear[bins.index(b.band_index)] += path[:, :, None] * 10.0 ** (v / 10.0)
    return Rem4D(10.0 * np.log10(linear), bins)


def sample_mask(dims, missing_rate: float, rng) -> SampleMask:
    if not 0.0 <= missing_rate < 1.0:
        raise ValueError("missing rate must lie in [0, 1)")
    dims = tuple(int(d) for d in dims)
    total = int(np.prod(dims))
    count = int(round((1.0 - missing_rate) * total))
    flat = np.sort(rng.choice(total, size=count, replace=False))
    return SampleMask(np.stack(np.unravel_index(flat, dims), axis=1), dims)


def project(t: np.ndarray, mask: SampleMask) -> np.ndarray:
    """Keep observed entries, zero the rest."""
    t = np.asarray(t)
    if t.shape != mask.dims:
        raise ValueError(f"tensor dims {t.shape} != mask dims {mask.dims}")
    return np.where(mask.boolean(), t, 0.0)
