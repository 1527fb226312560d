"""Reconstruction quality metrics: MSE/NMSE, PSNR, SSIM, SVD cumulative energy."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "mse",
    "nmse",
    "psnr",
    "ssim",
    "cumulative_energy",
    "spectrum_mse",
    "QualityReport",
    "quality_report",
]

SSIM_WINDOW = 8
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _same_shape(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    a, b = _same_shape(a, b)
    return float(np.mean((a - b) ** 2))


def nmse(a, b) -> float:
    """``mse(a, b) / mean(b**2)``; ``b`` is the reference."""
    a, b = _same_shape(a, b)
    return mse(a, b) / float(np.mean(b ** 2))


def psnr(recon, truth) -> float:
    """PSNR in dB with the peak taken as the dynamic range of ``truth``.

    Returns ``inf`` for a perfect reconstruction.
    """
    recon, truth = _same_shape(recon, truth)
    dr = float(truth.max() - truth.min())
    if dr == 0:
        raise ValueError("PSNR undefined for a constant reference")
    err = mse(recon, truth)
    if err == 0:
        return math.inf
    return 10.0 * math.log10(dr * dr / err)


def _ssim_2d(x, y, c1, c2):
    wx = sliding_window_view(x, (SSIM_WINDOW, SSIM_WINDOW))
    wy = sliding_window_view(y, (SSIM_WINDOW, SSIM_WINDOW))
    mx = wx.mean(axis=(-2, -1))
    my = wy.mean(axis=(-2, -1))
    dx = wx - mx[..., None, None]
    dy = wy - my[..., None, None]
    # population (biased) moments; identical inputs give exactly 1
    vx = (dx * dx).mean(axis=(-2, -1))
    vy = (dy * dy).mean(axis=(-2, -1))
    cxy = (dx * dy).mean(axis=(-2, -1))
    # luminance and structure ratios kept apart: their products underflow for
    # tiny data ranges.  A 0/0 ratio only arises for two all-zero windows.
    num1, den1 = 2 * mx * my + c1, mx ** 2 + my ** 2 + c1
    num2, den2 = 2 * cxy + c2, vx + vy + c2
    with np.errstate(invalid="ignore", divide="ignore"):
        lum = np.where(den1 > 0, num1 / den1, 1.0)
        struct = np.where(den2 > 0, num2 / den2, 1.0)
    return float(np.mean(lum * struct))


def ssim(recon, truth, data_range: float | None = None) -> float:
    """Mean SSIM over all 8x8 windows (stride 1).

    3-way inputs are scored as the mean over horizontal slices ``[:, :, k]``.
    ``data_range`` defaults to ``max(truth) - min(truth)``.
    """
    recon, truth = _same_shape(recon, truth)
    if truth.ndim not in (2, 3):
        raise ValueError("ssim expects a 2-D slice or a 3-way tensor")
    if truth.shape[0] < SSIM_WINDOW or truth.shape[1] < SSIM_WINDOW:
        raise ValueError(f"slice smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    if data_range is None:
        data_range = float(truth.max() - truth.min())
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    if c1 == 0 and np.array_equal(recon, truth):
        return 1.0
    if truth.ndim == 2:
        return _ssim_2d(recon, truth, c1, c2)
    return float(np.mean([_ssim_2d(recon[:, :, k], truth[:, :, k], c1, c2)
                          for k in range(truth.shape[2])]))


def cumulative_energy(singular_values) -> np.ndarray:
    """Partial-sum ratios ``T_i = sum_{k<=i} s_k / sum_k s_k``."""
    s = np.asarray(singular_values, dtype=np.float64)
    total = s.sum()
    if total <= 0:
        raise ValueError("singular values are all zero")
    return np.cumsum(s) / total


def spectrum_mse(X_hat, X_true) -> float:
    """MSE between per-sub-band power spectra, both scaled by the true total power.

    Row powers ``p[l] = sum_n |X[l, n]|^2`` are divided by ``sum_l p_true[l]``
    so the figure is independent of absolute units.
    """
    p_hat = np.sum(np.abs(np.asarray(X_hat)) ** 2, axis=1)
    p_true = np.sum(np.abs(np.asarray(X_true)) ** 2, axis=1)
    if p_hat.shape != p_true.shape:
        raise ValueError("spectrum shapes differ")
    total = p_true.sum()
    if total == 0:
        raise ValueError("true spectrum is empty")
    return float(np.mean((p_hat / total - p_true / total) ** 2))


@dataclass
class QualityReport:
    mse: float
    nmse: float
    psnr_db: float
    ssim: float
    slices: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        def clean(v):
            return None if isinstance(v, float) and math.isinf(v) else v

        d = asdict(self)
        d["psnr_db"] = clean(d["psnr_db"])
        for s in d["slices"]:
            s["psnr_db"] = clean(s["psnr_db"])
        return json.dumps(d, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["slice", "mse", "nmse", "psnr_db", "ssim"])
        w.writerow(["all", self.mse, self.nmse, self.psnr_db, self.ssim])
        for s in self.slices:
            w.writerow([s["slice"], s["mse"], s["nmse"], s["psnr_db"], s["ssim"]])
        return buf.getvalue()


def quality_report(recon, truth) -> QualityReport:
    """Whole-tensor metrics plus a per-horizontal-slice breakdown (1-based slice ids)."""
    recon, truth = _same_shape(recon, truth)
    dr = float(truth.max() - truth.min())
    slices = []
    for k in range(truth.shape[2]):
        r, t = recon[:, :, k], truth[:, :, k]
        slices.append({
            "slice": k + 1,
            "mse": mse(r, t),
            "nmse": nmse(r, t),
            "psnr_db": psnr(r, t) if t.max() > t.min() else math.nan,
            "ssim": ssim(r, t, data_range=dr),
        })
    return QualityReport(mse(recon, truth), nmse(recon, truth), psnr(recon, truth),
                         ssim(recon, truth), slices)
