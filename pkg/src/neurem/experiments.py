"""Seeded Monte-Carlo spectrum-sensing trials shared by the CLI and the test suite."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .metrics import spectrum_mse
from .neural_cs import NcsConfig, auc, ncs_solve, power_spectrum, roc_curve
from .nn import derive_seed, rng_stream
from .signal_mcs import (
    Band,
    CosetSampler,
    Measurement,
    band_truth,
    measure,
    spectrum_of,
    synthesize_signal,
)
from .somp import somp

__all__ = [
    "SpectrumScenario",
    "SpectrumTrial",
    "TrialOutcome",
    "random_band_plan",
    "make_trial",
    "run_trial",
    "run_trials",
    "summarize",
]


@dataclass(frozen=True)
class SpectrumScenario:
    L: int = 40
    P: int = 16
    N: int = 16
    snr_db: float | None = 20.0
    n_bands: int = 3
    power_range_dbm: tuple[float, float] = (-76.0, -70.0)
    cosets: tuple[int, ...] | None = None      # None: drawn per trial
    threshold_db: float = -20.0

    def __post_init__(self):
        if self.P >= self.L:
            raise ValueError(f"sub-Nyquist sampling needs P < L (got P={self.P}, L={self.L})")
        if not 1 <= self.n_bands <= self.L:
            raise ValueError("n_bands must lie in [1, L]")
        lo, hi = self.power_range_dbm
        if lo > hi:
            raise ValueError("power range must be (low, high)")


@dataclass
class SpectrumTrial:
    plan: list[Band]
    X: np.ndarray
    measurement: Measurement

    @property
    def truth(self) -> np.ndarray:
        return band_truth(self.plan, self.X.shape[0])


@dataclass
class TrialOutcome:
    truth: np.ndarray
    ncs_power_db: np.ndarray
    ncs_detected: bool
    ncs_mse: float
    somp_power_db: np.ndarray | None = None
    somp_detected: bool | None = None
    somp_mse: float | None = None
    X_ncs: np.ndarray | None = None
    X_somp: np.ndarray | None = None


def random_band_plan(L: int, n_bands: int, rng, power_range=(-76.0, -70.0)) -> list[Band]:
    """``n_bands`` distinct single sub-band occupants with uniform random powers."""
    pos = np.sort(rng.choice(L, size=n_bands, replace=False))
    return [Band(int(p), int(p) + 1, float(rng.uniform(*power_range))) for p in pos]


def make_trial(sc: SpectrumScenario, seed: int, trial: int) -> SpectrumTrial:
    rng = rng_stream(seed, trial + 1)
    if sc.cosets is None:
        sampler = CosetSampler.random(sc.L, sc.P, sc.N, rng)
    else:
        sampler = CosetSampler(sc.L, sc.P, sc.cosets, sc.N)
    plan = random_band_plan(sc.L, sc.n_bands, rng, sc.power_range_dbm)
    x = synthesize_signal(plan, sampler, rng)
    m = measure(x, sampler, sc.snr_db, rng if sc.snr_db is not None else None)
    return SpectrumTrial(plan, spectrum_of(x, sc.L, sc.N), m)


def run_trial(sc: SpectrumScenario, cfg: NcsConfig, seed: int, trial: int,
              baseline: bool = True, keep_spectra: bool = False) -> TrialOutcome:
    t = make_trial(sc, seed, trial)
    truth = t.truth
    res = ncs_solve(t.measurement, replace(cfg, seed=derive_seed(seed, 0, trial)))
    ps = power_spectrum(res.X, sc.threshold_db)
    out = TrialOutcome(truth, ps.power_db, bool(np.array_equal(ps.occupied, truth)),
                       spectrum_mse(res.X, t.X))
    if keep_spectra:
        out.X_ncs = res.X
    if baseline:
        so = somp(t.measurement, sc.n_bands)
        pb = power_spectrum(so.X_hat, sc.threshold_db)
        out.somp_power_db = pb.power_db
        out.somp_detected = bool(np.array_equal(pb.occupied, truth))
        out.somp_mse = spectrum_mse(so.X_hat, t.X)
        if keep_spectra:
            out.X_somp = so.X_hat
    return out


def _run_one(args):
    return run_trial(*args)


def run_trials(sc: SpectrumScenario, cfg: NcsConfig, seed: int, n_trials: int,
               baseline: bool = True, jobs: int = 1, keep_spectra: bool = False
               ) -> list[TrialOutcome]:
    """Run trials ``0 .. n_trials-1``; results are independent of ``jobs``."""
    args = [(sc, cfg, seed, i, baseline, keep_spectra) for i in range(n_trials)]
    jobs = max(1, min(int(jobs), n_trials, os.cpu_count() or 1))
    if jobs == 1:
        return [_run_one(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, args))


def _scores(db):
    # -inf powers (all-zero reconstructions) rank below everything else
    return np.where(np.isfinite(db), db, -1e300)


def summarize(outcomes: list[TrialOutcome]) -> dict:
    s = {
        "trials": len(outcomes),
        "ncs_detected": sum(o.ncs_detected for o in outcomes),
        "ncs_mse": float(np.mean([o.ncs_mse for o in outcomes])),
        "ncs_auc": auc(roc_curve([(_scores(o.ncs_power_db), o.truth) for o in outcomes])),
    }
    if outcomes and outcomes[0].somp_mse is not None:
        s["somp_detected"] = sum(o.somp_detected for o in outcomes)
        s["somp_mse"] = float(np.mean([o.somp_mse for o in outcomes]))
        s["somp_auc"] = auc(roc_curve([(_scores(o.somp_power_db), o.truth) for o in outcomes]))
    return s
