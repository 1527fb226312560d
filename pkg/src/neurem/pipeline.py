"""The four pipeline stages and their on-disk layout.

Run directory::

    manifest.json                 config + seed + version (loadable as --config)
    simulate/  truth.drmt observed.drmt mask.drmt mask.csv bins.csv band_plans.csv
    spectrum/  trials.csv summary.json roc_ncs.csv [roc_somp.csv]
               trial_NNNN/{X_ncs.drmt, power_ncs.csv[, X_somp.drmt, power_somp.csv]}
    complete/  recon.drmt loss_bin{f}.csv quality_bin{f}.json quality_bin{f}.csv
    report/    summary.csv heatmaps/bin{f}_slice{k}_{truth,recon}.ppm

4-way tensors are stacked ``(N_f, I, J, K)``.  Every stage is a pure function
of the config and seed, so re-running a manifest reproduces the DRMT files
bit for bit, whatever ``jobs`` is.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from importlib import metadata
from pathlib import Path

import numpy as np

from .config import ConfigError, PipelineConfig
from .experiments import make_trial, run_trials, summarize
from .metrics import quality_report
from .neural_cs import NumericalAbort, roc_curve
from .neural_td import ntd_solve
from .nn import derive_seed, rng_stream
from .rem_sim import SampleMask, generate_rem, project, sample_mask
from .tensor_core import read_tensor, write_tensor

__all__ = [
    "StageAbort",
    "artifact_version",
    "write_manifest",
    "simulate",
    "spectrum",
    "complete",
    "report",
    "run_pipeline",
    "write_ppm",
    "heat_colors",
]

# seed sub-streams
_REM, _MASK, _NTD = 1, 2, 3


class StageAbort(RuntimeError):
    """A solver aborted; ``history_path`` holds the loss history written to disk."""

    def __init__(self, message: str, history_path: Path):
        super().__init__(message)
        self.history_path = history_path


def artifact_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0.0.0"


def write_manifest(cfg: PipelineConfig, path: Path, command: str) -> None:
    doc = {"version": artifact_version(), "command": command, "seed": cfg.seed,
           "config": cfg.to_dict()}
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _abort(exc: NumericalAbort, where: Path, label: str) -> StageAbort:
    where.mkdir(parents=True, exist_ok=True)
    path = where / f"abort_loss_{label}.csv"
    _write_csv(path, ["iteration", "loss"], enumerate(exc.history))
    return StageAbort(f"{label}: {exc}", path)


# --- simulate ---------------------------------------------------------------

def simulate(cfg: PipelineConfig, out: Path) -> None:
    sc = cfg.scenario
    rem = generate_rem(sc.beams, sc.shadow, sc.dims, seed=derive_seed(cfg.seed, _REM))
    mask = sample_mask(sc.dims, sc.missing_rate, rng_stream(derive_seed(cfg.seed, _MASK), 0))
    d = out / "simulate"
    d.mkdir(parents=True, exist_ok=True)
    write_tensor(rem.values, d / "truth.drmt")
    write_tensor(np.stack([project(v, mask) for v in rem.values]), d / "observed.drmt")
    write_tensor(mask.boolean().astype(np.float64), d / "mask.drmt")
    _write_csv(d / "mask.csv", ["i", "j", "k"], mask.indices.tolist())
    _write_csv(d / "bins.csv", ["bin", "band_index"], enumerate(rem.band_indices))
    rows = []
    for t in range(cfg.trials):
        for b in make_trial(cfg.sampler, cfg.seed, t).plan:
            rows.append([t, b.start, b.end, repr(b.power_dbm)])
    _write_csv(d / "band_plans.csv", ["trial", "start", "end", "power_dbm"], rows)
    write_manifest(cfg, d / "manifest.json", "simulate")


# --- spectrum --------------------------------------------------------------

def _power_rows(db, occ):
    return [[l, repr(float(p)), int(o)] for l, (p, o) in enumerate(zip(db, occ))]


def spectrum(cfg: PipelineConfig, out: Path, jobs: int = 1) -> dict:
    base = cfg.baseline == "somp"
    d = out / "spectrum"
    try:
        outcomes = run_trials(cfg.sampler, cfg.ncs, cfg.seed, cfg.trials, baseline=base,
                              jobs=jobs, keep_spectra=True)
    except NumericalAbort as exc:
        raise _abort(exc, d, "ncs") from exc
    d.mkdir(parents=True, exist_ok=True)
    thr = cfg.sampler.threshold_db
    rows = []
    for t, o in enumerate(outcomes):
        td = d / f"trial_{t:04d}"
        td.mkdir(exist_ok=True)
        write_tensor(o.X_ncs, td / "X_ncs.drmt")
        header = ["band_index", "power_db", "occupied"]
        _write_csv(td / "power_ncs.csv", header, _power_rows(o.ncs_power_db, o.ncs_power_db > thr))
        row = [t, int(o.ncs_detected), repr(o.ncs_mse)]
        if base:
            write_tensor(o.X_somp, td / "X_somp.drmt")
            _write_csv(td / "power_somp.csv", header,
                       _power_rows(o.somp_power_db, o.somp_power_db > thr))
            row += [int(o.somp_detected), repr(o.somp_mse)]
        rows.append(row)
    header = ["trial", "ncs_detected", "ncs_mse"] + (["somp_detected", "somp_mse"] if base else [])
    _write_csv(d / "trials.csv", header, rows)
    s = summarize(outcomes)
    _write_csv(d / "roc_ncs.csv", ["fpr", "tpr"],
               roc_curve([(_finite(o.ncs_power_db), o.truth) for o in outcomes]))
    if base:
        _write_csv(d / "roc_somp.csv", ["fpr", "tpr"],
                   roc_curve([(_finite(o.somp_power_db), o.truth) for o in outcomes]))
    (d / "summary.json").write_text(json.dumps(s, indent=2) + "\n", encoding="utf-8")
    write_manifest(cfg, d / "manifest.json", "spectrum")
    return s


def _finite(db):
    return np.where(np.isfinite(db), db, -1e300)


# --- complete --------------------------------------------------------------

def _load_simulation(cfg: PipelineConfig, out: Path):
    d = out / "simulate"
    need = [d / n for n in ("truth.drmt", "observed.drmt", "mask.drmt")]
    missing = [p.name for p in need if not p.exists()]
    if missing:
        raise ConfigError(f"{d} is missing {missing}; run 'simulate' first")
    truth, observed, mask = (read_tensor(p) for p in need)
    if observed.shape != truth.shape or observed.ndim != 4:
        raise ConfigError(f"observed tensor dims {observed.shape} != truth dims {truth.shape}")
    if mask.shape != truth.shape[1:]:
        raise ConfigError(f"mask dims {mask.shape} != tensor dims {truth.shape[1:]}")
    try:
        cfg.ntd.check_dims(mask.shape)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return truth, observed, SampleMask.from_boolean(mask != 0)


def _complete_bin(args):
    observed, mask, ntd_cfg = args
    return ntd_solve(observed, mask, ntd_cfg)


def complete(cfg: PipelineConfig, out: Path, jobs: int = 1) -> list:
    truth, observed, mask = _load_simulation(cfg, out)
    d = out / "complete"
    n_f = truth.shape[0]
    tasks = [(observed[f], mask, replace(cfg.ntd, seed=derive_seed(cfg.seed, _NTD, f)))
             for f in range(n_f)]
    jobs = max(1, min(jobs, n_f, os.cpu_count() or 1))
    try:
        if jobs == 1:
            results = [_complete_bin(t) for t in tasks]
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_complete_bin, tasks))
    except NumericalAbort as exc:
        raise _abort(exc, d, "ntd") from exc
    d.mkdir(parents=True, exist_ok=True)
    write_tensor(np.stack([r.tensor for r in results]), d / "recon.drmt")
    reports = []
    for f, r in enumerate(results):
        _write_csv(d / f"loss_bin{f}.csv", ["iteration", "loss"],
                   [[i, repr(v)] for i, v in enumerate(r.history)])
        q = quality_report(r.tensor, truth[f])
        doc = json.loads(q.to_json())
        doc["showcase"] = [s for s in doc["slices"] if s["slice"] in cfg.showcase_slices]
        (d / f"quality_bin{f}.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        (d / f"quality_bin{f}.csv").write_text(q.to_csv(), encoding="utf-8")
        reports.append(q)
    write_manifest(cfg, d / "manifest.json", "complete")
    return reports


# --- report ----------------------------------------------------------------

_RAMP_T = np.array([0.0, 1 / 3, 2 / 3, 1.0])
_RAMP_RGB = np.array([[0, 0, 128], [0, 255, 255], [255, 255, 0], [128, 0, 0]], dtype=float)


def heat_colors(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Min-max colour ramp: navy -> cyan -> yellow -> dark red, as uint8 RGB.

    ``t = (v - lo) / (hi - lo)`` clipped to [0, 1]; a flat range maps to t = 0.
    """
    v = np.asarray(values, dtype=np.float64)
    t = np.zeros_like(v) if hi <= lo else np.clip((v - lo) / (hi - lo), 0.0, 1.0)
    rgb = np.stack([np.interp(t, _RAMP_T, _RAMP_RGB[:, c]) for c in range(3)], axis=-1)
    return np.rint(rgb).astype(np.uint8)


def write_ppm(path: Path, rgb: np.ndarray) -> None:
    """Binary P6 image; rows of ``rgb`` are image rows."""
    rgb = np.asarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


def report(cfg: PipelineConfig, out: Path) -> Path:
    spec_rows_path = out / "spectrum" / "trials.csv"
    need = [spec_rows_path, out / "simulate" / "truth.drmt", out / "complete" / "recon.drmt"]
    missing = [str(p.relative_to(out)) for p in need if not p.exists()]
    if missing:
        raise ConfigError(f"incomplete run directory {out}: missing {missing}")
    trials = _read_csv(spec_rows_path)
    truth = read_tensor(out / "simulate" / "truth.drmt")
    recon = read_tensor(out / "complete" / "recon.drmt")
    if truth.shape != recon.shape:
        raise ConfigError("reconstruction and ground truth differ in shape")
    bins = [int(r["band_index"]) for r in _read_csv(out / "simulate" / "bins.csv")]
    quality = []
    for f in range(truth.shape[0]):
        qp = out / "complete" / f"quality_bin{f}.json"
        if not qp.exists():
            raise ConfigError(f"incomplete run directory {out}: missing {qp.name}")
        quality.append(json.loads(qp.read_text(encoding="utf-8")))

    d = out / "report"
    hm = d / "heatmaps"
    hm.mkdir(parents=True, exist_ok=True)
    header = ["trial", "bin", "band_index", "ncs_detected", "ncs_mse", "somp_detected",
              "somp_mse", "map_mse", "map_nmse", "map_psnr_db", "map_ssim"]
    rows = []
    for t in trials:
        for f, q in enumerate(quality):
            rows.append([t["trial"], f, bins[f], t["ncs_detected"], t["ncs_mse"],
                         t.get("somp_detected", ""), t.get("somp_mse", ""),
                         q["mse"], q["nmse"], q["psnr_db"], q["ssim"]])
    _write_csv(d / "summary.csv", header, rows)
    for f in range(truth.shape[0]):
        lo, hi = float(truth[f].min()), float(truth[f].max())
        for k in range(truth.shape[3]):
            for name, vol in (("truth", truth), ("recon", recon)):
                write_ppm(hm / f"bin{f}_slice{k + 1}_{name}.ppm",
                          heat_colors(vol[f, :, :, k], lo, hi))
    return d / "summary.csv"


def run_pipeline(cfg: PipelineConfig, out: Path, jobs: int = 1) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(cfg, out / "manifest.json", "pipeline")
    simulate(cfg, out)
    spectrum(cfg, out, jobs)
    complete(cfg, out, jobs)
    return report(cfg, out)
