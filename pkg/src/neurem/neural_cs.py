"""Unsupervised neural recovery of a row-sparse spectrum matrix.

A sine network maps a learnable latent ``z`` to a complex ``L x N`` matrix.
Training runs in two stages: first the residual plus row-sparsity loss

    ||Y - A X||_F + lam * sum_l ||X[l, :]||_2

then, from that checkpoint, the residual alone.  Both the weights and ``z``
are updated by Adam in each stage.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .signal_mcs import Measurement

log = logging.getLogger(__name__)

__all__ = [
    "NcsConfig",
    "NcsResult",
    "NumericalAbort",
    "ncs_loss",
    "ncs_loss_grad",
    "ncs_solve",
    "PowerSpectrum",
    "power_spectrum",
    "roc_curve",
    "auc",
]


class NumericalAbort(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, iteration: int, history):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration
        self.history = list(history)


@dataclass
class NcsConfig:
    lam: float = 1.0
    lr: float = 1e-4
    t_joint: int = 1000
    t_recon: int = 1000
    omega0: float = 10.0
    hidden: tuple[int, ...] = (128, 128, 128)
    activate: tuple[bool, ...] = (True, True, False)
    final_lr: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.activate = tuple(bool(a) for a in self.activate)
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.t_joint < 1 or self.t_recon < 1:
            raise ValueError("iteration counts must be >= 1")
        if self.lr <= 0 or self.omega0 <= 0:
            raise ValueError("lr and omega0 must be positive")
        if len(self.activate) != len(self.hidden):
            raise ValueError("one activation flag per hidden layer expected")
        if not 0 < self.final_lr <= self.lr:
            raise ValueError("final_lr must lie in (0, lr]")


@dataclass
class NcsResult:
    X: np.ndarray
    X_joint: np.ndarray
    residual_joint: float
    residual_final: float
    history: list[float] = field(default_factory=list)


def _residual(X, A, Y):
    return Y - A @ X


def ncs_loss(X_pred, A, Y, lam: float) -> float:
    res = np.linalg.norm(_residual(X_pred, A, Y))
    return float(res + lam * np.sum(np.linalg.norm(X_pred, axis=1)))


def ncs_loss_grad(X_pred, A, Y, lam: float):
    """Loss value and its gradient ``dL/dRe X + 1j dL/dIm X``."""
    R = _residual(X_pred, A, Y)
    rn = np.linalg.norm(R)
    G = -(A.conj().T @ R) / rn if rn > 0 else np.zeros_like(X_pred)
    loss = rn
    if lam > 0:
        rows = np.linalg.norm(X_pred, axis=1)
        loss += lam * rows.sum()
        safe = np.where(rows > 0, rows, 1.0)
        G = G + lam * X_pred / safe[:, None] * (rows > 0)[:, None]
    return float(loss), G


def _train(net, z, A, Y, lam, iters, state, lr_schedule, history, L, N):
    params = dict(net.params())
    params["z"] = z
    for t in range(iters):
        out, cache = nn.forward(net, z, return_cache=True)
        X = out.reshape(L, N)
        loss, G = ncs_loss_grad(X, A, Y, lam)
        if not np.isfinite(loss):
            raise NumericalAbort("non-finite loss", len(history), history)
        history.append(loss)
        grads = nn.backward(net, z, G.reshape(-1), cache)
        try:
            nn.adam_step(state, params, grads, lr=lr_schedule(t))
        except FloatingPointError as exc:
            raise NumericalAbort(str(exc), len(history), history) from exc


def ncs_solve(m: Measurement, cfg: NcsConfig | None = None) -> NcsResult:
    """Recover ``X`` from ``Y = gain * A X (+ noise)``.

    ``Y`` is rescaled to unit RMS before training so the network works at
    O(1) magnitudes; the loss is positively homogeneous, so this does not
    change the minimiser.  The second stage decays the learning rate
    geometrically from ``lr`` to ``final_lr``.
    """
    cfg = cfg or NcsConfig()
    A, Y = m.A, m.Y
    P, L = A.shape
    N = Y.shape[1]
    scale = float(np.sqrt(np.mean(np.abs(Y) ** 2)))
    if scale == 0:
        zero = np.zeros((L, N), dtype=np.complex128)
        return NcsResult(zero, zero.copy(), 0.0, 0.0, [])
    Yn = Y / scale
    rng = nn.rng_stream(cfg.seed, 0)
    net = nn.init_mlp((L,) + cfg.hidden + (L * N,), cfg.omega0, "complex", rng,
                      activate=cfg.activate)
    z = rng.standard_normal(L)
    history: list[float] = []

    state = nn.AdamState(lr=cfg.lr)
    _train(net, z, A, Yn, cfg.lam, cfg.t_joint, state, lambda t: cfg.lr, history, L, N)
    X_joint = nn.forward(net, z).reshape(L, N)
    res_joint = float(np.linalg.norm(_residual(X_joint, A, Yn)))

    # stage 2 restarts the optimiser from the saved weights and latent
    state = nn.AdamState(lr=cfg.lr)
    ratio = cfg.final_lr / cfg.lr
    steps = max(cfg.t_recon - 1, 1)
    _train(net, z, A, Yn, 0.0, cfg.t_recon, state,
           lambda t: cfg.lr * ratio ** (t / steps), history, L, N)
    X = nn.forward(net, z).reshape(L, N)
    res_final = float(np.linalg.norm(_residual(X, A, Yn)))

    k = scale / m.gain
    return NcsResult(X * k, X_joint * k, res_joint * scale, res_final * scale, history)


@dataclass
class PowerSpectrum:
    power_db: np.ndarray
    occupied: np.ndarray
    threshold_db: float


def power_spectrum(X, threshold_db: float = -20.0) -> PowerSpectrum:
    """Per-sub-band power in dB relative to the strongest sub-band."""
    if threshold_db >= 0:
        raise ValueError("threshold is relative to the peak and must be negative")
    p = np.sum(np.abs(np.asarray(X)) ** 2, axis=1)
    peak = p.max()
    if peak == 0:
        return PowerSpectrum(np.full(p.shape, -np.inf), np.zeros(p.shape, bool), threshold_db)
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(p / peak)
    return PowerSpectrum(db, db > threshold_db, threshold_db)


def roc_curve(trials) -> list[tuple[float, float]]:
    """Pooled ROC over ``(scores, truth)`` pairs.

    A band is declared occupied when its score is ``>=`` the threshold; every
    distinct pooled score is used as a threshold.  The curve starts at (0, 0)
    and ends at (1, 1).
    """
    trials = list(trials)
    if not trials:
        raise ValueError("no trials")
    scores, truth = [], []
    for s, t in trials:
        s = np.asarray(s, dtype=np.float64)
        t = np.asarray(t, dtype=bool)
        if s.shape != t.shape:
            raise ValueError("scores and truth differ in length")
        scores.append(s)
        truth.append(t)
    s = np.concatenate(scores)
    t = np.concatenate(truth)
    n_pos = max(int(t.sum()), 1)
    n_neg = max(int((~t).sum()), 1)
    pts = {(0.0, 0.0), (1.0, 1.0)}
    for thr in np.unique(s):
        pred = s >= thr
        tpr = float(np.sum(pred & t)) / n_pos
        fpr = float(np.sum(pred & ~t)) / n_neg
        pts.add((fpr, tpr))
    return sorted(pts)


def auc(points) -> float:
    """Trapezoid-rule area under an ROC curve sorted by FPR."""
    pts = np.asarray(points, dtype=np.float64)
    return float(np.sum(np.diff(pts[:, 0]) * (pts[1:, 1] + pts[:-1, 1]) / 2.0))
