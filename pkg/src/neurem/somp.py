"""Simultaneous orthogonal matching pursuit (greedy joint-sparse recovery)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .signal_mcs import Measurement

__all__ = ["SompResult", "somp"]

RIDGE = 1e-12


@dataclass
class SompResult:
    support: list[int]
    X_hat: np.ndarray
    residual_norm: float
    residual_history: list[float] = field(default_factory=list)


def _ls(As, Y):
    G = As.conj().T @ As
    G = G + RIDGE * np.eye(G.shape[0])
    return np.linalg.solve(G, As.conj().T @ Y)


def somp(m: Measurement, k: int) -> SompResult:
    """Select ``k`` rows of ``X`` greedily, re-fitting least squares after each pick.

    The selection score of column ``l`` is ``sum_n |A[:, l]^H R[:, n]|``.
    Residual norms are reported in the units of ``Y``; ``X_hat`` is divided by
    the measurement gain so it lives in the same units as the true spectrum.
    """
    A, Y = m.A, m.Y
    P, L = A.shape
    if not 1 <= k <= P:
        raise ValueError(f"sparsity k={k} must lie in [1, P={P}]")
    support: list[int] = []
    R = Y.copy()
    history = []
    coef = None
    for _ in range(k):
        score = np.abs(A.conj().T @ R).sum(axis=1)
        score[support] = -np.inf
        support.append(int(np.argmax(score)))
        As = A[:, support]
        coef = _ls(As, Y)
        R = Y - As @ coef
        history.append(float(np.linalg.norm(R)))
    X_hat = np.zeros((L, Y.shape[1]), dtype=np.complex128)
    X_hat[support] = coef / m.gain
    return SompResult(support, X_hat, history[-1], history)
