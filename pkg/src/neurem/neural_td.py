"""Tensor completion with a learnable Tucker core and network-generated factors.

Each factor matrix ``U_n`` (extent ``I_n`` by rank ``R_n``) is the reshaped
output of a two-layer sine network applied to a learnable latent vector of
length ``I_n``.  The core tensor and a scalar bias ``b`` are free parameters.
All of them are trained jointly by Adam (with decoupled weight decay) on the
masked squared error

    || P_Omega(X) - P_Omega(G x1 U1 x2 U2 x3 U3 + b) ||_F^2 .

Training runs on observed values standardized to zero mean and unit std.  The
bias lets the model undo that shift: without it, centring a rank-``R`` tensor
generally raises its Tucker rank by one in every mode.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .neural_cs import NumericalAbort
from .rem_sim import SampleMask
from .tensor_core import modal_product, tucker_to_tensor

log = logging.getLogger(__name__)

__all__ = [
    "NtdConfig",
    "TuckerModel",
    "NtdResult",
    "init_model",
    "factors",
    "reconstruct",
    "ntd_loss",
    "ntd_gradients",
    "ntd_solve",
]


@dataclass
class NtdConfig:
    ranks: tuple[int, int, int] = (25, 25, 12)
    omega0: float = 2.0
    lr: float = 0.01
    weight_decay: float = 8.0
    iterations: int = 3000
    hidden: int = 64
    final_lr: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        self.ranks = tuple(int(r) for r in self.ranks)
        if len(self.ranks) != 3 or min(self.ranks) < 1:
            raise ValueError("ranks must be three positive integers")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.lr <= 0 or self.omega0 <= 0 or self.hidden < 1:
            raise ValueError("lr, omega0 and hidden must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if not 0 < self.final_lr <= self.lr:
            raise ValueError("final_lr must lie in (0, lr]")

    def check_dims(self, dims):
        for r, d in zip(self.ranks, dims):
            if r > d:
                raise ValueError(f"rank {self.ranks} exceeds tensor extents {tuple(dims)}")


@dataclass
class TuckerModel:
    core: np.ndarray
    nets: list[nn.Mlp]
    latents: list[np.ndarray]
    dims: tuple[int, int, int]
    # scalar added to every entry, kept as a 1-element array so it updates in place
    bias: np.ndarray = field(default_factory=lambda: np.zeros(1))

    @property
    def ranks(self) -> tuple[int, int, int]:
        return tuple(self.core.shape)

    def params(self) -> dict[str, np.ndarray]:
        p = {"core": self.core}
        for n, (net, z) in enumerate(zip(self.nets, self.latents), start=1):
            for k, v in net.params().items():
                p[f"f{n}.{k}"] = v
            p[f"z{n}"] = z
        p["bias"] = self.bias
        return p


@dataclass
class NtdResult:
    tensor: np.ndarray
    model: TuckerModel
    history: list[float] = field(default_factory=list)
    offset: float = 0.0
    scale: float = 1.0


def init_model(dims, cfg: NtdConfig, rng) -> TuckerModel:
    dims = tuple(int(d) for d in dims)
    cfg.check_dims(dims)
    nets, latents = [], []
    for d, r in zip(dims, cfg.ranks):
        nets.append(nn.init_mlp((d, cfg.hidden, d * r), cfg.omega0, "real", rng))
        latents.append(rng.standard_normal(d))
    core = rng.standard_normal(cfg.ranks) / np.sqrt(np.prod(cfg.ranks))
    return TuckerModel(core, nets, latents, dims)


def factors(model: TuckerModel, return_cache: bool = False):
    us, caches = [], []
    for net, z, d in zip(model.nets, model.latents, model.dims):
        out, cache = nn.forward(net, z, return_cache=True)
        us.append(out.reshape(d, -1))
        caches.append(cache)
    return (us, caches) if return_cache else us


def reconstruct(model: TuckerModel) -> np.ndarray:
    return tucker_to_tensor(model.core, factors(model)) + model.bias[0]


def ntd_loss(model: TuckerModel, observed: np.ndarray, mask: SampleMask) -> float:
    b = mask.boolean()
    r = np.where(b, np.asarray(observed) - reconstruct(model), 0.0)
    return float(np.sum(r * r))


def _core_and_factor_grads(core, us, gx):
    """Gradients of ``<gx, core x1 U1 x2 U2 x3 U3>`` w.r.t. core and each U_n."""
    u1, u2, u3 = us
    # contract gx with two factors at a time, reusing partial products
    t23 = modal_product(modal_product(gx, u2.T, 2), u3.T, 3)    # I  x R2 x R3
    g_core = modal_product(t23, u1.T, 1)
    g_u1 = np.tensordot(t23, core, axes=([1, 2], [1, 2]))
    t13 = modal_product(modal_product(gx, u1.T, 1), u3.T, 3)    # R1 x J  x R3
    g_u2 = np.tensordot(t13, core, axes=([0, 2], [0, 2]))
    t12 = modal_product(modal_product(gx, u1.T, 1), u2.T, 2)    # R1 x R2 x K
    g_u3 = np.tensordot(t12, core, axes=([0, 1], [0, 1]))
    return g_core, [g_u1, g_u2, g_u3]


def ntd_gradients(model: TuckerModel, observed: np.ndarray, mask_bool: np.ndarray):
    """Loss and gradients for every entry of :meth:`TuckerModel.params`."""
    us, caches = factors(model, return_cache=True)
    x_hat = tucker_to_tensor(model.core, us) + model.bias[0]
    r = np.where(mask_bool, x_hat - observed, 0.0)
    loss = float(np.sum(r * r))
    g_core, g_us = _core_and_factor_grads(model.core, us, 2.0 * r)
    grads = {"core": g_core, "bias": np.array([2.0 * r.sum()])}
    for n, (net, z, cache, gu) in enumerate(
            zip(model.nets, model.latents, caches, g_us), start=1):
        g = nn.backward(net, z, gu.reshape(-1), cache)
        for k, v in g.items():
            grads[f"f{n}.{k}" if k != "z" else f"z{n}"] = v
    return loss, grads


def ntd_solve(observed: np.ndarray, mask: SampleMask, cfg: NtdConfig | None = None) -> NtdResult:
    """Complete ``observed`` (only entries in ``mask`` are read).

    Observed values are shifted and scaled to zero mean / unit std before
    training; the reconstruction is mapped back afterwards.
    """
    cfg = cfg or NtdConfig()
    observed = np.asarray(observed, dtype=np.float64)
    if observed.shape != mask.dims:
        raise ValueError(f"tensor dims {observed.shape} != mask dims {mask.dims}")
    if len(mask) == 0:
        raise ValueError("mask has no observed entries")
    cfg.check_dims(observed.shape)
    b = mask.boolean()
    vals = observed[b]
    if not np.all(np.isfinite(vals)):
        raise ValueError("observed entries must be finite")
    offset = float(vals.mean())
    scale = float(vals.std())
    if scale == 0:
        scale = 1.0
    target = np.where(b, (observed - offset) / scale, 0.0)

    rng = nn.rng_stream(cfg.seed, 0)
    model = init_model(observed.shape, cfg, rng)
    params = model.params()
    state = nn.AdamState(lr=cfg.lr, weight_decay=cfg.weight_decay)
    ratio = cfg.final_lr / cfg.lr
    steps = max(cfg.iterations - 1, 1)
    history: list[float] = []
    for t in range(cfg.iterations):
        loss, grads = ntd_gradients(model, target, b)
        if not np.isfinite(loss):
            raise NumericalAbort("non-finite loss", t, history)
        history.append(loss)
        try:
            nn.adam_step(state, params, grads, lr=cfg.lr * ratio ** (t / steps))
        except FloatingPointError as exc:
            raise NumericalAbort(str(exc), t, history) from exc
    x_hat = reconstruct(model) * scale + offset
    return NtdResult(x_hat, model, history, offset, scale)
