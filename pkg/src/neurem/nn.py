"""Small fully-connected sine networks with hand-written backprop and Adam.

Layer convention follows the row-vector form ``h_{i+1} = phi(h_i W_i^T + b_i)``
with ``phi(u) = sin(omega0 * u)``.  Weights are stored as ``(out, in)``.

A network has a *trunk* (hidden layers, each optionally followed by the sine
activation) and one or two linear *heads*.  With two heads the output is
``real_head + 1j * imag_head``.

Gradients of a real loss with respect to a complex output are passed around
as ``dL/dRe + 1j * dL/dIm``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Mlp",
    "init_mlp",
    "forward",
    "backward",
    "AdamState",
    "adam_step",
    "rng_stream",
    "derive_seed",
    "numerical_gradient",
    "relative_error",
]


@dataclass
class Mlp:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activate: list[bool]
    heads: list[tuple[np.ndarray, np.ndarray]]
    omega0: float = 1.0

    def __post_init__(self):
        if self.omega0 <= 0:
            raise ValueError("omega0 must be positive")
        if len(self.weights) != len(self.biases) or len(self.weights) != len(self.activate):
            raise ValueError("trunk weights, biases and activation flags differ in length")
        if len(self.heads) not in (1, 2):
            raise ValueError("a network has one (real) or two (complex-split) heads")
        width = None
        for w, b in zip(self.weights, self.biases):
            if width is not None and w.shape[1] != width:
                raise ValueError("trunk layer shapes do not chain")
            if b.shape != (w.shape[0],):
                raise ValueError("bias shape does not match layer output")
            width = w.shape[0]
        shape = self.heads[0][0].shape
        for w, b in self.heads:
            if w.shape != shape or b.shape != (shape[0],):
                raise ValueError("complex-split heads must have identical shapes")
            if width is not None and w.shape[1] != width:
                raise ValueError("head input does not match trunk output")

    @property
    def complex_head(self) -> bool:
        return len(self.heads) == 2

    @property
    def in_features(self) -> int:
        return (self.weights[0] if self.weights else self.heads[0][0]).shape[1]

    @property
    def out_features(self) -> int:
        return self.heads[0][0].shape[0]

    def params(self) -> dict[str, np.ndarray]:
        """Named views of every trainable array (mutated in place by Adam)."""
        p = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            p[f"W{i}"] = w
            p[f"b{i}"] = b
        for h, (w, b) in enumerate(self.heads):
            p[f"head{h}.W"] = w
            p[f"head{h}.b"] = b
        return p

    def copy(self) -> "Mlp":
        return Mlp(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            list(self.activate),
            [(w.copy(), b.copy()) for w, b in self.heads],
            self.omega0,
        )


def init_mlp(layer_sizes, omega0: float, head: str = "real", rng=None,
             activate=None) -> Mlp:
    """Sine-network initialisation.

    The first layer is drawn from U(-1/fan_in, 1/fan_in); every later layer
    from U(-sqrt(6/fan_in)/omega0, +sqrt(6/fan_in)/omega0).  Biases start at 0.
    ``activate`` flags which trunk layers apply the sine (default: all).
    """
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2:
        raise ValueError("need at least an input and an output size")
    if omega0 <= 0:
        raise ValueError("omega0 must be positive")
    if head not in ("real", "complex"):
        raise ValueError(f"unknown head {head!r}")
    rng = np.random.default_rng() if rng is None else rng
    n_trunk = len(sizes) - 2
    activate = [True] * n_trunk if activate is None else [bool(a) for a in activate]
    if len(activate) != n_trunk:
        raise ValueError("one activation flag per hidden layer expected")

    def draw(fan_in, fan_out, first):
        bound = 1.0 / fan_in if first else np.sqrt(6.0 / fan_in) / omega0
        return rng.uniform(-bound, bound, size=(fan_out, fan_in))

    weights, biases = [], []
    for i in range(n_trunk):
        weights.append(draw(sizes[i], sizes[i + 1], i == 0))
        biases.append(np.zeros(sizes[i + 1]))
    n_heads = 2 if head == "complex" else 1
    heads = [
        (draw(sizes[-2], sizes[-1], n_trunk == 0), np.zeros(sizes[-1]))
        for _ in range(n_heads)
    ]
    return Mlp(weights, biases, activate, heads, float(omega0))


def forward(m: Mlp, z: np.ndarray, return_cache: bool = False):
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != m.in_features:
        raise ValueError(f"input has {z.shape[-1]} features, network expects {m.in_features}")
    h = z
    cache = [h]
    for w, b, act in zip(m.weights, m.biases, m.activate):
        pre = h @ w.T + b
        h = np.sin(m.omega0 * pre) if act else pre
        cache.append(pre)
        cache.append(h)
    outs = [h @ w.T + b for w, b in m.heads]
    out = outs[0] + 1j * outs[1] if m.complex_head else outs[0]
    if return_cache:
        return out, cache
    return out


def backward(m: Mlp, z: np.ndarray, upstream: np.ndarray, cache=None) -> dict[str, np.ndarray]:
    """Reverse-mode gradients for every parameter and for the input ``z``.

    Returns a dict keyed like :meth:`Mlp.params` plus ``"z"``.
    """
    z = np.asarray(z, dtype=np.float64)
    if cache is None:
        _, cache = forward(m, z, return_cache=True)
    h = cache[-1]
    upstream = np.asarray(upstream)
    if upstream.shape != h.shape[:-1] + (m.out_features,):
        raise ValueError("upstream gradient shape does not match the network output")
    if m.complex_head:
        parts = [np.real(upstream), np.imag(upstream)]
    else:
        parts = [np.asarray(upstream, dtype=np.float64)]

    grads = {}
    h2 = h.reshape(-1, h.shape[-1])
    gh = 0.0
    for k, ((w, _), g) in enumerate(zip(m.heads, parts)):
        g2 = g.reshape(-1, g.shape[-1])
        grads[f"head{k}.W"] = g2.T @ h2
        grads[f"head{k}.b"] = g2.sum(axis=0)
        gh = gh + g @ w

    for i in range(len(m.weights) - 1, -1, -1):
        w = m.weights[i]
        pre = cache[2 * i + 1]
        h_in = cache[2 * i]
        if m.activate[i]:
            gpre = gh * (m.omega0 * np.cos(m.omega0 * pre))
        else:
            gpre = gh
        gp2 = gpre.reshape(-1, gpre.shape[-1])
        grads[f"W{i}"] = gp2.T @ h_in.reshape(-1, h_in.shape[-1])
        grads[f"b{i}"] = gp2.sum(axis=0)
        gh = gpre @ w
    grads["z"] = gh
    return grads


@dataclass
class AdamState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: dict[str, np.ndarray],
              grads: dict[str, np.ndarray], lr: float | None = None) -> None:
    """One Adam update, in place on ``params``.

    Decoupled weight decay (``p -= lr * weight_decay * p``) is applied before
    the moment update.  ``lr`` overrides ``state.lr`` for this step only.
    """
    for k, g in grads.items():
        if k in params and not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for {k!r}")
    state.t += 1
    lr = state.lr if lr is None else lr
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {k!r}")
        if k not in state.m:
            state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        if state.weight_decay > 0:
            p *= 1.0 - lr * state.weight_decay
        m, v = state.m[k], state.v[k]
        tmp = np.empty_like(p)
        # in-place passes: the update is memory bound for wide layers
        m *= state.beta1
        np.multiply(g, 1.0 - state.beta1, out=tmp)
        m += tmp
        v *= state.beta2
        np.multiply(g, g, out=tmp)
        tmp *= 1.0 - state.beta2
        v += tmp
        np.multiply(v, 1.0 / bc2, out=tmp)
        np.sqrt(tmp, out=tmp)
        tmp += state.eps
        np.divide(m, tmp, out=tmp)
        tmp *= lr / bc1
        p -= tmp


def rng_stream(master_seed: int, instance_id: int) -> np.random.Generator:
    """Independent reproducible PCG64 substream for one instance.

    Streams are derived with ``SeedSequence(master_seed, spawn_key=(id,))``.
    Normal variates come from numpy's ziggurat transform of uniform draws.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(instance_id),))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(master_seed: int, *keys: int) -> int:
    """A 63-bit seed for a sub-task, distinct for every ``(master_seed, keys)``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def numerical_gradient(f, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient of scalar ``f()`` w.r.t. array ``x``.

    ``x`` is perturbed in place and restored; ``f`` takes no arguments.
    """
    g = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + step
        fp = f()
        flat[i] = old - step
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * step)
    return g


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """``|a - b| / (|a| + |b|)`` in Frobenius norm (0 when both vanish)."""
    den = np.linalg.norm(a) + np.linalg.norm(b)
    if den == 0:
        return 0.0
    return float(np.linalg.norm(a - b) / den)
