"""Parameter containers, initializers, plain-numpy forward kernels, Adam.

The graph ops in `autodiff` are the training path; the `*_np` kernels here
are allocation-light float64 twins used for action sampling and rollouts.
Unit tests pin the two paths to bit-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .autodiff import Tensor

__all__ = [
    "MlpParams",
    "GruParams",
    "init_mlp",
    "init_gru",
    "mlp_np",
    "gru_np",
    "softmax_np",
    "sample_categorical_np",
    "Adam",
]


@dataclass
class MlpParams:
    """Weight/bias pairs for a feed-forward stack; W is [fan_in, fan_out]."""

    layers: list[tuple[Tensor, Tensor]]
    activation: str = "leaky_relu"

    def __iter__(self) -> Iterator[tuple[Tensor, Tensor]]:
        return iter(self.layers)

    def __len__(self) -> int:
        return len(self.layers)

    def tensors(self) -> list[Tensor]:
        out = []
        for w, b in self.layers:
            out.append(w)
            out.append(b)
        return out

    @property
    def in_dim(self) -> int:
        return self.layers[0][0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.layers[-1][0].shape[1]


@dataclass
class GruParams:
    """Single-layer GRU weights, gate order (reset, update, candidate)."""

    wx: Tensor  # [in, 3H]
    wh: Tensor  # [H, 3H]
    b: Tensor   # [3H]

    def tensors(self) -> list[Tensor]:
        return [self.wx, self.wh, self.b]

    @property
    def hidden(self) -> int:
        return self.wh.shape[0]


def init_mlp(rng: np.random.Generator, sizes: Sequence[int],
             activation: str = "leaky_relu", final_scale: float = 1.0) -> MlpParams:
    """He-style normal init; the last layer can be shrunk (small policy
    logits at the start keep early exploration near uniform)."""
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        std = np.sqrt(2.0 / fan_in)
        if i == len(sizes) - 2:
            std *= final_scale
        w = rng.normal(0.0, std, size=(fan_in, fan_out))
        b = np.zeros(fan_out)
        layers.append((Tensor.from_array(w), Tensor.from_array(b)))
    return MlpParams(layers=layers, activation=activation)


def init_gru(rng: np.random.Generator, in_dim: int, hidden: int) -> GruParams:
    sx = np.sqrt(1.0 / in_dim)
    sh = np.sqrt(1.0 / hidden)
    return GruParams(
        wx=Tensor.from_array(rng.normal(0.0, sx, size=(in_dim, 3 * hidden))),
        wh=Tensor.from_array(rng.normal(0.0, sh, size=(hidden, 3 * hidden))),
        b=Tensor.from_array(np.zeros(3 * hidden)),
    )


# -- numpy twins -------------------------------------------------------------

def mlp_np(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Float64 forward matching `mlp_forward` (activation between layers)."""
    h = np.asarray(x, dtype=np.float64)
    last = len(params.layers) - 1
    for i, (w, b) in enumerate(params.layers):
        h = h @ w.array.astype(np.float64) + b.array.astype(np.float64)
        if i < last:
            if params.activation == "leaky_relu":
                h = np.where(h > 0.0, h, 0.01 * h)
            elif params.activation == "tanh":
                h = np.tanh(h)
    return h

def gru_np(params: GruParams, h_prev: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Float64 twin of `gru_step`."""
    hsize = params.hidden
    wx = params.wx.array.astype(np.float64)
    wh = params.wh.array.astype(np.float64)
    b = params.b.array.astype(np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    xa = np.asarray(x, dtype=np.float64) @ wx + b
    ha = h_prev @ wh
    r = _sigmoid(xa[..., 0:hsize] + ha[..., 0:hsize])
    u = _sigmoid(xa[..., hsize:2 * hsize] + ha[..., hsize:2 * hsize])
    c = np.tanh(xa[..., 2 * hsize:] + (r * h_prev) @ wh[:, 2 * hsize:])
    return (1.0 - u) * h_prev + u * c


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def softmax_np(logits: np.ndarray, unimix: float = 0.0) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)
    if unimix > 0.0:
        p = (1.0 - unimix) * p + unimix / p.shape[-1]
    return p


def sample_categorical_np(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draw per row; same arithmetic as the graph sampler."""
    p = np.atleast_2d(probs)
    cdf = np.cumsum(p, axis=1)
    r = rng.random(p.shape[0])
    idx = (r[:, None] >= cdf).sum(axis=1)
    idx = np.minimum(idx, p.shape[1] - 1)
    return idx if probs.ndim > 1 else idx[0]


# -- optimizer ----------------------------------------------------------------

@dataclass
class Adam:
    """Adaptive-moment optimizer over a fixed tensor list, with global
    gradient-norm clipping. Moments are float64; params stay float32."""

    params: list[Tensor]
    lr: float
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    clip_norm: float = 10.0
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.m = [np.zeros(p.shape, dtype=np.float64) for p in self.params]
        self.v = [np.zeros(p.shape, dtype=np.float64) for p in self.params]

    def step(self, grads: Sequence[np.ndarray]) -> float:
        """Apply one update; returns the pre-clip global gradient norm."""
        if len(grads) != len(self.params):
            raise ValueError("gradient list does not match parameter list")
        gs = [np.asarray(g, dtype=np.float64) for g in grads]
        norm = float(np.sqrt(sum(float((g * g).sum()) for g in gs)))
        if self.clip_norm > 0.0 and norm > self.clip_norm:
            gs = [g * (self.clip_norm / norm) for g in gs]
        self.t += 1
        b1, b2 = self.betas
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(self.params, gs, self.m, self.v):
            g = g.reshape(p.shape)
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            upd = (self.lr / c1) * m / (np.sqrt(v / c2) + self.eps)
            new = p.array.astype(np.float64) - upd
            p.data[:] = new.reshape(-1).astype(np.float32)
        return norm
