"""Reverse-mode automatic differentiation on dense float32 tensors.

A Graph is an append-only tape of operation nodes. Values are stored as
float32 (the serialization and interchange format) while every node also
keeps a float64 copy that downstream ops and the backward pass consume, so
reductions accumulate at double precision and gradient checks stay sharp.

The op vocabulary is deliberately small: matrix multiply, row-wise bias
add, elementwise arithmetic, a handful of activations, row-wise softmax
family, and the categorical-latent helpers needed by the trainers. No
general broadcasting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "ShapeError",
    "Tensor",
    "Node",
    "Graph",
    "CategoricalBlock",
    "mlp_forward",
    "gru_step",
    "categorical_sample_st",
    "kl_categorical",
    "kl_categorical_rows",
]


class ShapeError(ValueError):
    """Raised when operand shapes do not line up."""


class Tensor:
    """Dense float32 value: a shape plus a flat, row-major data array."""

    __slots__ = ("shape", "data")

    def __init__(self, shape: Sequence[int], data, *, checked: bool = True):
        self.shape = tuple(int(d) for d in shape)
        arr = np.ascontiguousarray(data, dtype=np.float32).reshape(-1)
        n = 1
        for d in self.shape:
            if d <= 0:
                raise ShapeError(f"non-positive dimension in shape {self.shape}")
            n *= d
        if arr.size != n:
            raise ShapeError(f"shape {self.shape} needs {n} values, got {arr.size}")
        if checked and not np.all(np.isfinite(arr)):
            raise ValueError("non-finite entries in tensor data")
        self.data = arr

    @classmethod
    def from_array(cls, arr, *, checked: bool = True) -> "Tensor":
        a = np.asarray(arr, dtype=np.float32)
        return cls(a.shape if a.ndim > 0 else (1,), a.reshape(-1), checked=checked)

    @property
    def array(self) -> np.ndarray:
        """Shaped float32 view of the flat data."""
        return self.data.reshape(self.shape)

    @property
    def size(self) -> int:
        return self.data.size

    def copy(self) -> "Tensor":
        return Tensor(self.shape, self.data.copy(), checked=False)

    def tobytes(self) -> bytes:
        return self.data.tobytes()

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Tensor(shape={self.shape})"


class Node:
    """One tape entry: op kind, parent ids, cached values, gradient slot."""

    __slots__ = ("graph", "nid", "op", "parents", "fp", "grad", "_backward")

    def __init__(self, graph, nid, op, parents, fp, backward):
        self.graph = graph
        self.nid = nid
        self.op = op
        self.parents = parents
        self.fp = fp  # float64 cache used by downstream ops and backward
        self.grad: Optional[np.ndarray] = None
        self._backward: Optional[Callable[[np.ndarray], None]] = backward

    @property
    def shape(self):
        return self.fp.shape

    @property
    def ndim(self):
        return self.fp.ndim

    def tensor(self) -> Tensor:
        """Materialize the node value as a float32 Tensor."""
        a = self.fp.astype(np.float32)
        return Tensor(a.shape if a.ndim > 0 else (1,), a.reshape(-1), checked=False)

    def item(self) -> float:
        return float(self.fp.reshape(-1)[0])


def _acc(node: Node, g: np.ndarray) -> None:
    if node.grad is None:
        node.grad = np.zeros(node.fp.shape, dtype=np.float64)
    node.grad += g


class Graph:
    """Append-only tape; parent ids always precede the child's id."""

    __slots__ = ("nodes", "checked", "_lifted")

    def __init__(self, checked: bool = True):
        self.nodes: list[Node] = []
        self.checked = checked
        self._lifted: dict[int, Node] = {}

    # -- node creation ----------------------------------------------------

    def _append(self, op, parents, value, backward) -> Node:
        fp = np.asarray(value, dtype=np.float64)
        if self.checked and not np.all(np.isfinite(fp)):
            raise ValueError(f"non-finite value produced by op '{op}'")
        node = Node(self, len(self.nodes), op, tuple(p.nid for p in parents), fp, backward)
        self.nodes.append(node)
        return node

    def lift(self, t: Tensor) -> Node:
        """Insert a tensor as a leaf. Repeated lifts of the same Tensor
        object return the same node, so its gradient accumulates."""
        node = self._lifted.get(id(t))
        if node is None:
            node = self._append("leaf", (), t.array.astype(np.float64), None)
            self._lifted[id(t)] = node
        return node

    def constant(self, arr) -> Node:
        return self._append("const", (), np.asarray(arr, dtype=np.float64), None)

    def _as_node(self, x) -> Node:
        if isinstance(x, Node):
            if x.graph is not self:
                raise ValueError("node belongs to a different graph")
            return x
        if isinstance(x, Tensor):
            return self.lift(x)
        return self.constant(x)

    # -- arithmetic -------------------------------------------------------

    def add(self, a, b) -> Node:
        a, b = self._as_node(a), self._as_node(b)
        if a.shape == b.shape:
            def bw(g, a=a, b=b):
                _acc(a, g)
                _acc(b, g)
            return self._append("add", (a, b), a.fp + b.fp, bw)
        if a.ndim == 2 and b.ndim == 1 and a.shape[1] == b.shape[0]:
            # row-wise bias add
            def bw(g, a=a, b=b):
                _acc(a, g)
                _acc(b, g.sum(axis=0))
            return self._append("bias_add", (a, b), a.fp + b.fp, bw)
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}")

    def sub(self, a, b) -> Node:
        a, b = self._as_node(a), self._as_node(b)
        if a.shape != b.shape:
            raise ShapeError(f"sub: incompatible shapes {a.shape} and {b.shape}")

        def bw(g, a=a, b=b):
            _acc(a, g)
            _acc(b, -g)
        return self._append("sub", (a, b), a.fp - b.fp, bw)

    def neg(self, a) -> Node:
        a = self._as_node(a)

        def bw(g, a=a):
            _acc(a, -g)
        return self._append("neg", (a,), -a.fp, bw)

    def mul(self, a, b) -> Node:
        a, b = self._as_node(a), self._as_node(b)
        if a.shape != b.shape:
            raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}")

        def bw(g, a=a, b=b):
            _acc(a, g * b.fp)
            _acc(b, g * a.fp)
        return self._append("mul", (a, b), a.fp * b.fp, bw)

    def scale(self, a, c: float) -> Node:
        a = self._as_node(a)
        c = float(c)

        def bw(g, a=a, c=c):
            _acc(a, g * c)
        return self._append("scale", (a,), a.fp * c, bw)

    def cmul(self, a, const) -> Node:
        """Elementwise multiply by a constant array (no gradient into it)."""
        a = self._as_node(a)
        c = np.asarray(const, dtype=np.float64)
        if c.ndim > 0 and c.shape != a.shape:
            raise ShapeError(f"cmul: constant shape {c.shape} != operand {a.shape}")

        def bw(g, a=a, c=c):
            _acc(a, g * c)
        return self._append("cmul", (a,), a.fp * c, bw)

    def cadd(self, a, const) -> Node:
        a = self._as_node(a)
        c = np.asarray(const, dtype=np.float64)
        if c.ndim > 0 and c.shape != a.shape:
            raise ShapeError(f"cadd: constant shape {c.shape} != operand {a.shape}")

        def bw(g, a=a):
            _acc(a, g)
        return self._append("cadd", (a,), a.fp + c, bw)

    def matmul(self, a, b) -> Node:
        a, b = self._as_node(a), self._as_node(b)
        if a.ndim == 2 and b.ndim == 2:
            if a.shape[1] != b.shape[0]:
                raise ShapeError(f"matmul: {a.shape} @ {b.shape}")

            def bw(g, a=a, b=b):
                _acc(a, g @ b.fp.T)
                _acc(b, a.fp.T @ g)
            return self._append("matmul", (a, b), a.fp @ b.fp, bw)
        if a.ndim == 1 and b.ndim == 2:
            if a.shape[0] != b.shape[0]:
                raise ShapeError(f"matmul: {a.shape} @ {b.shape}")

            def bw(g, a=a, b=b):
                _acc(a, b.fp @ g)
                _acc(b, np.outer(a.fp, g))
            return self._append("vecmat", (a, b), a.fp @ b.fp, bw)
        if a.ndim == 2 and b.ndim == 1:
            if a.shape[1] != b.shape[0]:
                raise ShapeError(f"matmul: {a.shape} @ {b.shape}")

            def bw(g, a=a, b=b):
                _acc(a, np.outer(g, b.fp))
                _acc(b, a.fp.T @ g)
            return self._append("matvec", (a, b), a.fp @ b.fp, bw)
        raise ShapeError(f"matmul: unsupported ranks {a.ndim} and {b.ndim}")

    # -- reductions and shaping -------------------------------------------

    def sum(self, a) -> Node:
        a = self._as_node(a)

        def bw(g, a=a):
            _acc(a, np.full(a.fp.shape, float(g)))
        return self._append("sum", (a,), np.float64(a.fp.sum()), bw)

    def mean(self, a) -> Node:
        a = self._as_node(a)
        n = a.fp.size

        def bw(g, a=a, n=n):
            _acc(a, np.full(a.fp.shape, float(g) / n))
        return self._append("mean", (a,), np.float64(a.fp.mean()), bw)

    def rowsum(self, a) -> Node:
        a = self._as_node(a)
        if a.ndim != 2:
            raise ShapeError("rowsum expects a 2-D operand")

        def bw(g, a=a):
            _acc(a, np.repeat(g[:, None], a.fp.shape[1], axis=1))
        return self._append("rowsum", (a,), a.fp.sum(axis=1), bw)

    def reshape(self, a, shape) -> Node:
        a = self._as_node(a)
        shape = tuple(shape)

        def bw(g, a=a):
            _acc(a, g.reshape(a.fp.shape))
        return self._append("reshape", (a,), a.fp.reshape(shape), bw)

    def concat(self, parts: Sequence, axis: int = -1) -> Node:
        nodes = [self._as_node(p) for p in parts]
        if not nodes:
            raise ShapeError("concat of no operands")
        nd = nodes[0].ndim
        ax = axis % nd
        widths = [n.shape[ax] for n in nodes]
        offs = np.cumsum([0] + widths)

        def bw(g, nodes=nodes, offs=offs, ax=ax):
            for n, lo, hi in zip(nodes, offs[:-1], offs[1:]):
                sl = [slice(None)] * g.ndim
                sl[ax] = slice(lo, hi)
                _acc(n, g[tuple(sl)])
        return self._append("concat", tuple(nodes),
                            np.concatenate([n.fp for n in nodes], axis=ax), bw)

    def slice_cols(self, a, lo: int, hi: int) -> Node:
        a = self._as_node(a)
        if a.ndim == 2:
            def bw(g, a=a, lo=lo, hi=hi):
                full = np.zeros(a.fp.shape, dtype=np.float64)
                full[:, lo:hi] = g
                _acc(a, full)
            return self._append("slice_cols", (a,), a.fp[:, lo:hi].copy(), bw)
        if a.ndim == 1:
            def bw(g, a=a, lo=lo, hi=hi):
                full = np.zeros(a.fp.shape, dtype=np.float64)
                full[lo:hi] = g
                _acc(a, full)
            return self._append("slice", (a,), a.fp[lo:hi].copy(), bw)
        raise ShapeError("slice_cols expects a 1-D or 2-D operand")

    # -- nonlinearities ----------------------------------------------------

    def leaky_relu(self, a, alpha: float = 0.01) -> Node:
        a = self._as_node(a)
        mask = np.where(a.fp > 0.0, 1.0, alpha)

        def bw(g, a=a, mask=mask):
            _acc(a, g * mask)
        return self._append("leaky_relu", (a,), np.where(a.fp > 0.0, a.fp, alpha * a.fp), bw)

    def tanh(self, a) -> Node:
        a = self._as_node(a)
        t = np.tanh(a.fp)

        def bw(g, a=a, t=t):
            _acc(a, g * (1.0 - t * t))
        return self._append("tanh", (a,), t, bw)

    def sigmoid(self, a) -> Node:
        a = self._as_node(a)
        s = 1.0 / (1.0 + np.exp(-a.fp))

        def bw(g, a=a, s=s):
            _acc(a, g * s * (1.0 - s))
        return self._append("sigmoid", (a,), s, bw)

    def softplus(self, a) -> Node:
        a = self._as_node(a)

        def bw(g, a=a):
            _acc(a, g / (1.0 + np.exp(-a.fp)))
        return self._append("softplus", (a,), np.logaddexp(0.0, a.fp), bw)

    def log(self, a) -> Node:
        a = self._as_node(a)
        if self.checked and np.any(a.fp <= 0.0):
            raise ValueError("log of non-positive value")

        def bw(g, a=a):
            _acc(a, g / a.fp)
        return self._append("log", (a,), np.log(a.fp), bw)

    def maximum_const(self, a, c: float) -> Node:
        """Elementwise max(a, c); gradient passes where a >= c."""
        a = self._as_node(a)
        c = float(c)
        mask = (a.fp >= c).astype(np.float64)

        def bw(g, a=a, mask=mask):
            _acc(a, g * mask)
        return self._append("maximum_const", (a,), np.maximum(a.fp, c), bw)

    def softmax(self, a) -> Node:
        a = self._as_node(a)
        ax = a.ndim - 1
        shifted = a.fp - a.fp.max(axis=ax, keepdims=True)
        e = np.exp(shifted)
        s = e / e.sum(axis=ax, keepdims=True)

        def bw(g, a=a, s=s, ax=ax):
            _acc(a, s * (g - (g * s).sum(axis=ax, keepdims=True)))
        return self._append("softmax", (a,), s, bw)

    def log_softmax(self, a) -> Node:
        a = self._as_node(a)
        ax = a.ndim - 1
        shifted = a.fp - a.fp.max(axis=ax, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=ax, keepdims=True))
        ls = shifted - lse
        s = np.exp(ls)

        def bw(g, a=a, s=s, ax=ax):
            _acc(a, g - s * g.sum(axis=ax, keepdims=True))
        return self._append("log_softmax", (a,), ls, bw)

    def stop_grad(self, a) -> Node:
        a = self._as_node(a)
        return self._append("stop_grad", (a,), a.fp.copy(), None)

    # -- backward ----------------------------------------------------------

    def backward(self, root: Node) -> None:
        """Seed the root with gradient one, then sweep the tape in reverse
        creation order. Grads are reset first, so repeated calls agree."""
        if root.graph is not self:
            raise ValueError("root belongs to a different graph")
        if root.fp.size != 1:
            raise ShapeError("backward root must be a scalar")
        for n in self.nodes:
            n.grad = None
        root.grad = np.ones(root.fp.shape, dtype=np.float64)
        for node in reversed(self.nodes):
            if node.grad is not None and node._backward is not None:
                node._backward(node.grad)

    def grad(self, t: Tensor) -> np.ndarray:
        """Gradient w.r.t. a lifted tensor (zeros if it never joined)."""
        node = self._lifted.get(id(t))
        if node is None or node.grad is None:
            return np.zeros(t.shape, dtype=np.float64)
        return node.grad


# -- composite networks ----------------------------------------------------

_ACTIVATIONS = ("leaky_relu", "tanh", "identity")


def mlp_forward(g: Graph, params, x, activation: str = "leaky_relu") -> Node:
    """Forward pass through a stack of (weight, bias) layers.

    The activation applies between layers; the final layer is linear.
    `params` is a sequence of (W, b) with W shaped [fan_in, fan_out].
    """
    if activation not in _ACTIVATIONS:
        raise ValueError(f"unknown activation '{activation}'")
    h = g._as_node(x)
    n_layers = len(params)
    for i, (w, b) in enumerate(params):
        h = g.add(g.matmul(h, g._as_node(w)), g._as_node(b))
        if i < n_layers - 1:
            if activation == "leaky_relu":
                h = g.leaky_relu(h)
            elif activation == "tanh":
                h = g.tanh(h)
    return h


def gru_step(g: Graph, params, h_prev, x) -> Node:
    """Single GRU step.

    params has wx [in, 3H], wh [H, 3H], b [3H], gate order (reset, update,
    candidate). h' = (1 - u) * h + u * c, so an update gate driven to zero
    leaves the state untouched.
    """
    wx, wh, b = (g._as_node(p) for p in (params.wx, params.wh, params.b))
    h_prev = g._as_node(h_prev)
    x = g._as_node(x)
    hsize = wh.shape[0]
    if (h_prev.shape[-1] if h_prev.ndim else 0) != hsize:
        raise ShapeError(f"gru_step: h_prev width {h_prev.shape} != {hsize}")

    xa = g.add(g.matmul(x, wx), b)  # [*, 3H]
    ha = g.matmul(h_prev, wh)
    r = g.sigmoid(g.add(g.slice_cols(xa, 0, hsize), g.slice_cols(ha, 0, hsize)))
    u = g.sigmoid(g.add(g.slice_cols(xa, hsize, 2 * hsize),
                        g.slice_cols(ha, hsize, 2 * hsize)))
    rh = g.mul(r, h_prev)
    c = g.tanh(g.add(g.slice_cols(xa, 2 * hsize, 3 * hsize),
                     g.matmul(rh, g.slice_cols(wh, 2 * hsize, 3 * hsize))))
    one_minus_u = g.cadd(g.neg(u), np.ones(u.shape))
    return g.add(g.mul(one_minus_u, h_prev), g.mul(u, c))


@dataclass
class CategoricalBlock:
    """A batch of independent categorical distributions with a drawn
    one-hot sample whose gradient is routed straight through the
    (uniform-mixed) probabilities."""

    logits: Node
    probs: Node          # after uniform mixing; rows sum to one
    sample: Node         # forward value is one-hot; backward hits `probs`
    indices: np.ndarray  # sampled class per distribution
    unimix: float

    @property
    def onehot(self) -> np.ndarray:
        return self.sample.fp.copy()


def _mixed_probs(g: Graph, logits: Node, unimix: float) -> Node:
    probs = g.softmax(logits)
    if unimix > 0.0:
        n_classes = probs.shape[-1]
        probs = g.cadd(g.scale(probs, 1.0 - unimix),
                       np.full(probs.shape, unimix / n_classes))
    return probs


def categorical_sample_st(g: Graph, logits, rng, unimix: float = 0.01,
                          uniforms: Optional[np.ndarray] = None) -> CategoricalBlock:
    """Sample one class per row of [n_dists, n_classes] logits.

    The forward value is the one-hot sample; the backward pass treats the
    output as the mixed probability vector (straight-through estimator).
    `uniforms` overrides the per-row uniform draws (one per distribution).
    """
    logits = g._as_node(logits)
    if logits.ndim != 2:
        raise ShapeError("categorical_sample_st expects [n_dists, n_classes] logits")
    probs = _mixed_probs(g, logits, unimix)
    p = probs.fp
    cdf = np.cumsum(p, axis=1)
    r = rng.random(p.shape[0]) if uniforms is None else np.asarray(uniforms)
    idx = (r[:, None] >= cdf).sum(axis=1)
    idx = np.minimum(idx, p.shape[1] - 1)
    onehot = np.zeros(p.shape)
    onehot[np.arange(p.shape[0]), idx] = 1.0
    sample = g.cadd(probs, onehot - p)
    return CategoricalBlock(logits=logits, probs=probs, sample=sample,
                            indices=idx, unimix=unimix)


def kl_categorical_rows(g: Graph, p_logits, q_logits, stop_grad_side: str = "none") -> Node:
    """Per-distribution KL(p || q) for row-wise categorical logits."""
    if stop_grad_side not in ("none", "p", "q"):
        raise ValueError(f"bad stop_grad_side '{stop_grad_side}'")
    p = g._as_node(p_logits)
    q = g._as_node(q_logits)
    if p.shape != q.shape:
        raise ShapeError(f"kl: shape mismatch {p.shape} vs {q.shape}")
    if stop_grad_side == "p":
        p = g.stop_grad(p)
    elif stop_grad_side == "q":
        q = g.stop_grad(q)
    diff = g.sub(g.log_softmax(p), g.log_softmax(q))
    return g.rowsum(g.mul(g.softmax(p), diff))


def kl_categorical(g: Graph, p_logits, q_logits, stop_grad_side: str = "none") -> Node:
    """Sum over distributions of KL(p || q)."""
    return g.sum(kl_categorical_rows(g, p_logits, q_logits, stop_grad_side))
