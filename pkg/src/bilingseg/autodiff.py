"""A small reverse-mode automatic differentiation engine over numpy arrays.

Each :class:`Tensor` records its parents and a closure mapping the output
gradient to parent gradients. :meth:`Tensor.backward` walks the graph in
reverse topological order. Besides elementwise and linear-algebra
primitives there are a few fused ops (GRU cell, masked softmax, summed
cross-entropy) whose local gradients are written out by hand; they keep the
per-timestep op count low enough for recurrent models in pure numpy.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "parents", "backward_fn", "requires_grad")

    def __init__(self, data, parents: tuple = (), backward_fn: Callable | None = None, requires_grad: bool = False):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data)
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"

    def backward(self, grad=None) -> None:
        """Accumulate d(self)/d(leaf) into ``.grad`` of every leaf that requires it."""
        if grad is None:
            grad = np.ones_like(self.data)
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                if id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): grad}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.backward_fn is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for p, pg in zip(node.parents, node.backward_fn(g)):
                if pg is None or not p.requires_grad:
                    continue
                k = id(p)
                grads[k] = pg if k not in grads else grads[k] + pg

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, -other)

    def __rsub__(self, other):
        return add(other, neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)


def parameter(data) -> Tensor:
    return Tensor(np.asarray(data), requires_grad=True)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _pair(a, b) -> tuple[Tensor, Tensor]:
    # python scalars take the dtype of the tensor operand
    if isinstance(a, Tensor) and not isinstance(b, Tensor) and np.isscalar(b):
        return a, Tensor(np.asarray(b, dtype=a.dtype))
    if isinstance(b, Tensor) and not isinstance(a, Tensor) and np.isscalar(a):
        return Tensor(np.asarray(a, dtype=b.dtype)), b
    return as_tensor(a), as_tensor(b)


def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    sa, sb = a.shape, b.shape
    return Tensor(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def neg(a: Tensor) -> Tensor:
    return Tensor(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    sa, sb = a.shape, b.shape
    return Tensor(a.data * b.data, (a, b),
                  lambda g: (_unbroadcast(g * b.data, sa), _unbroadcast(g * a.data, sb)))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """``a @ b`` with ``b`` 2-D; ``a`` may carry leading batch axes."""
    a, b = as_tensor(a), as_tensor(b)

    def back(g):
        ga = g @ b.data.T
        gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        return ga, gb

    return Tensor(a.data @ b.data, (a, b), back)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return Tensor(y, (a,), lambda g: (g * (1.0 - y * y),))


def _sigmoid(x):
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def sigmoid(a: Tensor) -> Tensor:
    y = _sigmoid(a.data)
    return Tensor(y, (a,), lambda g: (g * y * (1.0 - y),))


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    return Tensor(y, (a,), lambda g: (g * y,))


def log(a: Tensor) -> Tensor:
    return Tensor(np.log(a.data), (a,), lambda g: (g / a.data,))


def sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    shape = a.shape

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return Tensor(a.data.sum(axis=axis, keepdims=keepdims), (a,), back)


def reshape(a: Tensor, shape) -> Tensor:
    old = a.shape
    return Tensor(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def getitem(a: Tensor, key) -> Tensor:
    shape, dtype = a.shape, a.dtype

    def back(g):
        out = np.zeros(shape, dtype=dtype)
        np.add.at(out, key, g)
        return (out,)

    return Tensor(a.data[key], (a,), back)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Rows of ``table`` selected by integer array ``ids`` (any shape)."""
    ids = np.asarray(ids)

    def back(g):
        out = np.zeros_like(table.data)
        np.add.at(out, ids.reshape(-1), g.reshape(-1, table.shape[-1]))
        return (out,)

    return Tensor(table.data[ids], (table,), back)


def concat(xs: Sequence[Tensor], axis: int = -1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    sizes = np.cumsum([x.shape[axis] for x in xs])[:-1]
    return Tensor(np.concatenate([x.data for x in xs], axis=axis), tuple(xs),
                  lambda g: tuple(np.split(g, sizes, axis=axis)))


def stack(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    xs = [as_tensor(x) for x in xs]

    def back(g):
        return tuple(np.moveaxis(g, axis, 0))

    return Tensor(np.stack([x.data for x in xs], axis=axis), tuple(xs), back)


def softmax(scores: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Softmax over the last axis; entries where ``mask`` is False get probability 0."""
    x = scores.data
    if mask is not None:
        x = np.where(mask, x, -np.inf)
    x = x - x.max(axis=-1, keepdims=True)
    e = np.exp(x)
    y = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        return ((g - (g * y).sum(axis=-1, keepdims=True)) * y,)

    return Tensor(y, (scores,), back)


def weighted_sum(weights: Tensor, values: Tensor) -> Tensor:
    """out[b] = sum_i weights[b, i] * values[b, i, :]."""
    w, v = weights.data, values.data

    def back(g):
        return np.einsum("bd,bid->bi", g, v), w[:, :, None] * g[:, None, :]

    return Tensor(np.einsum("bi,bid->bd", w, v), (weights, values), back)


def cross_entropy(logits: Tensor, targets: np.ndarray, weights: np.ndarray | None = None) -> Tensor:
    """Summed negative log-likelihood of integer ``targets`` under softmax(``logits``).

    ``logits`` is (N, V); ``weights`` (N,) scales each row's term (0 drops padding).
    """
    z = logits.data
    n = z.shape[0]
    targets = np.asarray(targets)
    w = np.ones(n, dtype=z.dtype) if weights is None else np.asarray(weights, dtype=z.dtype)
    m = z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z - m).sum(axis=1, keepdims=True)) + m
    logp = z - lse
    loss = -(w * logp[np.arange(n), targets]).sum()

    def back(g):
        p = np.exp(logp)
        p[np.arange(n), targets] -= 1.0
        return (g * w[:, None] * p,)

    return Tensor(np.asarray(loss, dtype=z.dtype), (logits,), back)


def gru_cell(gx: Tensor, h: Tensor, w_h: Tensor, b_h: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """One GRU transition given the precomputed input projection ``gx`` (B, 3H).

    Gate order in the 3H axis is (reset, update, candidate). Rows where
    ``mask`` (B, 1) is 0 keep their previous state.
    """
    H = h.shape[-1]
    gh = h.data @ w_h.data + b_h.data
    xr, xz, xn = gx.data[:, :H], gx.data[:, H:2 * H], gx.data[:, 2 * H:]
    hr, hz, hn = gh[:, :H], gh[:, H:2 * H], gh[:, 2 * H:]
    r = _sigmoid(xr + hr)
    z = _sigmoid(xz + hz)
    n = np.tanh(xn + r * hn)
    h_new = (1.0 - z) * n + z * h.data
    if mask is not None:
        h_new = mask * h_new + (1.0 - mask) * h.data

    def back(g):
        if mask is not None:
            g_keep = g * (1.0 - mask)
            g = g * mask
        else:
            g_keep = 0.0
        dn = g * (1.0 - z)
        dz = g * (h.data - n)
        dan = dn * (1.0 - n * n)
        dar = dan * hn * r * (1.0 - r)
        daz = dz * z * (1.0 - z)
        dgx = np.concatenate([dar, daz, dan], axis=1)
        dgh = np.concatenate([dar, daz, dan * r], axis=1)
        dh = g * z + dgh @ w_h.data.T + g_keep
        return dgx, dh, h.data.T @ dgh, dgh.sum(axis=0)

    return Tensor(h_new, (gx, h, w_h, b_h), back)
