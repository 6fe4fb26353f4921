"""Define-by-run reverse-mode gradient tape over float64 numpy arrays.

A graph is rebuilt for every batch. Each node wraps a forward value plus a
closure routing the incoming gradient to its parents. Only the op set needed
by the adaptation loss graph exists here, so unsupported structures cannot be
built in the first place: shape or domain violations raise while the graph is
constructed, never during backward.

Selection indices (token gather/scatter rows, routing choices) are plain
Python data, never nodes: no gradient flows through them. Gradients flow only
into nodes created with `parameter`; everything wrapped by `constant` is
frozen and its subtree is skipped entirely during backward.

One tape (graph) belongs to one adaptation stream; nothing here is shared
between threads.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

_GELU_C = math.sqrt(2.0 / math.pi)


class Value:
    """One node: forward array, gradient slot, and the backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(
        self,
        data: np.ndarray,
        requires_grad: bool = False,
        name: str | None = None,
        parents: tuple["Value", ...] = (),
        backward: Callable[[np.ndarray], None] | None = None,
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        tag = self.name or "value"
        return f"Value({tag}, shape={self.data.shape}, grad={self.requires_grad})"


def parameter(data: np.ndarray, name: str) -> Value:
    """Trainable leaf. `backward` collects gradients for these, keyed by name."""
    return Value(data, requires_grad=True, name=name)


def constant(data: np.ndarray) -> Value:
    """Frozen leaf; backward never descends into it."""
    return Value(data, requires_grad=False)


def _acc(node: Value, g: np.ndarray) -> None:
    # Never mutates an existing grad buffer in place; `g` may alias the
    # child's grad (e.g. plain adds pass it through untouched).
    if node.requires_grad:
        node.grad = g if node.grad is None else node.grad + g


def _node(data, parents, backward) -> Value:
    req = any(p.requires_grad for p in parents)
    return Value(data, requires_grad=req, parents=parents, backward=backward if req else None)


def _check2d(v: Value, op: str) -> None:
    if v.data.ndim != 2:
        raise ValueError(f"{op} expects a 2-D operand, got shape {v.data.shape}")


# ---------------------------------------------------------------------------
# ops


def matmul(a: Value, b: Value, ta: bool = False, tb: bool = False) -> Value:
    """Matrix product with optionally transposed operands."""
    _check2d(a, "matmul")
    _check2d(b, "matmul")
    aeff = a.data.T if ta else a.data
    beff = b.data.T if tb else b.data
    if aeff.shape[1] != beff.shape[0]:
        raise ValueError(f"matmul shape mismatch: {aeff.shape} @ {beff.shape}")
    out = aeff @ beff

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            da = g @ beff.T
            _acc(a, da.T if ta else da)
        if b.requires_grad:
            db = aeff.T @ g
            _acc(b, db.T if tb else db)

    return _node(out, (a, b), backward)


def add(a: Value, b: Value) -> Value:
    if a.data.shape != b.data.shape:
        raise ValueError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = a.data + b.data

    def backward(g: np.ndarray) -> None:
        _acc(a, g)
        _acc(b, g)

    return _node(out, (a, b), backward)


def smul(a: Value, s: float) -> Value:
    """Multiply by a Python float constant."""
    s = float(s)
    out = a.data * s

    def backward(g: np.ndarray) -> None:
        _acc(a, g * s)

    return _node(out, (a,), backward)


def broadcast_add(m: Value, v: Value) -> Value:
    """Add a length-D row vector to every row of a T x D matrix."""
    _check2d(m, "broadcast_add")
    if v.data.ndim != 1 or v.data.shape[0] != m.data.shape[1]:
        raise ValueError(f"broadcast_add expects vector of length {m.data.shape[1]}, got {v.data.shape}")
    out = m.data + v.data[None, :]

    def backward(g: np.ndarray) -> None:
        _acc(m, g)
        _acc(v, g.sum(axis=0))

    return _node(out, (m, v), backward)


def gelu(x: Value) -> Value:
    """tanh-approximation GELU with its exact derivative."""
    d = x.data
    inner = _GELU_C * (d + 0.044715 * d**3)
    t = np.tanh(inner)
    out = 0.5 * d * (1.0 + t)

    def backward(g: np.ndarray) -> None:
        dinner = _GELU_C * (1.0 + 3.0 * 0.044715 * d**2)
        deriv = 0.5 * (1.0 + t) + 0.5 * d * (1.0 - t**2) * dinner
        _acc(x, g * deriv)

    return _node(out, (x,), backward)


def relu(x: Value) -> Value:
    out = np.maximum(x.data, 0.0)

    def backward(g: np.ndarray) -> None:
        _acc(x, g * (x.data > 0.0))

    return _node(out, (x,), backward)


def softmax_rows(x: Value) -> Value:
    """Row-wise stable softmax of a 2-D array."""
    _check2d(x, "softmax_rows")
    d = x.data
    shifted = d - d.max(axis=1, keepdims=True) if d.size else d
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True) if d.size else e

    def backward(g: np.ndarray) -> None:
        dot = (g * y).sum(axis=1, keepdims=True)
        _acc(x, (g - dot) * y)

    return _node(y, (x,), backward)


def layer_norm(x: Value, gamma: Value, beta: Value, eps: float = 1e-5) -> Value:
    """Per-row layer normalization with learned gain and shift."""
    _check2d(x, "layer_norm")
    dim = x.data.shape[1]
    if gamma.data.shape != (dim,) or beta.data.shape != (dim,):
        raise ValueError("layer_norm gain/shift must be length-D vectors")
    mu = x.data.mean(axis=1, keepdims=True)
    xc = x.data - mu
    var = (xc**2).mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data[None, :] + beta.data[None, :]

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            dxhat = g * gamma.data[None, :]
            term = dim * dxhat - dxhat.sum(axis=1, keepdims=True) - xhat * (dxhat * xhat).sum(axis=1, keepdims=True)
            _acc(x, inv / dim * term)
        _acc(gamma, (g * xhat).sum(axis=0))
        _acc(beta, g.sum(axis=0))

    return _node(out, (x, gamma, beta), backward)


def gather_rows(x: Value, idx: Sequence[int]) -> Value:
    """Select rows; the index list is a constant (stop-gradient)."""
    _check2d(x, "gather_rows")
    idx = np.asarray(idx, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= x.data.shape[0]):
        raise ValueError("gather_rows index out of range")
    out = x.data[idx]

    def backward(g: np.ndarray) -> None:
        dx = np.zeros_like(x.data)
        np.add.at(dx, idx, g)
        _acc(x, dx)

    return _node(out, (x,), backward)


def scatter_rows(x: Value, idx: Sequence[int], num_rows: int) -> Value:
    """Place rows of x at positions idx of a zero-filled (num_rows, D) matrix."""
    _check2d(x, "scatter_rows")
    idx = np.asarray(idx, dtype=np.intp)
    if idx.shape[0] != x.data.shape[0]:
        raise ValueError("scatter_rows needs one target row per input row")
    if idx.size and (idx.min() < 0 or idx.max() >= num_rows):
        raise ValueError("scatter_rows index out of range")
    if idx.size != len(set(idx.tolist())):
        raise ValueError("scatter_rows indices must be distinct")
    out = np.zeros((num_rows, x.data.shape[1]))
    out[idx] = x.data

    def backward(g: np.ndarray) -> None:
        _acc(x, g[idx])

    return _node(out, (x,), backward)


def scale_rows(m: Value, w: Value) -> Value:
    """Scale row t of m by the scalar w[t]; w has shape (T, 1)."""
    _check2d(m, "scale_rows")
    if w.data.shape != (m.data.shape[0], 1):
        raise ValueError(f"scale_rows weight must have shape ({m.data.shape[0]}, 1), got {w.data.shape}")
    out = m.data * w.data

    def backward(g: np.ndarray) -> None:
        _acc(m, g * w.data)
        _acc(w, (g * m.data).sum(axis=1, keepdims=True))

    return _node(out, (m, w), backward)


def entropy_rows(p: Value) -> Value:
    """Shannon entropy of each row of a probability matrix, as a (T, 1) column.

    0 * log 0 is treated as 0; entries must be non-negative.
    """
    _check2d(p, "entropy_rows")
    d = p.data
    if d.size and d.min() < 0.0:
        raise ValueError("negative probability")
    pos = d > 0.0
    plogp = np.where(pos, d * np.log(np.where(pos, d, 1.0)), 0.0)
    out = -plogp.sum(axis=1, keepdims=True)

    def backward(g: np.ndarray) -> None:
        dd = np.where(pos, -(np.log(np.where(pos, d, 1.0)) + 1.0), 0.0)
        _acc(p, g * dd)

    return _node(out, (p,), backward)


def cross_entropy(logits: Value, label: int) -> Value:
    """Stable softmax cross-entropy of a (1, C) logit row against a class id.

    Used for source pretraining and warm-up only; the adaptation loss graph
    never needs it.
    """
    _check2d(logits, "cross_entropy")
    if logits.data.shape[0] != 1:
        raise ValueError("cross_entropy expects a single logit row")
    c = logits.data.shape[1]
    if not 0 <= int(label) < c:
        raise ValueError("label out of range")
    row = logits.data[0]
    m = row.max()
    lse = m + math.log(np.exp(row - m).sum())
    out = np.asarray(lse - row[int(label)])
    probs = np.exp(row - lse)

    def backward(g: np.ndarray) -> None:
        d = probs.copy()
        d[int(label)] -= 1.0
        _acc(logits, float(g) * d[None, :])

    return _node(out, (logits,), backward)


# ---------------------------------------------------------------------------
# composition helpers (no new op kinds)


def sum_all(x: Value) -> Value:
    """Sum of all entries via products with constant ones vectors; (1, 1) result."""
    t, d = x.data.shape
    left = constant(np.ones((1, t)))
    right = constant(np.ones((d, 1)))
    return matmul(matmul(left, x), right)


def add_n(values: Sequence[Value]) -> Value:
    """Balanced add tree over a non-empty list of same-shaped nodes."""
    vals = list(values)
    if not vals:
        raise ValueError("add_n needs at least one node")
    while len(vals) > 1:
        nxt = []
        for i in range(0, len(vals) - 1, 2):
            nxt.append(add(vals[i], vals[i + 1]))
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0]


def mean_of(values: Sequence[Value]) -> Value:
    return smul(add_n(values), 1.0 / len(values))


# ---------------------------------------------------------------------------
# backward


def backward(loss: Value) -> dict[str, np.ndarray]:
    """Reverse-mode gradients of a scalar loss over all trainable leaves.

    Returns {parameter name: gradient array}; empty when the loss depends on
    no trainable parameter. Raises if the loss is not a single scalar.
    """
    if loss.data.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return {}

    topo: list[Value] = []
    seen: set[int] = set()
    stack: list[tuple[Value, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    loss.grad = np.ones_like(loss.data)
    grads: dict[str, np.ndarray] = {}
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    for node in topo:
        if node._backward is None and node.name is not None and node.grad is not None:
            if node.name in grads:
                raise ValueError(f"duplicate parameter name on tape: {node.name}")
            grads[node.name] = node.grad
    return grads
