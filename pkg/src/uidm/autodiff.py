"""Minimal dense-array reverse-mode autodiff engine.

Everything is float64. Tensors form an acyclic computation graph; calling
``backward`` on a scalar loss accumulates gradients into the ``grad`` slot
of every reachable tensor that requires them. Gradients are *accumulated*
(``+=``) across backward calls and are only cleared explicitly (the
optimizer does this after each step).

Scope is deliberately small: 2-D matrices and scalars, no broadcasting
beyond bias-row addition, no views, single-threaded.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from .errors import ConfigError, DimensionError, NumericError

LOG_FLOOR = 1e-12

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph construction inside the block (inference paths)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A float64 array with an optional gradient and graph linkage."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, delta):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += delta

    def zero_grad(self):
        self.grad = None

    # -- graph plumbing ------------------------------------------------

    def backward(self):
        """Reverse-topological gradient propagation from a scalar loss.

        Seeds the output gradient with 1.0 and visits every node exactly
        once. Raises if called on a non-scalar tensor.
        """
        if self.data.size != 1:
            raise ValueError(
                f"backward requires a scalar loss, got shape {self.shape}"
            )
        order = _toposort(self)
        self._accumulate(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    # -- operator sugar --------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self):
        return tsum(self)

    def mean(self):
        return tmean(self)


def _toposort(root):
    """Iterative post-order over the graph; each node appears once."""
    order = []
    visited = set()
    stack = [(root, iter(root._parents))]
    visited.add(id(root))
    while stack:
        node, parents = stack[-1]
        advanced = False
        for parent in parents:
            if id(parent) not in visited:
                visited.add(id(parent))
                stack.append((parent, iter(parent._parents)))
                advanced = True
                break
        if not advanced:
            order.append(node)
            stack.pop()
    return order


def _make(data, parents, backward_fn):
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _check_same_shape(a, b, op):
    if a.data.shape != b.data.shape:
        raise DimensionError(
            f"{op}: operand shapes {a.data.shape} and {b.data.shape} differ"
        )


# -- elementwise ops ------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; also accepts a bias row (n,) added to every row."""
    if a.data.shape != b.data.shape:
        if not (a.data.ndim == 2 and b.data.ndim == 1
                and a.data.shape[1] == b.data.shape[0]):
            raise DimensionError(
                f"add: operand shapes {a.data.shape} and {b.data.shape} differ"
            )

        def backward_bias(g):
            if a.requires_grad:
                a._accumulate(g)
            if b.requires_grad:
                b._accumulate(g.sum(axis=0))

        return _make(a.data + b.data, (a, b), backward_bias)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(g)

    return _make(a.data + b.data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "sub")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(-g)

    return _make(a.data - b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "mul")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * b.data)
        if b.requires_grad:
            b._accumulate(g * a.data)

    return _make(a.data * b.data, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    def backward(g):
        if a.requires_grad:
            a._accumulate(-g)

    return _make(-a.data, (a,), backward)


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a python constant (not a graph node)."""
    c = float(c)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * c)

    return _make(a.data * c, (a,), backward)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0.0

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * mask)

    return _make(a.data * mask, (a,), backward)


def log(a: Tensor) -> Tensor:
    """Natural log with inputs clamped to >= LOG_FLOOR.

    The clamp keeps one-hot probability rows finite; below the floor the
    output is constant, so the gradient there is zero.
    """
    clamped = np.maximum(a.data, LOG_FLOOR)
    mask = a.data >= LOG_FLOOR

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * mask / clamped)

    return _make(np.log(clamped), (a,), backward)


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * out_data)

    return _make(out_data, (a,), backward)


# -- matrix / reduction ops -------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise DimensionError(
            f"matmul: expected 2-D operands, got {a.data.shape} @ {b.data.shape}"
        )
    if a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(
            f"matmul: inner dims {a.data.shape} @ {b.data.shape} do not agree"
        )

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return _make(a.data @ b.data, (a, b), backward)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise DimensionError(f"transpose: expected a 2-D matrix, got {a.data.shape}")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.T)

    return _make(np.ascontiguousarray(a.data.T), (a,), backward)


def tsum(a: Tensor) -> Tensor:
    def backward(g):
        if a.requires_grad:
            a._accumulate(np.full_like(a.data, float(g)))

    return _make(a.data.sum(), (a,), backward)


def tmean(a: Tensor) -> Tensor:
    n = a.data.size

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.full_like(a.data, float(g) / n))

    return _make(a.data.mean(), (a,), backward)


def softmax(logits: Tensor) -> Tensor:
    """Row-wise softmax of a (B, K) matrix, max-shifted for stability."""
    if logits.data.ndim != 2:
        raise DimensionError(
            f"softmax: expected a 2-D batch of logits, got {logits.data.shape}"
        )
    if np.isnan(logits.data).any():
        raise NumericError("softmax: NaN in logits")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=1, keepdims=True)

    def backward(g):
        if logits.requires_grad:
            inner = (g * p).sum(axis=1, keepdims=True)
            logits._accumulate(p * (g - inner))

    return _make(p, (logits,), backward)


def dropout(x: Tensor, rate: float, active: bool, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: zero with probability ``rate``, scale by 1/(1-rate).

    When inactive (or rate == 0) this is the identity and consumes no
    randomness from ``rng``.
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if not active or rate == 0.0:
        return x
    keep = rng.random(x.data.shape) >= rate
    scaled_mask = keep / (1.0 - rate)

    def backward(g):
        if x.requires_grad:
            x._accumulate(g * scaled_mask)

    return _make(x.data * scaled_mask, (x,), backward)


def l2_normalize_rows(x: Tensor, eps: float = 1e-12) -> Tensor:
    """Scale each row of a (B, n) matrix to unit L2 norm."""
    if x.data.ndim != 2:
        raise DimensionError(
            f"l2_normalize_rows: expected a 2-D matrix, got {x.data.shape}"
        )
    norms = np.sqrt((x.data ** 2).sum(axis=1, keepdims=True))
    norms = np.maximum(norms, eps)
    y = x.data / norms

    def backward(g):
        if x.requires_grad:
            # d(x/||x||) projects the upstream grad off the output direction
            inner = (g * y).sum(axis=1, keepdims=True)
            x._accumulate((g - y * inner) / norms)

    return _make(y, (x,), backward)
