"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

A Tensor wraps an ndarray; operations build a tape of parent links and
vector-Jacobian closures. ``backward`` runs one reverse sweep and
accumulates gradients into every reachable tensor's ``grad`` buffer.
Parameters are plain leaf tensors reused across tapes, so gradients
accumulate until ``zero_grads`` is called. Single-writer semantics: tapes
are built and swept on one thread.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf, expit

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class Tensor:
    __slots__ = ("value", "grad", "parents", "vjps", "requires_grad")

    def __init__(self, value, requires_grad: bool = False, parents=(), vjps=()):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.parents = parents
        self.vjps = vjps
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def item(self) -> float:
        return float(self.value)

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, grad={'set' if self.grad is not None else 'none'})"

    # operator sugar
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __neg__(self):
        return mul(self, _as_tensor(-1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(value) -> Tensor:
    return Tensor(np.array(value, dtype=np.float64), requires_grad=True)


def _make(value, parents, vjps) -> Tensor:
    return Tensor(value, requires_grad=False, parents=tuple(parents), vjps=tuple(vjps))


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` along axes that were broadcast."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def backward(out: Tensor, seed=None) -> None:
    """Reverse sweep from ``out``; accumulates into ``grad`` of every tensor
    on the tape (lazily allocated)."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(out, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    if out.grad is None:
        out.grad = np.zeros_like(out.value)
    out.grad = out.grad + (np.ones_like(out.value) if seed is None else np.asarray(seed, dtype=np.float64))
    for node in reversed(order):
        if node.grad is None:
            continue
        g = node.grad
        for parent, vjp in zip(node.parents, node.vjps):
            contrib = vjp(g)
            if parent.grad is None:
                parent.grad = np.zeros_like(parent.value)
            parent.grad += contrib
        if not node.requires_grad:
            node.grad = None  # free intermediate buffers


# ---------------------------------------------------------------------------
# primitive operations


def add(a: Tensor, b: Tensor) -> Tensor:
    return _make(a.value + b.value, (a, b), (
        lambda g: _unbroadcast(g, a.shape),
        lambda g: _unbroadcast(g, b.shape),
    ))


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _make(a.value - b.value, (a, b), (
        lambda g: _unbroadcast(g, a.shape),
        lambda g: _unbroadcast(-g, b.shape),
    ))


def mul(a: Tensor, b: Tensor) -> Tensor:
    return _make(a.value * b.value, (a, b), (
        lambda g: _unbroadcast(g * b.value, a.shape),
        lambda g: _unbroadcast(g * a.value, b.shape),
    ))


def div(a: Tensor, b: Tensor) -> Tensor:
    return _make(a.value / b.value, (a, b), (
        lambda g: _unbroadcast(g / b.value, a.shape),
        lambda g: _unbroadcast(-g * a.value / (b.value * b.value), b.shape),
    ))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError(f"matmul requires >=2-D operands, got {a.shape} @ {b.shape}")
    value = a.value @ b.value

    def grad_a(g):
        return _unbroadcast(g @ np.swapaxes(b.value, -1, -2), a.shape)

    def grad_b(g):
        return _unbroadcast(np.swapaxes(a.value, -1, -2) @ g, b.shape)

    return _make(value, (a, b), (grad_a, grad_b))


def getitem(a: Tensor, index) -> Tensor:
    def grad_a(g):
        buf = np.zeros_like(a.value)
        np.add.at(buf, index, g)
        return buf

    return _make(a.value[index], (a,), (grad_a,))


def reshape(a: Tensor, shape) -> Tensor:
    return _make(a.value.reshape(shape), (a,), (lambda g: g.reshape(a.shape),))


def transpose(a: Tensor, axes) -> Tensor:
    inverse = tuple(np.argsort(axes))
    return _make(a.value.transpose(axes), (a,), (lambda g: g.transpose(inverse),))


def broadcast_to(a: Tensor, shape) -> Tensor:
    return _make(np.broadcast_to(a.value, shape).copy(), (a,),
                 (lambda g: _unbroadcast(g, a.shape),))


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def make_vjp(i):
        def vjp(g):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(int(offsets[i]), int(offsets[i + 1]))
            return g[tuple(sl)]
        return vjp

    return _make(np.concatenate([t.value for t in tensors], axis=axis),
                 tuple(tensors), tuple(make_vjp(i) for i in range(len(tensors))))


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    def grad_a(g):
        if axis is None:
            return np.broadcast_to(g, a.shape).copy()
        gg = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(gg, a.shape).copy()

    return _make(a.value.sum(axis=axis, keepdims=keepdims), (a,), (grad_a,))


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        n = a.value.size
    else:
        n = a.shape[axis]
    return mul(sum_(a, axis=axis, keepdims=keepdims), _as_tensor(1.0 / n))


def power(a: Tensor, p: float) -> Tensor:
    value = a.value ** p
    return _make(value, (a,), (lambda g: g * p * a.value ** (p - 1.0),))


def sqrt(a: Tensor) -> Tensor:
    return power(a, 0.5)


def exp(a: Tensor) -> Tensor:
    value = np.exp(a.value)
    return _make(value, (a,), (lambda g: g * value,))


def log(a: Tensor) -> Tensor:
    return _make(np.log(a.value), (a,), (lambda g: g / a.value,))


def tanh(a: Tensor) -> Tensor:
    value = np.tanh(a.value)
    return _make(value, (a,), (lambda g: g * (1.0 - value * value),))


def sigmoid(a: Tensor) -> Tensor:
    value = expit(a.value)
    return _make(value, (a,), (lambda g: g * value * (1.0 - value),))


def relu(a: Tensor) -> Tensor:
    mask = a.value > 0.0
    return _make(a.value * mask, (a,), (lambda g: g * mask,))


def gelu(a: Tensor) -> Tensor:
    """Exact (erf-based) Gaussian error linear unit."""
    x = a.value
    cdf = 0.5 * (1.0 + erf(x / _SQRT2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return _make(x * cdf, (a,), (lambda g: g * (cdf + x * pdf),))


def softplus(a: Tensor) -> Tensor:
    """log(1 + exp(x)), computed stably; derivative is sigmoid(x)."""
    x = a.value
    value = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return _make(value, (a,), (lambda g: g * expit(x),))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    value = e / e.sum(axis=axis, keepdims=True)

    def grad_a(g):
        return value * (g - (g * value).sum(axis=axis, keepdims=True))

    return _make(value, (a,), (grad_a,))


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.value - a.value.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    value = shifted - lse

    def grad_a(g):
        return g - np.exp(value) * g.sum(axis=axis, keepdims=True)

    return _make(value, (a,), (grad_a,))


def zero_grads(tensors) -> None:
    for t in tensors:
        t.grad = None
