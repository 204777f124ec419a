"""Reverse-mode automatic differentiation over numpy arrays.

A :class:`Var` wraps a float64 array together with the inputs that produced
it and one vector-Jacobian product per input.  :func:`backward` walks the
graph once from a scalar root and accumulates gradients into ``.grad``.

The op set is deliberately small: elementwise arithmetic, batched matrix
multiply and linear solve, a few activations, reductions, and shape
plumbing.  Everything broadcasts like numpy; gradients are summed back down
to each input's shape.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit


class Var:
    """One node of the computation graph."""

    __slots__ = ("value", "grad", "_parents", "_vjps")

    def __init__(self, value, _parents: tuple = (), _vjps: tuple = ()):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self._parents = _parents
        self._vjps = _vjps

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Var(shape={self.value.shape}, leaf={not self._parents})"


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def backward(root: Var) -> None:
    """Accumulate gradients of a scalar root into every reachable Var."""
    if root.value.ndim != 0:
        raise ValueError("backward expects a scalar root")
    # Iterative depth-first postorder; training graphs get deep.
    order: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    root.grad = np.ones((), dtype=np.float64)
    for node in reversed(order):
        g = node.grad
        if g is None:
            continue
        for parent, vjp in zip(node._parents, node._vjps):
            contrib = vjp(g)
            parent.grad = contrib if parent.grad is None else parent.grad + contrib


def add(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    return Var(
        a.value + b.value,
        (a, b),
        (lambda g: _unbroadcast(g, a.value.shape), lambda g: _unbroadcast(g, b.value.shape)),
    )


def sub(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    return Var(
        a.value - b.value,
        (a, b),
        (lambda g: _unbroadcast(g, a.value.shape), lambda g: _unbroadcast(-g, b.value.shape)),
    )


def mul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    return Var(
        a.value * b.value,
        (a, b),
        (
            lambda g: _unbroadcast(g * b.value, a.value.shape),
            lambda g: _unbroadcast(g * a.value, b.value.shape),
        ),
    )


def neg(a) -> Var:
    a = as_var(a)
    return Var(-a.value, (a,), (lambda g: -g,))


def scale(a, s: float) -> Var:
    a = as_var(a)
    return Var(a.value * s, (a,), (lambda g: g * s,))


def matmul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    if a.value.ndim < 2 or b.value.ndim < 2:
        raise ValueError("matmul operands must be at least 2-d")
    out = a.value @ b.value

    def ga(g):
        return _unbroadcast(g @ np.swapaxes(b.value, -1, -2), a.value.shape)

    def gb(g):
        return _unbroadcast(np.swapaxes(a.value, -1, -2) @ g, b.value.shape)

    return Var(out, (a, b), (ga, gb))


def transpose_last(a) -> Var:
    a = as_var(a)
    return Var(np.swapaxes(a.value, -1, -2), (a,), (lambda g: np.swapaxes(g, -1, -2),))


def relu(a) -> Var:
    a = as_var(a)
    mask = a.value > 0
    return Var(np.where(mask, a.value, 0.0), (a,), (lambda g: g * mask,))


def softplus(a) -> Var:
    a = as_var(a)
    return Var(np.logaddexp(0.0, a.value), (a,), (lambda g: g * expit(a.value),))


def mean(a, axis=None, keepdims: bool = False) -> Var:
    a = as_var(a)
    out = a.value.mean(axis=axis, keepdims=keepdims)
    count = a.value.size / max(out.size, 1)

    def vjp(g):
        g = np.asarray(g)
        if not keepdims and axis is not None:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, a.value.shape) / count

    return Var(out, (a,), (vjp,))


def vsum(a, axis=None, keepdims: bool = False) -> Var:
    a = as_var(a)
    out = a.value.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        g = np.asarray(g)
        if not keepdims and axis is not None:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, a.value.shape).copy()

    return Var(out, (a,), (vjp,))


def reshape(a, shape: Sequence[int]) -> Var:
    a = as_var(a)
    shape = tuple(shape)
    return Var(a.value.reshape(shape), (a,), (lambda g: g.reshape(a.value.shape),))


def concat(parts: Iterable, axis: int = -1) -> Var:
    parts = [as_var(p) for p in parts]
    values = [p.value for p in parts]
    out = np.concatenate(values, axis=axis)
    sizes = [v.shape[axis] for v in values]
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    vjps = []
    for i, p in enumerate(parts):
        def vjp(g, i=i):
            ax = axis if axis >= 0 else g.ndim + axis
            sl = [slice(None)] * g.ndim
            sl[ax] = slice(int(offsets[i]), int(offsets[i + 1]))
            return g[tuple(sl)]

        vjps.append(vjp)
    return Var(out, tuple(parts), tuple(vjps))


def diag_embed(a) -> Var:
    """Expand a (..., n) vector into a (..., n, n) diagonal matrix."""
    a = as_var(a)
    n = a.value.shape[-1]
    out = np.zeros(a.value.shape + (n,), dtype=np.float64)
    idx = np.arange(n)
    out[..., idx, idx] = a.value
    return Var(out, (a,), (lambda g: np.diagonal(g, axis1=-2, axis2=-1).copy(),))


def solve(a, b) -> Var:
    """Batched linear solve a @ x = b with gradients for both operands."""
    a, b = as_var(a), as_var(b)
    x = np.linalg.solve(a.value, b.value)
    at = np.swapaxes(a.value, -1, -2)

    def gb(g):
        return _unbroadcast(np.linalg.solve(at, g), b.value.shape)

    def ga(g):
        gb_full = np.linalg.solve(at, g)
        return _unbroadcast(-gb_full @ np.swapaxes(x, -1, -2), a.value.shape)

    return Var(x, (a, b), (ga, gb))


def mse(a, b) -> Var:
    d = sub(a, b)
    return mean(mul(d, d))
