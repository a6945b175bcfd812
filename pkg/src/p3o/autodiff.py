"""Minimal reverse-mode differentiation on dense float64 arrays.

The graph is recorded implicitly while expressions are built: every
:class:`Var` keeps references to its parent nodes and a closure that
propagates an incoming gradient to them.  ``tape(root)`` recovers the
recorded operation list in dependency order; ``backward(loss)`` walks it
once in reverse, accumulating gradients into every reachable leaf.

Supported shapes are scalars, vectors and matrices.  Binary operations
broadcast a scalar or a row vector across a matrix (the matrix-vector
case); nothing fancier is implemented on purpose.
"""

from __future__ import annotations

import itertools
from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when operand dimensions do not line up."""

    def __init__(self, op: str, *shapes: tuple) -> None:
        super().__init__(f"{op}: incompatible shapes {' vs '.join(map(str, shapes))}")
        self.op = op
        self.shapes = shapes


def dense(data, *, what: str = "tensor") -> np.ndarray:
    """Validate and return a C-contiguous float64 array.

    Rejects NaN/Inf entries; this is the constructor used at all module
    boundaries (parameters, observations, recorded batches).
    """
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim and not arr.flags["C_CONTIGUOUS"]:
        arr = np.ascontiguousarray(arr)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what}: non-finite entries rejected")
    return arr


_uid_counter = itertools.count()


class Var:
    """A node in the computation graph holding a float64 array."""

    __slots__ = ("data", "grad", "parents", "_backward", "requires_grad", "uid")

    def __init__(
        self,
        data: np.ndarray,
        parents: tuple["Var", ...] = (),
        backward: Callable[[np.ndarray], None] | None = None,
        requires_grad: bool = False,
    ) -> None:
        self.data = data
        self.grad: np.ndarray | None = None
        self.parents = parents
        self._backward = backward
        self.requires_grad = requires_grad
        self.uid = next(_uid_counter)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Var(shape={self.data.shape}, grad={'set' if self.grad is not None else 'none'})"

    # operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def leaf(data, requires_grad: bool = True) -> Var:
    """A graph leaf (parameter or input); data validated on construction."""
    return Var(dense(data, what="leaf"), requires_grad=requires_grad)


def constant(data) -> Var:
    """A non-differentiable node."""
    return Var(dense(data, what="constant"))


def _wrap(x) -> Var:
    if isinstance(x, Var):
        return x
    return Var(np.asarray(x, dtype=np.float64))


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, extent in enumerate(shape):
        if extent == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


def _binary(op: str, a, b, fwd, da, db) -> Var:
    a, b = _wrap(a), _wrap(b)
    try:
        out = fwd(a.data, b.data)
    except ValueError as exc:
        raise ShapeError(op, a.shape, b.shape) from exc
    req = a.requires_grad or b.requires_grad

    def bwd(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, _unbroadcast(da(g, a.data, b.data), a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(db(g, a.data, b.data), b.data.shape))

    return Var(out, (a, b), bwd if req else None, req)


def _accumulate(v: Var, g: np.ndarray) -> None:
    if v.grad is None:
        v.grad = np.zeros_like(v.data)
    v.grad += g


def add(a, b) -> Var:
    return _binary("add", a, b, lambda x, y: x + y, lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b) -> Var:
    return _binary("sub", a, b, lambda x, y: x - y, lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b) -> Var:
    return _binary("mul", a, b, lambda x, y: x * y, lambda g, x, y: g * y, lambda g, x, y: g * x)


def div(a, b) -> Var:
    return _binary(
        "div",
        a,
        b,
        lambda x, y: x / y,
        lambda g, x, y: g / y,
        lambda g, x, y: -g * x / (y * y),
    )


def neg(a: Var) -> Var:
    a = _wrap(a)

    def bwd(g):
        _accumulate(a, -g)

    return Var(-a.data, (a,), bwd if a.requires_grad else None, a.requires_grad)


def matmul(a, b) -> Var:
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim not in (1, 2) or b.data.ndim not in (1, 2):
        raise ShapeError("matmul", a.shape, b.shape)
    try:
        out = a.data @ b.data
    except ValueError as exc:
        raise ShapeError("matmul", a.shape, b.shape) from exc
    req = a.requires_grad or b.requires_grad

    def bwd(g: np.ndarray) -> None:
        xa, xb = a.data, b.data
        if a.requires_grad:
            if xa.ndim == 2 and xb.ndim == 2:
                _accumulate(a, g @ xb.T)
            elif xa.ndim == 2 and xb.ndim == 1:
                _accumulate(a, np.outer(g, xb))
            else:  # xa 1-D, xb 2-D
                _accumulate(a, xb @ g)
        if b.requires_grad:
            if xa.ndim == 2 and xb.ndim == 2:
                _accumulate(b, xa.T @ g)
            elif xa.ndim == 2 and xb.ndim == 1:
                _accumulate(b, xa.T @ g)
            else:
                _accumulate(b, np.outer(xa, g))

    return Var(out, (a, b), bwd if req else None, req)


def _unary(a, fwd, dfn) -> Var:
    a = _wrap(a)
    out = fwd(a.data)

    def bwd(g):
        _accumulate(a, dfn(g, a.data, out))

    return Var(out, (a,), bwd if a.requires_grad else None, a.requires_grad)


def tanh(a) -> Var:
    return _unary(a, np.tanh, lambda g, x, y: g * (1.0 - y * y))


def exp(a) -> Var:
    return _unary(a, np.exp, lambda g, x, y: g * y)


def log(a) -> Var:
    return _unary(a, np.log, lambda g, x, y: g / x)


def square(a) -> Var:
    return _unary(a, np.square, lambda g, x, y: g * 2.0 * x)


def relu(a) -> Var:
    """max(0, x); subgradient 0 at the kink (x == 0 contributes nothing)."""
    return _unary(a, lambda x: np.maximum(x, 0.0), lambda g, x, y: g * (x > 0.0))


def clip(a, lo: float, hi: float) -> Var:
    """Hard saturation; gradient 1 inside [lo, hi], 0 outside."""
    return _unary(
        a,
        lambda x: np.clip(x, lo, hi),
        lambda g, x, y: g * ((x >= lo) & (x <= hi)),
    )


def minimum(a, b) -> Var:
    """Elementwise min; gradient follows the smaller branch (ties -> first)."""
    return _binary(
        "minimum",
        a,
        b,
        np.minimum,
        lambda g, x, y: g * (x <= y),
        lambda g, x, y: g * (y < x),
    )


def maximum(a, b) -> Var:
    """Elementwise max; gradient follows the larger branch (ties -> first)."""
    return _binary(
        "maximum",
        a,
        b,
        np.maximum,
        lambda g, x, y: g * (x >= y),
        lambda g, x, y: g * (y > x),
    )


def vsum(a, axis: int | None = None) -> Var:
    a = _wrap(a)
    out = np.asarray(a.data.sum(axis=axis))

    def bwd(g):
        if axis is None:
            _accumulate(a, np.broadcast_to(g, a.data.shape).copy())
        else:
            _accumulate(a, np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy())

    return Var(out, (a,), bwd if a.requires_grad else None, a.requires_grad)


def mean(a, axis: int | None = None) -> Var:
    a = _wrap(a)
    n = a.data.size if axis is None else a.data.shape[axis]
    if n == 0:
        raise ValueError("mean: empty input")
    return mul(vsum(a, axis=axis), 1.0 / n)


def gather_rows(a, index: np.ndarray) -> Var:
    """Pick a[i, index[i]] for each row i of a matrix."""
    a = _wrap(a)
    if a.data.ndim != 2:
        raise ShapeError("gather_rows", a.shape)
    idx = np.asarray(index, dtype=np.intp)
    if idx.ndim != 1 or idx.shape[0] != a.data.shape[0]:
        raise ShapeError("gather_rows", a.shape, idx.shape)
    if idx.size and (idx.min() < 0 or idx.max() >= a.data.shape[1]):
        raise IndexError("gather_rows: index out of range")
    rows = np.arange(a.data.shape[0])
    out = a.data[rows, idx]

    def bwd(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, (rows, idx), g)
        _accumulate(a, ga)

    return Var(out, (a,), bwd if a.requires_grad else None, a.requires_grad)


def log_softmax(a, axis: int = -1) -> Var:
    a = _wrap(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - logz

    def bwd(g):
        soft = np.exp(out)
        _accumulate(a, g - soft * g.sum(axis=axis, keepdims=True))

    return Var(out, (a,), bwd if a.requires_grad else None, a.requires_grad)


def concat(parts: Sequence[Var], axis: int = 0) -> Var:
    parts = [_wrap(p) for p in parts]
    out = np.concatenate([p.data for p in parts], axis=axis)
    req = any(p.requires_grad for p in parts)

    def bwd(g):
        offset = 0
        for p in parts:
            extent = p.data.shape[axis]
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(offset, offset + extent)
            if p.requires_grad:
                _accumulate(p, g[tuple(sl)])
            offset += extent

    return Var(out, tuple(parts), bwd if req else None, req)


def tape(root: Var) -> list[Var]:
    """The recorded operations reachable from `root`, dependency-ordered.

    The returned order is a topological order of the (acyclic) graph, so a
    reverse walk visits every node exactly once with all downstream
    gradients already accumulated.
    """
    order: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if node.uid in seen:
            continue
        seen.add(node.uid)
        stack.append((node, True))
        for parent in node.parents:
            if parent.uid not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Var) -> None:
    """Accumulate d(loss)/d(node) into `.grad` of every reachable node.

    The loss must be scalar.  Leaves that the loss does not depend on keep
    ``grad is None``; callers treat that as a zero gradient.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward: loss must be scalar, got shape {loss.data.shape}")
    loss.grad = np.ones_like(loss.data)
    for node in reversed(tape(loss)):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
