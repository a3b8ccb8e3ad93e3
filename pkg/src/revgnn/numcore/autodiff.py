"""Reverse-mode differentiation over float64 numpy arrays.

A :class:`Tensor` remembers the primitive that produced it together with a
closure mapping the output adjoint onto adjoints of its inputs.  Calling
:func:`backward` on a scalar walks that graph once in reverse topological
order.  Only tensors that (transitively) require gradients are recorded, so
constants cost nothing beyond the forward computation.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import expit

from ..errors import NumericalError, ShapeError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Evaluate without recording anything on the graph."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "parents", "backward_fn", "op", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.parents: tuple[Tensor, ...] = ()
        self.backward_fn: Callable | None = None
        self.op = "leaf"
        self.name = name

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self.op}{label})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def T(self) -> Tensor:
        return transpose(self)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _not_scalar(self)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def backward(self):
        backward(self)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _not_scalar(t: Tensor):
    raise ShapeError(f"expected a single-element tensor, got shape {t.shape}")


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents: Sequence[Tensor], backward_fn, op: str) -> Tensor:
    data = np.asarray(data, dtype=np.float64)
    if not np.isfinite(data).all():
        raise NumericalError(f"{op} produced non-finite values")
    needs = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs)
    out.op = op
    if needs:
        out.parents = tuple(parents)
        out.backward_fn = backward_fn
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor, op: str):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# -- elementwise arithmetic ------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    return _result(
        a.data + b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def add_bias(x, bias) -> Tensor:
    """Row-wise bias: ``x`` is (rows, k) and ``bias`` has k entries."""
    x, bias = as_tensor(x), as_tensor(bias)
    if x.ndim != 2 or bias.data.size != x.shape[1]:
        raise ShapeError(f"add_bias: bias of size {bias.data.size} for input {x.shape}")
    return add(x, reshape(bias, (1, x.shape[1])))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    return _result(
        a.data - b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    return _result(
        a.data * b.data, (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
        "mul")


elementwise_mul = mul


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "div")
    out = a.data / b.data

    def back(g):
        ga = g / b.data
        return _unbroadcast(ga, a.shape), _unbroadcast(-ga * out, b.shape)

    return _result(out, (a, b), back, "div")


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)
    return _result(out, (x,), lambda g: (g * out,), "exp")


def log(x) -> Tensor:
    x = as_tensor(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(x.data)
    return _result(out, (x,), lambda g: (g / x.data,), "log")


def clip(x, lo: float, hi: float) -> Tensor:
    """Clamp into [lo, hi]; the gradient is zero where clamping was active."""
    x = as_tensor(x)
    inside = (x.data >= lo) & (x.data <= hi)
    return _result(np.clip(x.data, lo, hi), (x,), lambda g: (g * inside,), "clip")


# -- activations -----------------------------------------------------------

def relu(x) -> Tensor:
    x = as_tensor(x)
    positive = x.data > 0
    return _result(np.where(positive, x.data, 0.0), (x,), lambda g: (g * positive,), "relu")


def prelu(x, slope) -> Tensor:
    """PReLU with one learnable scalar slope."""
    x, slope = as_tensor(x), as_tensor(slope)
    if slope.data.size != 1:
        raise ShapeError(f"prelu expects a scalar slope, got shape {slope.shape}")
    a = slope.data.reshape(())
    positive = x.data > 0
    out = np.where(positive, x.data, a * x.data)

    def back(g):
        gx = g * np.where(positive, 1.0, a)
        ga = np.sum(g * np.where(positive, 0.0, x.data))
        return gx, np.full(slope.shape, ga)

    return _result(out, (x, slope), back, "prelu")


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out = expit(x.data)
    return _result(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


# -- reductions and reshaping ----------------------------------------------

def sum(x, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    out = np.sum(x.data, axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _result(out, (x,), back, "sum")


def rowsum(x) -> Tensor:
    return sum(x, axis=1, keepdims=True)


def mean(x) -> Tensor:
    x = as_tensor(x)
    return mul(sum(x), 1.0 / max(x.data.size, 1))


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    return _result(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),), "reshape")


def transpose(x) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got shape {x.shape}")
    return _result(x.data.T, (x,), lambda g: (g.T,), "transpose")


def concat(xs: Iterable, axis: int = -1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    if not xs:
        raise ShapeError("concat of an empty list")
    try:
        out = np.concatenate([x.data for x in xs], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {exc}") from None
    bounds = np.cumsum([x.shape[axis] for x in xs])[:-1]
    return _result(out, xs, lambda g: tuple(np.split(g, bounds, axis=axis)), "concat")


def take_rows(x, index) -> Tensor:
    """Gather rows of ``x``; the result has shape ``index.shape + x.shape[1:]``."""
    x = as_tensor(x)
    index = np.asarray(index, dtype=np.intp)

    def back(g):
        full = np.zeros_like(x.data)
        np.add.at(full, index.reshape(-1), g.reshape((-1,) + x.shape[1:]))
        return (full,)

    return _result(x.data[index], (x,), back, "take_rows")


def take_along_rows(x, index) -> Tensor:
    """``out[i, k] = x[i, index[i, k]]`` for a matrix ``x``."""
    x = as_tensor(x)
    index = np.asarray(index, dtype=np.intp)
    if x.ndim != 2 or index.ndim != 2 or index.shape[0] != x.shape[0]:
        raise ShapeError(f"take_along_rows: index {index.shape} for input {x.shape}")
    rows = np.arange(x.shape[0])[:, None]

    def back(g):
        full = np.zeros_like(x.data)
        np.add.at(full, (np.broadcast_to(rows, index.shape), index), g)
        return (full,)

    return _result(x.data[rows, index], (x,), back, "take_along_rows")


# -- products --------------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not conform")
    return _result(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g), "matmul")


def spmm(adj, h) -> Tensor:
    """Sparse (constant) times dense; differentiable in ``h``."""
    h = as_tensor(h)
    if h.ndim != 2 or adj.n != h.shape[0]:
        raise ShapeError(f"spmm: adjacency of size {adj.n} for input {h.shape}")
    m = adj.matrix
    return _result(m @ h.data, (h,), lambda g: (m.T @ g,), "spmm")


def outer_linear(hp, hv, weight) -> Tensor:
    """Linear map applied to flattened outer products.

    ``hp`` is (B, K, d), ``hv`` is (B, d) and ``weight`` is (d*d, h).  Row
    ``(b, k)`` of the (B, K, h) result equals
    ``vec(outer(hp[b, k], hv[b])) @ weight`` with the row-major flattening
    ``j * d + l`` for ``hp`` index j and ``hv`` index l.  The d*d outer
    products are never materialised.
    """
    hp, hv, weight = as_tensor(hp), as_tensor(hv), as_tensor(weight)
    if hp.ndim != 3 or hv.ndim != 2 or hp.shape[0] != hv.shape[0] or hp.shape[2] != hv.shape[1]:
        raise ShapeError(f"outer_linear: history {hp.shape} and candidate {hv.shape}")
    d = hv.shape[1]
    if weight.ndim != 2 or weight.shape[0] != d * d:
        raise ShapeError(f"outer_linear: weight {weight.shape} for dimension {d}")
    w3 = weight.data.reshape(d, d, -1)
    # per-candidate slice of the bilinear form, (B, d, h)
    m = np.einsum("bl,jlh->bjh", hv.data, w3, optimize=True)
    out = np.einsum("bkj,bjh->bkh", hp.data, m, optimize=True)

    def back(g):
        gm = np.einsum("bkj,bkh->bjh", hp.data, g, optimize=True)
        ghp = np.einsum("bkh,bjh->bkj", g, m, optimize=True)
        ghv = np.einsum("jlh,bjh->bl", w3, gm, optimize=True)
        gw = np.einsum("bl,bjh->jlh", hv.data, gm, optimize=True).reshape(weight.shape)
        return ghp, ghv, gw

    return _result(out, (hp, hv, weight), back, "outer_linear")


def weighted_sum(a, hp) -> Tensor:
    """``out[b] = sum_k a[b, k] * hp[b, k]`` for (B, K) weights and (B, K, d) items."""
    a, hp = as_tensor(a), as_tensor(hp)
    if a.ndim != 2 or hp.ndim != 3 or a.shape != hp.shape[:2]:
        raise ShapeError(f"weighted_sum: weights {a.shape} for items {hp.shape}")
    out = np.einsum("bk,bkd->bd", a.data, hp.data)

    def back(g):
        return np.einsum("bd,bkd->bk", g, hp.data), a.data[:, :, None] * g[:, None, :]

    return _result(out, (a, hp), back, "weighted_sum")


# -- the backward pass -----------------------------------------------------

def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Tensor, params: Sequence[Tensor] | None = None,
             trace: list | None = None) -> list[np.ndarray] | None:
    """Populate ``.grad`` on every leaf reachable from the scalar ``loss``.

    When ``params`` is given, their gradients are returned in order; a
    parameter the loss does not depend on gets an exact zero array.  Each
    visited node is appended to ``trace`` if one is supplied.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if params is not None:
        for p in params:
            p.grad = np.zeros_like(p.data)
    if not loss.requires_grad:
        return [p.grad for p in params] if params is not None else None

    adjoints = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topological_order(loss)):
        g = adjoints.pop(id(node), None)
        if trace is not None:
            trace.append(node)
        if g is None:
            continue
        if not node.parents:
            node.grad = g
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            adjoints[key] = pg if key not in adjoints else adjoints[key] + pg
    if params is None:
        return None
    return [p.grad for p in params]
