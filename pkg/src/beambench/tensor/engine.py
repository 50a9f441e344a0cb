"""Reverse-mode automatic differentiation over dense numpy arrays.

Each differentiable op records its parents and a backward closure on the
output tensor; the executed ops form the tape in execution order, so a
node's parents always precede it and ``backward`` can replay the chain
rule over a reverse topological order. Storage is f32 by default with f64
accumulation inside reductions; gradient checks run entirely in f64.
"""

from __future__ import annotations

import contextlib

import numpy as np

from ..errors import InvalidArgumentError, ShapeError

_FLOAT_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (inference passes)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backprop")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backprop = None

    # -- bookkeeping ----------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def accumulate_grad(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # -- operator sugar --------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def relu(self):
        return relu(self)

    def log(self):
        return log(self)

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tensor_mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, shape):
        return reshape(self, shape)

    def transpose(self, axes):
        return transpose(self, axes)

    def backward(self):
        backward(self)


def _lift(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.dtype))


def _result(data: np.ndarray, parents, backprop) -> Tensor:
    """Wrap an op result, recording the tape node only when it can matter."""
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backprop = backprop
    return out


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def backward(loss: Tensor):
    """Populate grads for every tensor reachable from a scalar loss.

    Repeated calls without zeroing accumulate, matching the += semantics
    of the closures.
    """
    if loss.data.size != 1:
        raise InvalidArgumentError(
            f"backward: loss must be scalar, got shape {loss.data.shape}"
        )
    # iterative postorder: children appear after all their parents
    topo, visited, stack = [], set(), [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    # op outputs carry only this call's flow while propagating, so a second
    # backward adds exactly one more d(loss)/dx to every leaf instead of
    # re-propagating previously accumulated values
    saved = {}
    for node in topo:
        if node._backprop is not None and node.grad is not None:
            saved[id(node)] = node.grad
            node.grad = None
    loss.accumulate_grad(np.ones_like(loss.data))
    for node in reversed(topo):
        if node._backprop is not None and node.grad is not None:
            node._backprop(node.grad)
    for node in topo:
        if id(node) in saved:
            node.grad = saved[id(node)] if node.grad is None else node.grad + saved[id(node)]


# -- elementwise and linear ops -----------------------------------------


def add(a: Tensor, b) -> Tensor:
    a_t, b_t = (a, _lift(b, a)) if isinstance(a, Tensor) else (_lift(a, b), b)
    try:
        data = a_t.data + b_t.data
    except ValueError:
        raise ShapeError(f"add: incompatible shapes {a_t.shape} and {b_t.shape}") from None

    def backprop(g):
        a_t.accumulate_grad(_unbroadcast(g, a_t.shape))
        b_t.accumulate_grad(_unbroadcast(g, b_t.shape))

    return _result(data, (a_t, b_t), backprop)


def sub(a: Tensor, b) -> Tensor:
    a_t, b_t = a, _lift(b, a)
    try:
        data = a_t.data - b_t.data
    except ValueError:
        raise ShapeError(f"sub: incompatible shapes {a_t.shape} and {b_t.shape}") from None

    def backprop(g):
        a_t.accumulate_grad(_unbroadcast(g, a_t.shape))
        b_t.accumulate_grad(_unbroadcast(-g, b_t.shape))

    return _result(data, (a_t, b_t), backprop)


def mul(a: Tensor, b) -> Tensor:
    a_t, b_t = (a, _lift(b, a)) if isinstance(a, Tensor) else (_lift(a, b), b)
    try:
        data = a_t.data * b_t.data
    except ValueError:
        raise ShapeError(f"mul: incompatible shapes {a_t.shape} and {b_t.shape}") from None

    def backprop(g):
        a_t.accumulate_grad(_unbroadcast(g * b_t.data, a_t.shape))
        b_t.accumulate_grad(_unbroadcast(g * a_t.data, b_t.shape))

    return _result(data, (a_t, b_t), backprop)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    try:
        data = np.matmul(a.data, b.data)
    except ValueError:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}") from None

    def backprop(g):
        a.accumulate_grad(_unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape))
        b.accumulate_grad(_unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape))

    return _result(data, (a, b), backprop)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def backprop(g):
        x.accumulate_grad(g * mask)

    return _result(np.where(mask, x.data, 0), (x,), backprop)


def log(x: Tensor) -> Tensor:
    def backprop(g):
        x.accumulate_grad(g / x.data)

    return _result(np.log(x.data), (x,), backprop)


# -- reductions (f64 accumulation) ---------------------------------------


def _expand_reduced(g: np.ndarray, shape, axis, keepdims) -> np.ndarray:
    if axis is None:
        return np.broadcast_to(g, shape)
    if not keepdims:
        axes = axis if isinstance(axis, tuple) else (axis,)
        for ax in sorted(a % len(shape) for a in axes):
            g = np.expand_dims(g, ax)
    return np.broadcast_to(g, shape)


def tensor_sum(x: Tensor, axis=None, keepdims=False) -> Tensor:
    data = np.sum(x.data, axis=axis, keepdims=keepdims, dtype=np.float64).astype(x.dtype)

    def backprop(g):
        x.accumulate_grad(_expand_reduced(g, x.shape, axis, keepdims).astype(x.dtype))

    return _result(data, (x,), backprop)


def tensor_mean(x: Tensor, axis=None, keepdims=False) -> Tensor:
    count = x.data.size if axis is None else np.prod(
        [x.shape[a] for a in (axis if isinstance(axis, tuple) else (axis,))]
    )
    data = np.mean(x.data, axis=axis, keepdims=keepdims, dtype=np.float64).astype(x.dtype)

    def backprop(g):
        full = _expand_reduced(g, x.shape, axis, keepdims) / count
        x.accumulate_grad(full.astype(x.dtype))

    return _result(data, (x,), backprop)


# -- shape ops -------------------------------------------------------------


def reshape(x: Tensor, shape) -> Tensor:
    try:
        data = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {x.shape} as {tuple(shape)}") from None

    def backprop(g):
        x.accumulate_grad(g.reshape(x.shape))

    return _result(data, (x,), backprop)


def transpose(x: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    if sorted(axes) != list(range(x.ndim)):
        raise ShapeError(f"transpose: axes {axes} invalid for shape {x.shape}")
    inverse = tuple(np.argsort(axes))

    def backprop(g):
        x.accumulate_grad(np.transpose(g, inverse))

    return _result(np.transpose(x.data, axes), (x,), backprop)


def concat(tensors, axis: int) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise InvalidArgumentError("concat: need at least one tensor")
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError(
            f"concat: incompatible shapes {[t.shape for t in tensors]}"
        ) from None
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backprop(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            t.accumulate_grad(g[tuple(sl)])

    return _result(data, tuple(tensors), backprop)


# -- normalization and lookup ops ------------------------------------------


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    denom = e.sum(axis=axis, keepdims=True, dtype=np.float64)
    y = (e / denom).astype(x.dtype)

    def backprop(g):
        inner = np.sum(g * y, axis=axis, keepdims=True, dtype=np.float64).astype(x.dtype)
        x.accumulate_grad(y * (g - inner))

    return _result(y, (x,), backprop)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis, then scale/shift by gamma/beta (shape (D,))."""
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(
            f"layer_norm: gamma/beta {gamma.shape}/{beta.shape} must be ({d},)"
        )
    xd = x.data.astype(np.float64)
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xh = xc * inv
    out = (xh * gamma.data + beta.data).astype(x.dtype)

    def backprop(g):
        lead = tuple(range(g.ndim - 1))
        gamma.accumulate_grad(np.sum(g * xh, axis=lead).astype(gamma.dtype))
        beta.accumulate_grad(np.sum(g, axis=lead).astype(beta.dtype))
        dxh = (g * gamma.data).astype(np.float64)
        dx = inv * (
            dxh - dxh.mean(axis=-1, keepdims=True) - xh * (dxh * xh).mean(axis=-1, keepdims=True)
        )
        x.accumulate_grad(dx.astype(x.dtype))

    return _result(out, (x, gamma, beta), backprop)


def embedding_lookup(table: Tensor, indices) -> Tensor:
    indices = np.asarray(indices)
    if not np.issubdtype(indices.dtype, np.integer):
        raise InvalidArgumentError("embedding_lookup: indices must be integers")
    if indices.size and (indices.min() < 0 or indices.max() >= table.shape[0]):
        raise InvalidArgumentError(
            f"embedding_lookup: index out of range for table of {table.shape[0]} rows"
        )

    def backprop(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, indices, g)
        table.accumulate_grad(gt)

    return _result(table.data[indices], (table,), backprop)


def select(x: Tensor, axis: int, index: int) -> Tensor:
    """Take one slice along ``axis`` (rank drops by one)."""
    if not (0 <= axis < x.ndim) or not (0 <= index < x.shape[axis]):
        raise ShapeError(f"select: ({axis}, {index}) invalid for shape {x.shape}")

    def backprop(g):
        gx = np.zeros_like(x.data)
        sl = [slice(None)] * x.ndim
        sl[axis] = index
        gx[tuple(sl)] = g
        x.accumulate_grad(gx)

    return _result(np.take(x.data, index, axis=axis), (x,), backprop)


def gather_rows(x: Tensor, indices) -> Tensor:
    """Pick x[i, indices[i]] for each row i of a 2-D tensor."""
    indices = np.asarray(indices)
    if x.ndim != 2 or indices.shape != (x.shape[0],):
        raise ShapeError(f"gather_rows: need (N, B) and (N,), got {x.shape} and {indices.shape}")
    rows = np.arange(x.shape[0])

    def backprop(g):
        gx = np.zeros_like(x.data)
        gx[rows, indices] = g
        x.accumulate_grad(gx)

    return _result(x.data[rows, indices], (x,), backprop)
