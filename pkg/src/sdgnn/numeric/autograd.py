"""Reverse-mode differentiation over numpy arrays.

Operations run eagerly. While a :class:`TapeGraph` is active (``with
TapeGraph() as tape:``) every primitive whose inputs need gradients is
appended to the tape together with its vector-Jacobian product; outside a
tape nothing is recorded, which doubles as a no-grad mode.
"""

from __future__ import annotations

import numpy as np

from sdgnn import kernels

_tapes: list["TapeGraph"] = []
_debug = False


class DimensionError(ValueError):
    pass


class ContractError(ValueError):
    pass


def set_debug(flag: bool) -> None:
    """When on, every primitive checks its output for NaN/Inf."""
    global _debug
    _debug = bool(flag)


class Tensor:
    __slots__ = ("data", "requires_grad", "name", "grad")

    def __init__(self, data, requires_grad=False, name=None, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def __len__(self):
        return len(self.data)

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

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

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


class TapeGraph:
    """Ordered record of primitive applications."""

    def __init__(self):
        self.nodes = []  # (op, output, inputs, vjp)

    def __enter__(self):
        _tapes.append(self)
        return self

    def __exit__(self, *exc):
        _tapes.remove(self)
        return False

    def __len__(self):
        return len(self.nodes)

    def backward(self, loss: Tensor, params) -> list[np.ndarray]:
        """Gradients of the scalar ``loss`` for each tensor in ``params``.

        Parameters the loss does not depend on get zeros. Each returned
        array is also stored on ``param.grad``.
        """
        if loss.data.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        grads = {id(loss): np.ones_like(loss.data)}
        for op, out, inputs, vjp in reversed(self.nodes):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            for x, gx in zip(inputs, vjp(g)):
                if gx is None or not x.requires_grad:
                    continue
                if gx.shape != x.shape:
                    raise DimensionError(f"{op}: gradient shape {gx.shape} != input {x.shape}")
                if id(x) in grads:
                    grads[id(x)] = grads[id(x)] + gx
                else:
                    grads[id(x)] = gx
        result = []
        for p in params:
            g = grads.get(id(p))
            g = np.zeros_like(p.data) if g is None else np.asarray(g, dtype=p.data.dtype)
            p.grad = g
            result.append(g)
        return result


def backward(tape: TapeGraph, loss: Tensor, params) -> list[np.ndarray]:
    return tape.backward(loss, params)


def _record(op, data, inputs, vjp) -> Tensor:
    if _debug and not np.all(np.isfinite(data)):
        raise FloatingPointError(f"{op} produced non-finite values")
    out = Tensor(data)
    if _tapes and any(x.requires_grad for x in inputs):
        out.requires_grad = True
        _tapes[-1].nodes.append((op, out, inputs, vjp))
    return out


def _bincount(seg, weights, n):
    """Per-bucket sums of a vector, kept in the vector's dtype."""
    if weights.dtype in (np.float32, np.float64):
        return np.bincount(seg, weights=weights, minlength=n).astype(weights.dtype, copy=False)
    out = np.zeros(n, dtype=weights.dtype)
    np.add.at(out, seg, weights)
    return out


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shape(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: cannot broadcast {a.shape} with {b.shape}") from None


# -- elementwise arithmetic --------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)
    return _record("add", a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)
    return _record("sub", a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)
    return _record("mul", a.data * b.data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def neg(a):
    a = as_tensor(a)
    return _record("neg", -a.data, (a,), lambda g: (-g,))


def scale(a, c: float):
    a = as_tensor(a)
    return _record("scale", a.data * c, (a,), lambda g: (g * c,))


def square(a):
    a = as_tensor(a)
    return _record("square", a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)
    return _record("exp", out, (a,), lambda g: (g * out,))


def log(a, floor=None):
    """Natural log; with ``floor`` the argument is clamped from below and the
    gradient is zero where the clamp is active."""
    a = as_tensor(a)
    x = a.data if floor is None else np.maximum(a.data, floor)
    active = None if floor is None else a.data >= floor

    def vjp(g):
        ga = g / x
        return (ga if active is None else np.where(active, ga, 0.0),)

    return _record("log", np.log(x), (a,), vjp)


# -- nonlinearities ----------------------------------------------------------

def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid(a):
    a = as_tensor(a)
    s = _sigmoid(np.atleast_1d(a.data)).reshape(a.shape)
    return _record("sigmoid", s, (a,), lambda g: (g * s * (1.0 - s),))


def tanh(a):
    a = as_tensor(a)
    t = np.tanh(a.data)
    return _record("tanh", t, (a,), lambda g: (g * (1.0 - t * t),))


def relu(a):
    a = as_tensor(a)
    mask = a.data > 0
    return _record("relu", np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def leaky_relu(a, slope=0.2):
    a = as_tensor(a)
    mask = a.data >= 0
    return _record("leaky_relu", np.where(mask, a.data, slope * a.data), (a,),
                   lambda g: (np.where(mask, g, slope * g),))


def identity(a):
    return as_tensor(a)


def softmax(a):
    """Softmax along the last axis."""
    a = as_tensor(a)
    if a.data.size == 0:
        raise DimensionError("softmax: empty input")
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)
    return _record("softmax", s, (a,),
                   lambda g: (s * (g - (g * s).sum(axis=-1, keepdims=True)),))


# -- linear algebra and reductions -------------------------------------------

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim == 0 or b.ndim == 0 or a.shape[-1] != b.shape[0]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")
    out = a.data @ b.data

    def vjp(g):
        if a.ndim == 2 and b.ndim == 2:
            return g @ b.data.T, a.data.T @ g
        if a.ndim == 2:  # (n,k) @ (k,)
            return np.outer(g, b.data), a.data.T @ g
        if b.ndim == 2:  # (k,) @ (k,m)
            return b.data @ g, np.outer(a.data, g)
        return g * b.data, g * a.data

    return _record("matmul", out, (a, b), vjp)


def dot(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 1 or a.shape != b.shape:
        raise DimensionError(f"dot: expected equal-length vectors, got {a.shape} and {b.shape}")
    return _record("dot", np.dot(a.data, b.data), (a, b), lambda g: (g * b.data, g * a.data))


def rowdot(a, b):
    """Row-wise inner products of two ``(m, d)`` matrices."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or a.shape != b.shape:
        raise DimensionError(f"rowdot: shapes {a.shape} and {b.shape} differ")
    return _record("rowdot", np.einsum("ij,ij->i", a.data, b.data), (a, b),
                   lambda g: (g[:, None] * b.data, g[:, None] * a.data))


def sum(a, axis=None):  # noqa: A001 - mirrors numpy
    a = as_tensor(a)
    out = a.data.sum(axis=axis)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)

    return _record("sum", out, (a,), vjp)


def mean(a, axis=None):
    a = as_tensor(a)
    count = a.data.size if axis is None else a.shape[axis]
    if count == 0:
        raise DimensionError("mean: empty input")
    return scale(sum(a, axis=axis), 1.0 / count)


def row_mean(a):
    """Mean over rows of a matrix, giving one vector."""
    return mean(a, axis=0)


def concat(parts, axis=-1):
    parts = [as_tensor(p) for p in parts]
    try:
        out = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError as exc:
        raise DimensionError(f"concat: {exc}") from None
    ax = axis % out.ndim
    bounds = np.cumsum([p.shape[ax] for p in parts])[:-1]
    return _record("concat", out, tuple(parts),
                   lambda g: tuple(np.split(g, bounds, axis=ax)))


def stack_rows(rows):
    return concat([reshape(r, (1, -1)) for r in rows], axis=0)


def reshape(a, shape):
    a = as_tensor(a)
    return _record("reshape", a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


# -- indexing and segment operations -----------------------------------------

def gather(a, index):
    """Rows (or entries, for vectors) of ``a`` at ``index``."""
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.int64)
    n = a.shape[0]

    def vjp(g):
        if a.ndim == 1:
            return (_bincount(index, g.astype(a.dtype, copy=False), n),)
        width = int(np.prod(a.shape[1:]))
        return (kernels.segment_sum(g.reshape(len(index), width), index, n).reshape(a.shape),)

    return _record("gather", a.data[index], (a,), vjp)


def segment_sum(a, seg, n):
    """Sum rows of ``a`` into ``n`` buckets labelled by ``seg``."""
    a = as_tensor(a)
    seg = np.asarray(seg, dtype=np.int64)
    if a.shape[0] != len(seg):
        raise DimensionError(f"segment_sum: {a.shape[0]} rows but {len(seg)} segment ids")
    if a.ndim == 1:
        out = _bincount(seg, a.data, n)
    else:
        width = int(np.prod(a.shape[1:]))
        out = kernels.segment_sum(a.data.reshape(len(seg), width), seg, n).reshape((n,) + a.shape[1:])
    return _record("segment_sum", out, (a,), lambda g: (g[seg],))


def segment_softmax(a, seg, n):
    """Softmax of a 1-D array within each segment."""
    a = as_tensor(a)
    seg = np.asarray(seg, dtype=np.int64)
    if a.ndim != 1 or len(seg) != len(a):
        raise DimensionError("segment_softmax: need a vector with one segment id per entry")
    if len(a) == 0:
        return _record("segment_softmax", a.data.copy(), (a,), lambda g: (g,))
    top = kernels.segment_max(a.data, seg, n)
    e = np.exp(a.data - top[seg])
    denom = _bincount(seg, e, n)
    s = (e / denom[seg]).astype(a.dtype)

    def vjp(g):
        inner = _bincount(seg, g * s, n)
        return (s * (g - inner[seg]),)

    return _record("segment_softmax", s, (a,), vjp)


def const(x, dtype=None) -> Tensor:
    """A tensor that never receives gradient."""
    return Tensor(x.data if isinstance(x, Tensor) else x, dtype=dtype)


ACTIVATIONS = {"tanh": tanh, "relu": relu, "sigmoid": sigmoid, "identity": identity}
