"""Minimal reverse-mode automatic differentiation over numpy arrays.

Every op records its parents and a backward rule written in terms of
:class:`Tensor` ops. Running the backward pass with ``create_graph=True``
therefore records the gradient computation itself, which is what the
gradient penalty needs (a parameter gradient of an input-gradient norm).

Ops marked *first order* below use constant Jacobian factors; their
gradients are exact but differentiating them a second time is not supported.
"""

import contextlib

import numpy as np

from .errors import DimensionError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    global _GRAD_ENABLED
    prev, _GRAD_ENABLED = _GRAD_ENABLED, False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


@contextlib.contextmanager
def _grad_mode(enabled):
    global _GRAD_ENABLED
    prev, _GRAD_ENABLED = _GRAD_ENABLED, enabled
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")
    # Make numpy defer to the reflected operators below (ndarray * Tensor -> Tensor).
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None, op="leaf"):
        self.data = np.asarray(data, dtype=float)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self.op = op

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op!r}, requires_grad={self.requires_grad})"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def detach(self):
        return Tensor(self.data)

    def item(self):
        return float(self.data)

    # Operator sugar.
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
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        return slice_(self, idx)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    @property
    def T(self):
        return swap_last(self)

    @property
    def mT(self):
        return swap_last(self)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward, op):
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        return Tensor(data, True, parents, backward, op)
    return Tensor(data, op=op)


def unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (the reverse of numpy broadcasting)."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = sum_(g, axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = sum_(g, axis=axes, keepdims=True)
    return g


def expand(a, shape):
    a = as_tensor(a)
    shape = tuple(shape)
    out = np.broadcast_to(a.data, shape).copy()
    return _make(out, (a,), lambda g: (unbroadcast(g, a.shape),), "expand")


# ----------------------------------------------------------------------------
# Elementwise arithmetic

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(
        a.data + b.data,
        (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)),
        "add",
    )


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(
        a.data - b.data,
        (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(scale(g, -1.0), b.shape)),
        "sub",
    )


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(
        a.data * b.data,
        (a, b),
        lambda g: (unbroadcast(mul(g, b), a.shape), unbroadcast(mul(g, a), b.shape)),
        "mul",
    )


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        ga = unbroadcast(div(g, b), a.shape)
        gb = unbroadcast(scale(div(mul(g, a), mul(b, b)), -1.0), b.shape)
        return ga, gb

    return _make(a.data / b.data, (a, b), backward, "div")


def scale(a, c):
    a = as_tensor(a)
    c = float(c)
    return _make(a.data * c, (a,), lambda g: (scale(g, c),), "scale")


def square(a):
    return mul(a, a)


def clamp_min(a, lo):
    """``max(a, lo)``; gradient passes only where ``a > lo``."""
    a = as_tensor(a)
    mask = (a.data > lo).astype(float)
    return _make(np.maximum(a.data, lo), (a,), lambda g: (mul(g, mask),), "clamp_min")


def sqrt(a):
    a = as_tensor(a)
    out = None

    def backward(g):
        return (div(g, scale(clamp_min(out, 1e-150), 2.0)),)

    out = _make(np.sqrt(np.maximum(a.data, 0.0)), (a,), backward, "sqrt")
    return out


def abs_(a):
    """First order: the sign factor is treated as constant."""
    a = as_tensor(a)
    sign = np.sign(a.data)
    return _make(np.abs(a.data), (a,), lambda g: (mul(g, sign),), "abs")


# ----------------------------------------------------------------------------
# Activations

def relu(a):
    a = as_tensor(a)
    mask = (a.data > 0).astype(float)
    return _make(a.data * mask, (a,), lambda g: (mul(g, mask),), "relu")


def leaky_relu(a, slope=0.2):
    a = as_tensor(a)
    factor = np.where(a.data > 0, 1.0, slope)
    return _make(a.data * factor, (a,), lambda g: (mul(g, factor),), "leaky_relu")


def tanh(a):
    a = as_tensor(a)
    out = None

    def backward(g):
        return (mul(g, sub(1.0, mul(out, out))),)

    out = _make(np.tanh(a.data), (a,), backward, "tanh")
    return out


# ----------------------------------------------------------------------------
# Reductions and shape ops

def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def sum_(a, axis=None, keepdims=False):
    a = as_tensor(a)
    axes = _norm_axis(axis, a.ndim)
    out = np.sum(a.data, axis=axes, keepdims=keepdims)
    kept_shape = tuple(1 if i in axes else n for i, n in enumerate(a.shape))

    def backward(g):
        return (expand(reshape(g, kept_shape), a.shape),)

    return _make(out, (a,), backward, "sum")


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    axes = _norm_axis(axis, a.ndim)
    count = int(np.prod([a.shape[i] for i in axes])) if axes else 1
    return scale(sum_(a, axis, keepdims), 1.0 / count)


def reshape(a, shape):
    a = as_tensor(a)
    out = a.data.reshape(shape)
    return _make(out, (a,), lambda g: (reshape(g, a.shape),), "reshape")


def swap_last(a):
    a = as_tensor(a)
    if a.ndim < 2:
        return a
    return _make(np.swapaxes(a.data, -1, -2), (a,), lambda g: (swap_last(g),), "transpose")


transpose = swap_last


def slice_(a, idx):
    a = as_tensor(a)
    return _make(a.data[idx], (a,), lambda g: (_scatter(g, idx, a.shape),), "slice")


def _scatter(g, idx, shape):
    out = np.zeros(shape)
    out[idx] = g.data
    return _make(out, (g,), lambda gg: (slice_(gg, idx),), "scatter")


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    ax = axis % out.ndim
    bounds = np.cumsum([0] + [t.shape[ax] for t in tensors])

    def backward(g):
        grads = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            idx = [slice(None)] * out.ndim
            idx[ax] = slice(int(lo), int(hi))
            grads.append(slice_(g, tuple(idx)))
        return tuple(grads)

    return _make(out, tuple(tensors), backward, "concat")


# ----------------------------------------------------------------------------
# Linear algebra

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError("matmul needs operands with at least 2 dimensions")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def backward(g):
        ga = unbroadcast(matmul(g, swap_last(b)), a.shape)
        gb = unbroadcast(matmul(swap_last(a), g), b.shape)
        return ga, gb

    return _make(a.data @ b.data, (a, b), backward, "matmul")


def nuclear_norm(a):
    """Sum of singular values of each trailing matrix. First order.

    The gradient ``U V^T`` is exact wherever the matrix has full rank.
    """
    a = as_tensor(a)
    u, s, vt = np.linalg.svd(a.data)
    uvt = u @ vt

    def backward(g):
        return (mul(reshape(g, g.shape + (1, 1)), uvt),)

    return _make(s.sum(axis=-1), (a,), backward, "nuclear_norm")


# ----------------------------------------------------------------------------
# Norms

def l1_norm(a, axis=None):
    return sum_(abs_(a), axis)


def l2_norm(a, axis=None):
    return sqrt(sum_(mul(a, a), axis))


# ----------------------------------------------------------------------------
# Smooth functions of a squared radius (used by the sphere exponential map)

def _sinc_sqrt_np(x):
    x = np.maximum(x, 0.0)
    r = np.sqrt(x)
    small = x < 1e-6
    safe_r = np.where(small, 1.0, r)
    return np.where(small, 1.0 - x / 6.0 + x * x / 120.0, np.sin(safe_r) / safe_r)


def _dsinc_sqrt_np(x):
    x = np.maximum(x, 0.0)
    small = x < 1e-4
    safe_x = np.where(small, 1.0, x)
    r = np.sqrt(safe_x)
    big = (np.cos(r) - np.sin(r) / r) / (2.0 * safe_x)
    series = -1.0 / 6.0 + x / 60.0 - x * x / 2520.0
    return np.where(small, series, big)


def cos_sqrt(x):
    """``cos(sqrt(x))`` for ``x >= 0``, smooth at 0."""
    x = as_tensor(x)
    return _make(
        np.cos(np.sqrt(np.maximum(x.data, 0.0))),
        (x,),
        lambda g: (mul(g, scale(sinc_sqrt(x), -0.5)),),
        "cos_sqrt",
    )


def sinc_sqrt(x):
    """``sin(sqrt(x)) / sqrt(x)`` for ``x >= 0``, equal to 1 at 0."""
    x = as_tensor(x)
    return _make(_sinc_sqrt_np(x.data), (x,), lambda g: (mul(g, _dsinc_sqrt(x)),), "sinc_sqrt")


def _dsinc_sqrt(x):
    def backward(g):
        raise NotImplementedError("third derivative of sinc_sqrt is not implemented")

    return _make(_dsinc_sqrt_np(x.data), (x,), backward, "dsinc_sqrt")


# ----------------------------------------------------------------------------
# Reverse pass

def _topo_order(root):
    order, seen = [], set()
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
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def grad(output, inputs, create_graph=False):
    """Gradients of scalar ``output`` with respect to each tensor in ``inputs``.

    With ``create_graph=True`` the returned tensors are themselves part of
    the graph and can be differentiated again.
    """
    if output.size != 1:
        raise ValueError(f"grad needs a scalar output, got shape {output.shape}")
    single = isinstance(inputs, Tensor)
    if single:
        inputs = [inputs]
    grads = {}
    if output.requires_grad:
        with _grad_mode(create_graph):
            grads[id(output)] = Tensor(np.ones_like(output.data))
            for node in reversed(_topo_order(output)):
                g = grads.get(id(node))
                if g is None or node._backward is None:
                    continue
                parent_grads = node._backward(g)
                for p, pg in zip(node._parents, parent_grads):
                    if pg is None or not p.requires_grad:
                        continue
                    prev = grads.get(id(p))
                    grads[id(p)] = pg if prev is None else add(prev, pg)
    result = []
    for x in inputs:
        g = grads.get(id(x))
        result.append(g if g is not None else Tensor(np.zeros_like(x.data)))
    return result[0] if single else result


def backward(output, params):
    """Populate ``p.grad`` (numpy arrays) for every tensor in ``params``."""
    params = list(params)
    gs = grad(output, params, create_graph=False)
    for p, g in zip(params, gs):
        p.grad = g.data.copy()
    return [p.grad for p in params]


def input_gradient(f, x):
    """Gradient of scalar ``f(x)`` with respect to ``x``, kept on the graph."""
    x = Tensor(as_tensor(x).data, requires_grad=True)
    y = f(x)
    return grad(y, x, create_graph=True)
