"""A small reverse-mode autodiff engine over float64 numpy arrays.

Every op returns a new :class:`Tensor` whose ``_backward`` closure pushes its
output gradient into its parents. Gradients from repeated use of one tensor
(weight sharing) are summed.
"""

from __future__ import annotations

import numpy as np

from ..errors import BatchTooSmall, NonFinite, ShapeMismatch

DTYPE = np.float64


def _check(data, name):
    if not np.isfinite(data).all():
        raise NonFinite(f"non-finite values produced by {name}")
    return data


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_prev", "_backward", "_op", "name")

    def __init__(self, data, requires_grad=False, name=None, _prev=(), _op="leaf"):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad = None
        self.requires_grad = requires_grad
        self._prev = _prev
        self._backward = None
        self._op = _op
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self._op})"

    def _accumulate(self, g):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=DTYPE)
        else:
            self.grad = self.grad + g

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Populate ``.grad`` on every tensor reachable from this scalar root."""
        if self.data.size != 1:
            raise ShapeMismatch("backward() needs a scalar root")
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._prev:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None and node.requires_grad:
                _check(node.grad, f"backward of {node._op}")
                node._backward(node.grad)
                if node._prev:
                    node.grad = None

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __getitem__(self, idx):
        return getitem(self, idx)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data, parents, op):
    parents = tuple(parents)
    out = Tensor(_check(data, op), _prev=parents, _op=op)
    out.requires_grad = any(p.requires_grad for p in parents)
    return out


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = _node(a.data + b.data, (a, b), "add")

    def backward(g_out):
        a._accumulate(_unbroadcast(g_out, a.shape))
        b._accumulate(_unbroadcast(g_out, b.shape))

    out._backward = backward
    return out


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = _node(a.data * b.data, (a, b), "mul")

    def backward(g_out):
        a._accumulate(_unbroadcast(g_out * b.data, a.shape))
        b._accumulate(_unbroadcast(g_out * a.data, b.shape))

    out._backward = backward
    return out


def neg(a):
    out = _node(-a.data, (a,), "neg")

    def backward(g_out):
        a._accumulate(-g_out)

    out._backward = backward
    return out


def getitem(a, idx):
    out = _node(a.data[idx], (a,), "getitem")

    def backward(g_out):
        g = np.zeros_like(a.data)
        np.add.at(g, idx, g_out)
        a._accumulate(g)

    out._backward = backward
    return out


def detach(a):
    """Stop-gradient: same values, no path back to ``a``."""
    return Tensor(a.data.copy(), _op="detach")


def relu(a):
    mask = a.data > 0
    out = _node(np.where(mask, a.data, 0.0), (a,), "relu")

    def backward(g_out):
        a._accumulate(g_out * mask)

    out._backward = backward
    return out


def tensor_sum(a, axis=None):
    out = _node(np.sum(a.data, axis=axis), (a,), "sum")

    def backward(g_out):
        g = g_out if axis is None else np.expand_dims(g_out, axis)
        a._accumulate(np.broadcast_to(g, a.shape))

    out._backward = backward
    return out


def mean(a, axis=None):
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(tensor_sum(a, axis), 1.0 / n)


def absolute(a):
    sign = np.sign(a.data)
    out = _node(np.abs(a.data), (a,), "abs")

    def backward(g_out):
        a._accumulate(g_out * sign)

    out._backward = backward
    return out


def row_norm(a):
    """Euclidean norm of each row of a 2-D tensor (subgradient 0 at the origin)."""
    n = np.sqrt(np.sum(a.data * a.data, axis=1))
    out = _node(n, (a,), "row_norm")

    def backward(g_out):
        safe = np.where(n > 0, n, 1.0)
        scale = np.where(n > 0, g_out / safe, 0.0)
        a._accumulate(a.data * scale[:, None])

    out._backward = backward
    return out


def dense(x, w, b=None):
    """``x @ w + b`` with ``w`` of shape (in, out)."""
    if x.shape[-1] != w.shape[0]:
        raise ShapeMismatch(f"dense: input width {x.shape[-1]} vs weight {w.shape}")
    y = x.data @ w.data
    parents = (x, w)
    if b is not None:
        y = y + b.data
        parents = (x, w, b)
    out = _node(y, parents, "dense")

    def backward(g_out):
        g = g_out
        x._accumulate(g @ w.data.T)
        w._accumulate(x.data.T @ g)
        if b is not None:
            b._accumulate(g.sum(axis=0))

    out._backward = backward
    return out


def global_avg_pool(x):
    """(N, C, H, W) -> (N, C)."""
    n, c, h, w = x.shape
    out = _node(x.data.mean(axis=(2, 3)), (x,), "gap")

    def backward(g_out):
        x._accumulate(np.broadcast_to(g_out[:, :, None, None] / (h * w), x.shape))

    out._backward = backward
    return out


def conv_output_size(size, kernel, stride, padding):
    return (size + 2 * padding - kernel) // stride + 1


def _im2col(xp, k, s, ho, wo):
    """Patch matrix of shape (C*k*k, N*ho*wo) from a padded NCHW array."""
    n, c = xp.shape[:2]
    cols = np.empty((c, k, k, n, ho, wo))
    for i in range(k):
        for j in range(k):
            cols[:, i, j] = xp[:, :, i:i + s * ho:s, j:j + s * wo:s].transpose(1, 0, 2, 3)
    return cols.reshape(c * k * k, n * ho * wo)


def conv2d(x, w, b=None, stride=1, padding=0):
    """Cross-correlation of an NCHW input with an (out, in, k, k) kernel."""
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeMismatch("conv2d expects 4-D input and weights")
    n, c, h, wd = x.shape
    co, ci, k, k2 = w.shape
    if ci != c or k != k2:
        raise ShapeMismatch(f"conv2d: input channels {c} vs kernel {w.shape}")
    ho = conv_output_size(h, k, stride, padding)
    wo = conv_output_size(wd, k, stride, padding)
    if ho < 1 or wo < 1:
        raise ShapeMismatch("conv2d: kernel larger than padded input")
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    cols = _im2col(xp, k, stride, ho, wo)
    wmat = w.data.reshape(co, -1)
    y = wmat @ cols
    if b is not None:
        y = y + b.data[:, None]
    y = y.reshape(co, n, ho, wo).transpose(1, 0, 2, 3)
    parents = (x, w) if b is None else (x, w, b)
    out = _node(np.ascontiguousarray(y), parents, "conv2d")

    def backward(g_out):
        g = g_out.transpose(1, 0, 2, 3).reshape(co, -1)
        w._accumulate((g @ cols.T).reshape(w.shape))
        if b is not None:
            b._accumulate(g.sum(axis=1))
        if x.requires_grad:
            dcols = (wmat.T @ g).reshape(c, k, k, n, ho, wo)
            dxp = np.zeros((c, n) + xp.shape[2:])
            for i in range(k):
                for j in range(k):
                    dxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += dcols[:, i, j]
            dx = dxp[:, :, padding:padding + h, padding:padding + wd].transpose(1, 0, 2, 3)
            x._accumulate(np.ascontiguousarray(dx))

    out._backward = backward
    return out


class BatchNormState:
    """Running statistics owned by the model, not by the op."""

    def __init__(self, channels):
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)


def batchnorm(x, gamma, beta, state, mode="train", momentum=0.1, eps=1e-5):
    """Per-channel normalisation of an NCHW (or NC) tensor.

    Train mode normalises with the biased batch variance over batch and
    spatial axes and updates ``state`` with
    ``running = (1 - momentum) * running + momentum * batch`` (unbiased variance).
    """
    data = x.data
    axes = (0,) if data.ndim == 2 else (0, 2, 3)
    shape = (1, -1) if data.ndim == 2 else (1, -1, 1, 1)
    m = data.size // data.shape[1]
    if mode == "train":
        if data.shape[0] < 2:
            raise BatchTooSmall("batchnorm in train mode needs batch >= 2")
        mu = data.mean(axis=axes)
        var = data.var(axis=axes)
        if state is not None:
            state.running_mean = (1 - momentum) * state.running_mean + momentum * mu
            unbiased = var * m / max(m - 1, 1)
            state.running_var = (1 - momentum) * state.running_var + momentum * unbiased
    elif mode == "eval":
        mu, var = state.running_mean, state.running_var
    else:
        raise ValueError(f"unknown batchnorm mode {mode!r}")
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (data - mu.reshape(shape)) * inv.reshape(shape)
    y = gamma.data.reshape(shape) * xhat + beta.data.reshape(shape)
    out = _node(y, (x, gamma, beta), "batchnorm")

    def backward(g_out):
        g = g_out
        gamma._accumulate((g * xhat).sum(axis=axes))
        beta._accumulate(g.sum(axis=axes))
        if not x.requires_grad:
            return
        dxhat = g * gamma.data.reshape(shape)
        if mode == "train":
            s1 = dxhat.sum(axis=axes).reshape(shape)
            s2 = (dxhat * xhat).sum(axis=axes).reshape(shape)
            dx = (inv.reshape(shape) / m) * (m * dxhat - s1 - xhat * s2)
        else:
            dx = dxhat * inv.reshape(shape)
        x._accumulate(dx)

    out._backward = backward
    return out
