"""Minimal reverse-mode automatic differentiation over numpy arrays.

Tensors wrap ndarrays and record a tape of backward closures; `backward()`
topologically sorts the graph and accumulates exact gradients into `.grad`.
Only the operations the encoder and losses need are provided.  Gradients
follow the data dtype, so float64 graphs support tight finite-difference
comparisons while training runs in float32.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf as _erf

_INV_SQRT2 = float(1.0 / np.sqrt(2.0))
_INV_SQRT2PI = float(1.0 / np.sqrt(2.0 * np.pi))


def _unbroadcast(grad, shape):
    """Reduce a broadcast gradient back to the original operand shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents", "_grad_owned")

    # Let `ndarray <op> Tensor` defer to the Tensor's reflected operators.
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward
        self._grad_owned = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def detach(self):
        return Tensor(self.data)

    def item(self):
        return float(self.data)

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        self._grad_owned = True
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    # -- helpers ------------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    def _accumulate(self, grad):
        # First contribution aliases the incoming array (possibly a read-only
        # view); later contributions allocate once and add in place.  Safe
        # because a node's grad is complete before its own backward runs.
        if self.grad is None:
            self.grad = grad
            self._grad_owned = False
        elif self._grad_owned:
            self.grad += grad
        else:
            self.grad = self.grad + grad
            self._grad_owned = True

    def _scatter_ready(self):
        """Materialize an owned, writable gradient buffer for scatter-adds."""
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        elif not self._grad_owned:
            self.grad = self.grad + np.zeros_like(self.data)
        self._grad_owned = True

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        other = self._coerce(other)
        out_data = self.data + other.data
        needs = self.requires_grad or other.requires_grad
        if not needs:
            return Tensor(out_data)

        def backward(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g, other.data.shape))

        return Tensor(out_data, True, (self, other), backward)

    __radd__ = __add__

    def __neg__(self):
        if not self.requires_grad:
            return Tensor(-self.data)

        def backward(g):
            self._accumulate(-g)

        return Tensor(-self.data, True, (self,), backward)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        out_data = self.data * other.data
        needs = self.requires_grad or other.requires_grad
        if not needs:
            return Tensor(out_data)

        def backward(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g * other.data, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g * self.data, other.data.shape))

        return Tensor(out_data, True, (self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        out_data = self.data / other.data
        needs = self.requires_grad or other.requires_grad
        if not needs:
            return Tensor(out_data)

        def backward(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g / other.data, self.data.shape))
            if other.requires_grad:
                other._accumulate(
                    _unbroadcast(-g * self.data / (other.data * other.data), other.data.shape)
                )

        return Tensor(out_data, True, (self, other), backward)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __matmul__(self, other):
        other = self._coerce(other)
        out_data = self.data @ other.data
        needs = self.requires_grad or other.requires_grad
        if not needs:
            return Tensor(out_data)

        def backward(g):
            if self.requires_grad:
                ga = g @ np.swapaxes(other.data, -1, -2)
                self._accumulate(_unbroadcast(ga, self.data.shape))
            if other.requires_grad:
                gb = np.swapaxes(self.data, -1, -2) @ g
                other._accumulate(_unbroadcast(gb, other.data.shape))

        return Tensor(out_data, True, (self, other), backward)

    # -- elementwise ----------------------------------------------------------

    def exp(self):
        out_data = np.exp(self.data)
        if not self.requires_grad:
            return Tensor(out_data)

        def backward(g):
            self._accumulate(g * out_data)

        return Tensor(out_data, True, (self,), backward)

    def log(self):
        if not self.requires_grad:
            return Tensor(np.log(self.data))

        def backward(g):
            self._accumulate(g / self.data)

        return Tensor(np.log(self.data), True, (self,), backward)

    def sqrt(self):
        out_data = np.sqrt(self.data)
        if not self.requires_grad:
            return Tensor(out_data)

        def backward(g):
            self._accumulate(g * (0.5 / out_data))

        return Tensor(out_data, True, (self,), backward)

    def erf(self):
        out_data = _erf(self.data * _INV_SQRT2)
        if not self.requires_grad:
            return Tensor(out_data)

        def backward(g):
            # d/dx erf(x/sqrt(2)) = sqrt(2/pi) * exp(-x^2/2)
            self._accumulate(g * 2.0 * _INV_SQRT2PI * np.exp(-0.5 * self.data * self.data))

        return Tensor(out_data, True, (self,), backward)

    def gelu(self):
        """x * Phi(x) with the exact erf form, fused forward and backward."""
        x = self.data
        cdf = 0.5 * (1.0 + _erf(x * _INV_SQRT2))
        out_data = x * cdf
        if not self.requires_grad:
            return Tensor(out_data)

        def backward(g):
            pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
            self._accumulate(g * (cdf + x * pdf))

        return Tensor(out_data, True, (self,), backward)

    def clip(self, low, high):
        out_data = np.clip(self.data, low, high)
        if not self.requires_grad:
            return Tensor(out_data)
        inside = ((self.data >= low) & (self.data <= high)).astype(self.data.dtype)

        def backward(g):
            self._accumulate(g * inside)

        return Tensor(out_data, True, (self,), backward)

    def sigmoid(self):
        out_data = 1.0 / (1.0 + np.exp(-self.data))
        if not self.requires_grad:
            return Tensor(out_data)

        def backward(g):
            self._accumulate(g * out_data * (1.0 - out_data))

        return Tensor(out_data, True, (self,), backward)

    # -- reductions and shape -------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        out_data = self.data.sum(axis=axis, keepdims=keepdims)
        if not self.requires_grad:
            return Tensor(out_data)

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self._accumulate(np.broadcast_to(g, self.data.shape))

        return Tensor(out_data, True, (self,), backward)

    def mean(self, axis=None, keepdims=False):
        if axis is None:
            count = self.data.size
        else:
            count = self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape):
        out_data = self.data.reshape(*shape)
        if not self.requires_grad:
            return Tensor(out_data)

        def backward(g):
            self._accumulate(g.reshape(self.data.shape))

        return Tensor(out_data, True, (self,), backward)

    def transpose(self, axes):
        out_data = self.data.transpose(axes)
        if not self.requires_grad:
            return Tensor(out_data)
        inverse = np.argsort(axes)

        def backward(g):
            self._accumulate(g.transpose(inverse))

        return Tensor(out_data, True, (self,), backward)

    def __getitem__(self, key):
        out_data = self.data[key]
        if not self.requires_grad:
            return Tensor(out_data)

        def backward(g):
            self._scatter_ready()
            np.add.at(self.grad, key, g)

        return Tensor(out_data, True, (self,), backward)


def gather_rows(table, indices):
    """table[indices] with scatter-add backward; `indices` is an int array."""
    indices = np.asarray(indices)
    out_data = table.data[indices]
    if not table.requires_grad:
        return Tensor(out_data)

    def backward(g):
        table._scatter_ready()
        np.add.at(table.grad, indices, g)

    return Tensor(out_data, True, (table,), backward)


def gather_positions(tensor, batch_idx, pos_idx):
    """tensor[batch_idx, pos_idx] for paired index arrays ([K, ...] result)."""
    batch_idx = np.asarray(batch_idx)
    pos_idx = np.asarray(pos_idx)
    out_data = tensor.data[batch_idx, pos_idx]
    if not tensor.requires_grad:
        return Tensor(out_data)

    def backward(g):
        tensor._scatter_ready()
        np.add.at(tensor.grad, (batch_idx, pos_idx), g)

    return Tensor(out_data, True, (tensor,), backward)


def concat(tensors, axis=0):
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    needs = any(t.requires_grad for t in tensors)
    if not needs:
        return Tensor(out_data)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                index = [slice(None)] * g.ndim
                index[axis] = slice(start, stop)
                t._accumulate(g[tuple(index)])

    return Tensor(out_data, True, tuple(tensors), backward)


def softmax(t, axis=-1):
    """Numerically stable softmax, fused with its exact backward."""
    shifted = t.data - t.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)
    if not t.requires_grad:
        return Tensor(out_data)

    def backward(g):
        inner = (g * out_data).sum(axis=axis, keepdims=True)
        t._accumulate(out_data * (g - inner))

    return Tensor(out_data, True, (t,), backward)


def layer_norm_core(t, eps):
    """(x - mean) / sqrt(var + eps) over the last axis, fused backward."""
    mu = t.data.mean(axis=-1, keepdims=True)
    centered = t.data - mu
    inv_sigma = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    x_hat = centered * inv_sigma
    if not t.requires_grad:
        return Tensor(x_hat)

    def backward(g):
        g_mean = g.mean(axis=-1, keepdims=True)
        gx_mean = (g * x_hat).mean(axis=-1, keepdims=True)
        t._accumulate(inv_sigma * (g - g_mean - x_hat * gx_mean))

    return Tensor(x_hat, True, (t,), backward)


def log_softmax(t, axis=-1):
    shifted = t - Tensor(t.data.max(axis=axis, keepdims=True))
    return shifted - shifted.exp().sum(axis=axis, keepdims=True).log()


def logsumexp(t, axis=-1):
    shifted_max = t.data.max(axis=axis, keepdims=True)
    shifted = t - Tensor(shifted_max)
    return shifted.exp().sum(axis=axis, keepdims=False).log() + Tensor(
        np.squeeze(shifted_max, axis=axis)
    )
