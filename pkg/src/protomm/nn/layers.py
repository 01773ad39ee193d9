"""Manually differentiated layers over numpy arrays.

Every layer follows the same protocol: ``forward(x, train) -> (y, cache)``
and ``backward(cache, gy) -> gx``.  Parameter gradients accumulate into
``Param.grad`` so a layer can be applied to several views of a batch before
a single optimizer step.  Caches are returned to the caller (not stored on
the layer) precisely so that repeated application is safe.
"""

from __future__ import annotations

import numpy as np

from .. import kernels


class Param:
    """A trainable array with an accumulated gradient of the same shape."""

    __slots__ = ("data", "grad")

    def __init__(self, data: np.ndarray):
        self.data = data
        self.grad = np.zeros_like(data)


class Layer:
    def params(self):
        """Yield (name, Param) pairs for this layer."""
        return []

    def forward(self, x, train):
        raise NotImplementedError

    def backward(self, cache, gy):
        raise NotImplementedError


class Conv1d(Layer):
    """Bias-free 1D convolution; padding defaults to K//2 (length-preserving at stride 1)."""

    def __init__(self, in_ch, out_ch, kernel_size, stride=1, rng=None, dtype=np.float32):
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.kernel_size = kernel_size
        self.stride = stride
        self.pad = kernel_size // 2
        fan_in = in_ch * kernel_size
        std = np.sqrt(2.0 / fan_in)
        w = rng.normal(0.0, std, size=(out_ch, in_ch, kernel_size))
        self.w = Param(w.astype(dtype))

    def params(self):
        yield "w", self.w

    def out_len(self, T):
        return (T + 2 * self.pad - self.kernel_size) // self.stride + 1

    def forward(self, x, train):
        y = kernels.conv1d_forward(x, self.w.data, self.stride, self.pad)
        return y, x

    def backward(self, cache, gy):
        x = cache
        self.w.grad += kernels.conv1d_grad_weight(x, gy, self.kernel_size, self.stride, self.pad)
        return kernels.conv1d_grad_input(gy, self.w.data, x.shape[2], self.stride, self.pad)


class BatchNorm1d(Layer):
    """Per-channel batch normalization over (batch, time)."""

    def __init__(self, ch, eps=1e-5, momentum=0.1, dtype=np.float32):
        self.eps = eps
        self.momentum = momentum
        self.gamma = Param(np.ones(ch, dtype=dtype))
        self.beta = Param(np.zeros(ch, dtype=dtype))
        self.running_mean = np.zeros(ch, dtype=dtype)
        self.running_var = np.ones(ch, dtype=dtype)

    def params(self):
        yield "gamma", self.gamma
        yield "beta", self.beta

    def forward(self, x, train):
        c = x.shape[1]
        if train:
            mean = x.mean(axis=(0, 2))
            var = x.var(axis=(0, 2))
            m = self.momentum
            self.running_mean = (1 - m) * self.running_mean + m * mean.astype(self.running_mean.dtype)
            self.running_var = (1 - m) * self.running_var + m * var.astype(self.running_var.dtype)
        else:
            mean = self.running_mean
            var = self.running_var
        invstd = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean.reshape(1, c, 1)) * invstd.reshape(1, c, 1)
        y = self.gamma.data.reshape(1, c, 1) * xhat + self.beta.data.reshape(1, c, 1)
        return y, (xhat, invstd, train)

    def backward(self, cache, gy):
        xhat, invstd, train = cache
        c = gy.shape[1]
        self.gamma.grad += (gy * xhat).sum(axis=(0, 2))
        self.beta.grad += gy.sum(axis=(0, 2))
        g = self.gamma.data.reshape(1, c, 1)
        if not train:
            return gy * g * invstd.reshape(1, c, 1)
        n = gy.shape[0] * gy.shape[2]
        dxhat = gy * g
        # standard batch-norm backward with batch statistics in the graph
        t1 = dxhat.sum(axis=(0, 2), keepdims=True)
        t2 = (dxhat * xhat).sum(axis=(0, 2), keepdims=True)
        return invstd.reshape(1, c, 1) * (dxhat - t1 / n - xhat * t2 / n)


class ReLU(Layer):
    def forward(self, x, train):
        mask = x > 0
        return x * mask, mask

    def backward(self, cache, gy):
        return gy * cache


class GlobalMaxPool(Layer):
    """Max over the time axis: (B, C, T) -> (B, C)."""

    def forward(self, x, train):
        idx = x.argmax(axis=2)
        return np.take_along_axis(x, idx[:, :, None], axis=2)[:, :, 0], (idx, x.shape)

    def backward(self, cache, gy):
        idx, shape = cache
        gx = np.zeros(shape, dtype=gy.dtype)
        np.put_along_axis(gx, idx[:, :, None], gy[:, :, None], axis=2)
        return gx


class Linear(Layer):
    def __init__(self, in_dim, out_dim, rng=None, dtype=np.float32):
        std = np.sqrt(1.0 / in_dim)
        self.w = Param(rng.normal(0.0, std, size=(in_dim, out_dim)).astype(dtype))
        self.b = Param(np.zeros(out_dim, dtype=dtype))

    def params(self):
        yield "w", self.w
        yield "b", self.b

    def forward(self, x, train):
        return x @ self.w.data + self.b.data, x

    def backward(self, cache, gy):
        x = cache
        self.w.grad += x.T @ gy
        self.b.grad += gy.sum(axis=0)
        return gy @ self.w.data.T


class L2Normalize(Layer):
    """Row-wise projection onto the unit sphere: (B, D) -> (B, D)."""

    def __init__(self, eps=1e-12):
        self.eps = eps

    def forward(self, x, train):
        norm = np.sqrt((x * x).sum(axis=1, keepdims=True)) + self.eps
        y = x / norm
        return y, (y, norm)

    def backward(self, cache, gy):
        y, norm = cache
        return (gy - y * (gy * y).sum(axis=1, keepdims=True)) / norm
