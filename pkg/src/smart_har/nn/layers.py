"""Learnable layers with explicit forward caches and backward passes.

Convention: forward(x) returns (out, cache); backward(dout, cache) returns
dx and accumulates parameter gradients in place. Shapes are float64 numpy
arrays throughout.
"""

import numpy as np

from . import functional as F
from . import kernels
from .core import Module, Param, uniform_fan_in


class Linear(Module):
    """Affine map over the last axis; any number of leading axes."""

    def __init__(self, rng, in_features, out_features, bias=True):
        self.weight = Param(uniform_fan_in(rng, (out_features, in_features), in_features))
        self.bias = Param(uniform_fan_in(rng, (out_features,), in_features)) if bias else None

    def forward(self, x):
        out = x @ self.weight.value.T
        if self.bias is not None:
            out = out + self.bias.value
        return out, x

    def backward(self, dout, cache):
        x = cache
        x2 = x.reshape(-1, x.shape[-1])
        d2 = dout.reshape(-1, dout.shape[-1])
        self.weight.grad += d2.T @ x2
        if self.bias is not None:
            self.bias.grad += d2.sum(axis=0)
        return dout @ self.weight.value


class Conv2d(Module):
    """Valid-padding 2d convolution (cross-correlation), square kernel."""

    def __init__(self, rng, in_channels, out_channels, kernel_size, stride=1, bias=True):
        fan_in = in_channels * kernel_size * kernel_size
        self.weight = Param(
            uniform_fan_in(rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in)
        )
        self.bias = Param(uniform_fan_in(rng, (out_channels,), fan_in)) if bias else None
        self.stride = stride

    def forward(self, x):
        out = kernels.conv2d_forward(x, self.weight.value, self.stride)
        if self.bias is not None:
            out = out + self.bias.value[None, :, None, None]
        return out, x

    def backward(self, dout, cache):
        x = cache
        k = self.weight.shape[2]
        self.weight.grad += kernels.conv2d_backward_weight(x, dout, k, k, self.stride)
        if self.bias is not None:
            self.bias.grad += dout.sum(axis=(0, 2, 3))
        return kernels.conv2d_backward_input(dout, self.weight.value, x.shape[2], x.shape[3], self.stride)


class Conv1dSame(Module):
    """Stride-1 1d convolution with zero padding that preserves length."""

    def __init__(self, rng, in_channels, out_channels, kernel_size, bias=True):
        if kernel_size % 2 != 1:
            raise ValueError("Conv1dSame requires an odd kernel size")
        fan_in = in_channels * kernel_size
        self.weight = Param(uniform_fan_in(rng, (out_channels, in_channels, kernel_size), fan_in))
        self.bias = Param(uniform_fan_in(rng, (out_channels,), fan_in)) if bias else None
        self.pad = kernel_size // 2

    def forward(self, x):
        xp = np.pad(x, ((0, 0), (0, 0), (self.pad, self.pad)))
        out = kernels.conv1d_forward(xp, self.weight.value, 1)
        if self.bias is not None:
            out = out + self.bias.value[None, :, None]
        return out, xp

    def backward(self, dout, cache):
        xp = cache
        self.weight.grad += kernels.conv1d_backward_weight(xp, dout, self.weight.shape[2], 1)
        if self.bias is not None:
            self.bias.grad += dout.sum(axis=(0, 2))
        dxp = kernels.conv1d_backward_input(dout, self.weight.value, xp.shape[2], 1)
        p = self.pad
        return dxp[:, :, p:-p] if p else dxp


class ReLU(Module):
    def forward(self, x):
        return F.relu(x), x

    def backward(self, dout, cache):
        return F.drelu(dout, cache)


class Tanh(Module):
    def forward(self, x):
        out = F.tanh(x)
        return out, out

    def backward(self, dout, cache):
        return F.dtanh(dout, cache)


class Sequential(Module):
    def __init__(self, *mods):
        self.mods = list(mods)

    def forward(self, x):
        caches = []
        for m in self.mods:
            x, c = m.forward(x)
            caches.append(c)
        return x, caches

    def backward(self, dout, caches):
        for m, c in zip(reversed(self.mods), reversed(caches)):
            dout = m.backward(dout, c)
        return dout
