"""Layers with learnable parameters on top of the tensor ops.

Data is channel-first throughout: (C, T) for sequences and (C, T, V) for
sequences of joint sets. Modules register parameters as Tensor attributes
with requires_grad=True; buffers (batchnorm running statistics) are plain
numpy arrays listed in _buffer_names.
"""

from __future__ import annotations

import numpy as np

from . import tensor as tt
from .tensor import Tensor


def glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Module:
    """Base class providing recursive parameter and buffer discovery."""

    _buffer_names = ()

    def _children(self):
        for attr, value in vars(self).items():
            if isinstance(value, Module):
                yield attr, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{attr}.{i}", item

    def named_parameters(self, prefix=""):
        for attr, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + attr, value
        for name, child in self._children():
            yield from child.named_parameters(prefix + name + ".")

    def named_buffers(self, prefix=""):
        for attr in self._buffer_names:
            yield prefix + attr, getattr(self, attr)
        for name, child in self._children():
            yield from child.named_buffers(prefix + name + ".")

    def parameters(self):
        return [p for _, p in self.named_parameters()]


class ChannelMap(Module):
    """Pointwise linear map over the channel axis (a 1x1 convolution).

    Applies to (C_in, T) or (C_in, T, V) inputs, preserving trailing axes.
    """

    def __init__(self, c_in, c_out, rng, bias=True):
        self.c_in, self.c_out = c_in, c_out
        self.weight = Tensor(glorot(rng, (c_out, c_in), c_in, c_out), requires_grad=True)
        self.bias = Tensor(np.zeros(c_out), requires_grad=True) if bias else None

    def __call__(self, x):
        if x.ndim == 2:
            out = tt.einsum("oc,ct->ot", self.weight, x)
            if self.bias is not None:
                out = tt.add(out, tt.reshape(self.bias, (self.c_out, 1)))
        elif x.ndim == 3:
            out = tt.einsum("oc,ctv->otv", self.weight, x)
            if self.bias is not None:
                out = tt.add(out, tt.reshape(self.bias, (self.c_out, 1, 1)))
        else:
            raise tt.ShapeError(f"ChannelMap expects 2-D or 3-D input, got {x.shape}")
        return out


class DilatedConv(Module):
    """Temporal convolution, kernel 3, 'same' padding, configurable dilation."""

    def __init__(self, c_in, c_out, dilation, rng, kernel=3):
        self.dilation = dilation
        self.weight = Tensor(
            glorot(rng, (c_out, c_in, kernel), c_in * kernel, c_out * kernel),
            requires_grad=True)
        self.bias = Tensor(np.zeros(c_out), requires_grad=True)

    def __call__(self, x):
        return tt.conv1d(x, self.weight, self.bias, dilation=self.dilation)


class BatchNorm(Module):
    """Batch normalization over all non-channel axes of a single sequence."""

    _buffer_names = ("running_mean", "running_var")

    def __init__(self, channels, momentum=0.1, eps=1e-5):
        self.gamma = Tensor(np.ones(channels), requires_grad=True)
        self.beta = Tensor(np.zeros(channels), requires_grad=True)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.momentum = momentum
        self.eps = eps

    def __call__(self, x, train):
        return tt.batchnorm(x, self.gamma, self.beta, self.running_mean,
                            self.running_var, train, self.momentum, self.eps)


class Dropout(Module):
    def __init__(self, rate):
        self.rate = rate

    def __call__(self, x, rng, train):
        return tt.dropout(x, self.rate, rng, train)
