"""Parameterized layers built on the tensor core.

Modules hold their parameters as Tensor attributes; ``named_tensors``
walks attributes (and lists of modules) in sorted-name order so the
parameter registry is deterministic. Initial values are drawn in float32
then widened, keeping every parameter exactly representable in the
checkpoint's 32-bit payload.
"""

from __future__ import annotations

import numpy as np

from . import tensor as tt
from .tensor import Tensor

__all__ = ["Module", "Linear", "Conv2d", "LayerNorm", "Mlp", "CausalConv1d"]


def init_normal(rng: np.random.Generator, shape, std: float) -> Tensor:
    vals = rng.normal(0.0, std, shape).astype(np.float32).astype(np.float64)
    return Tensor(vals, requires_grad=True)


def init_zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


class Module:
    """Base for parameter containers; not a computation graph node."""

    def named_tensors(self, prefix: str = ""):
        """Yield (name, tensor) for every Tensor reachable from this module."""
        for name in sorted(vars(self)):
            value = getattr(self, name)
            yield from _walk(f"{prefix}{name}", value)

    def parameters(self):
        """Trainable tensors only (requires_grad set)."""
        return [t for _, t in self.named_tensors() if t.requires_grad]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def _walk(name, value):
    if isinstance(value, Tensor):
        yield name, value
    elif isinstance(value, Module):
        yield from value.named_tensors(prefix=name + ".")
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _walk(f"{name}.{i}", item)
    elif hasattr(value, "named_tensors"):
        yield from value.named_tensors(prefix=name + ".")


class Linear(Module):
    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int):
        self.w = init_normal(rng, (d_in, d_out), 1.0 / np.sqrt(d_in))
        self.b = init_zeros(d_out)

    def forward(self, x: Tensor) -> Tensor:
        return tt.matmul(x, self.w) + self.b


class Conv2d(Module):
    def __init__(self, rng: np.random.Generator, c_in: int, c_out: int, kernel: int, stride: int = 1):
        if kernel not in (1, 3):
            raise ValueError(f"kernel must be 1 or 3, got {kernel}")
        self.w = init_normal(rng, (c_out, c_in, kernel, kernel), 1.0 / np.sqrt(c_in * kernel * kernel))
        self.b = init_zeros(c_out)
        self.stride = stride
        self.padding = 1 if kernel == 3 else 0

    def forward(self, x: Tensor) -> Tensor:
        return tt.conv2d(x, self.w, self.b, stride=self.stride, padding=self.padding)


class LayerNorm(Module):
    def __init__(self, dim: int):
        self.gamma = Tensor(np.ones(dim), requires_grad=True)
        self.beta = init_zeros(dim)

    def forward(self, x: Tensor) -> Tensor:
        return tt.layer_norm(x, self.gamma, self.beta)


class Mlp(Module):
    """Two-layer feed-forward with SiLU in between."""

    def __init__(self, rng: np.random.Generator, dim: int, hidden: int):
        self.fc1 = Linear(rng, dim, hidden)
        self.fc2 = Linear(rng, hidden, dim)

    def forward(self, x: Tensor) -> Tensor:
        return self.fc2(tt.silu(self.fc1(x)))


class ChannelNorm(Module):
    """Layer normalization over the channel axis of [B, C, H, W] maps."""

    def __init__(self, channels: int):
        self.norm = LayerNorm(channels)

    def forward(self, x: Tensor) -> Tensor:
        t = tt.transpose(x, (0, 2, 3, 1))
        return tt.transpose(self.norm(t), (0, 3, 1, 2))


class CausalConv1d(Module):
    """Depthwise causal convolution over the sequence axis of [B, L, D].

    Composed from shifts (zero padding on the left) and broadcast
    multiplies, so position t only sees positions t, t-1, ..., t-width+1.
    """

    def __init__(self, rng: np.random.Generator, dim: int, width: int = 3):
        if width < 1:
            raise ValueError("width must be >= 1")
        self.w = init_normal(rng, (width, dim), 1.0 / np.sqrt(width))
        self.b = init_zeros(dim)
        self.width = width

    def forward(self, x: Tensor) -> Tensor:
        length = x.shape[-2]
        taps = []
        for k in range(self.width):
            tap = tt.narrow(self.w, 0, k, 1).reshape((self.w.shape[1],))
            if k == 0:
                shifted = x
            elif k >= length:
                continue
            else:
                zeros = Tensor(np.zeros(x.shape[:-2] + (k, x.shape[-1])))
                shifted = tt.concat([zeros, tt.narrow(x, x.ndim - 2, 0, length - k)], axis=x.ndim - 2)
            taps.append(shifted * tap)
        out = taps[0]
        for t in taps[1:]:
            out = out + t
        return out + self.b
