"""Dense float64 tensors with reverse-mode automatic differentiation.

Values are numpy arrays in row-major (C) order; every operation returns a
fresh tensor and never mutates its inputs, so tensors can be shared freely.
All arithmetic runs in float64 so finite-difference gradient checks are
meaningful at tight tolerances.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "Tensor",
    "as_tensor",
    "add",
    "mul",
    "matmul",
    "reshape",
    "transpose",
    "narrow",
    "concat",
    "broadcast_to",
    "tsum",
    "tmean",
    "sigmoid",
    "silu",
    "tanh",
    "softmax",
    "layer_norm",
    "smooth_l1",
    "conv2d",
    "bilinear_upsample",
]


class Tensor:
    """N-dimensional float64 array, optionally tracked for gradients.

    ``grad`` is allocated (as zeros) for leaf tensors created with
    ``requires_grad=True`` and accumulated into by :meth:`backward`.
    Tensors produced by operations carry the recorded computation instead.
    """

    __slots__ = ("data", "grad", "requires_grad", "_ctx")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(arr) if requires_grad else None
        self._ctx = None

    # -- construction -----------------------------------------------------

    @staticmethod
    def _result(data: np.ndarray, parents, vjp) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        out._ctx = (vjp, tuple(parents)) if out.requires_grad else None
        return out

    # -- basic properties -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        """A copy of the value, safe to mutate."""
        return self.data.copy()

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- autodiff ----------------------------------------------------------

    def zero_grad(self):
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def backward(self):
        """Accumulate d(self)/d(leaf) into every requiring leaf's ``grad``.

        ``self`` must be a scalar. Leaves not connected to it are left
        untouched (their grad stays at its current value, zeros after a
        ``zero_grad``).
        """
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar tensor, got shape %r" % (self.shape,))

        order = _topo_order(self)
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for t in reversed(order):
            g = grads.pop(id(t), None)
            if g is None:
                continue
            if t._ctx is None:
                if t.requires_grad:
                    t.grad = t.grad + g if t.grad is not None else g.copy()
                continue
            vjp, parents = t._ctx
            for parent, pg in zip(parents, vjp(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(as_tensor(other), -1.0))

    def __rsub__(self, other):
        return add(as_tensor(other), mul(self, -1.0))

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division by a Tensor is not supported; divide by a scalar")
        return mul(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)


def as_tensor(x) -> Tensor:
    """Wrap arrays/scalars as constant tensors; pass tensors through."""
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def _topo_order(root: Tensor):
    order = []
    seen = set()
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
        if node._ctx is not None:
            for p in node._ctx[1]:
                if id(p) not in seen:
                    stack.append((p, False))
    return order


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (the reverse of numpy broadcasting)."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- elementwise arithmetic -------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return Tensor._result(out, (a, b), vjp)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def vjp(g):
        return _unbroadcast(g * b.data, a.data.shape), _unbroadcast(g * a.data, b.data.shape)

    return Tensor._result(out, (a, b), vjp)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul expects tensors with ndim >= 2")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    out = np.matmul(a.data, b.data)

    def vjp(g):
        ga = np.matmul(g, b.data.swapaxes(-1, -2))
        gb = np.matmul(a.data.swapaxes(-1, -2), g)
        return _unbroadcast(ga, a.data.shape), _unbroadcast(gb, b.data.shape)

    return Tensor._result(out, (a, b), vjp)


# -- structure ---------------------------------------------------------------


def reshape(t: Tensor, shape) -> Tensor:
    t = as_tensor(t)
    shape = tuple(shape)
    out = t.data.reshape(shape)

    def vjp(g):
        return (g.reshape(t.data.shape),)

    return Tensor._result(out, (t,), vjp)


def transpose(t: Tensor, axes) -> Tensor:
    t = as_tensor(t)
    axes = tuple(axes)
    inv = np.argsort(axes)
    out = t.data.transpose(axes)

    def vjp(g):
        return (g.transpose(inv),)

    return Tensor._result(out, (t,), vjp)


def narrow(t: Tensor, axis: int, start: int, length: int) -> Tensor:
    """A contiguous slice ``[start, start+length)`` along one axis."""
    t = as_tensor(t)
    axis = axis % t.ndim
    if start < 0 or length < 0 or start + length > t.shape[axis]:
        raise ValueError(f"narrow out of range: axis {axis} start {start} length {length} of {t.shape}")
    idx = tuple(slice(None) if i != axis else slice(start, start + length) for i in range(t.ndim))
    out = t.data[idx].copy()

    def vjp(g):
        full = np.zeros_like(t.data)
        full[idx] = g
        return (full,)

    return Tensor._result(out, (t,), vjp)


def concat(tensors, axis: int) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ValueError("concat of an empty sequence")
    axis = axis % tensors[0].ndim
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def vjp(g):
        pieces = []
        for i in range(len(tensors)):
            idx = tuple(
                slice(None) if d != axis else slice(bounds[i], bounds[i + 1])
                for d in range(g.ndim)
            )
            pieces.append(g[idx])
        return tuple(pieces)

    return Tensor._result(out, tuple(tensors), vjp)


def broadcast_to(t: Tensor, shape) -> Tensor:
    t = as_tensor(t)
    shape = tuple(shape)
    out = np.broadcast_to(t.data, shape).copy()

    def vjp(g):
        return (_unbroadcast(g, t.data.shape),)

    return Tensor._result(out, (t,), vjp)


# -- reductions ---------------------------------------------------------------


def _reduce_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        return (axis % ndim,)
    return tuple(a % ndim for a in axis)


def tsum(t: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    t = as_tensor(t)
    axes = _reduce_axes(axis, t.ndim)
    out = t.data.sum(axis=axes, keepdims=keepdims)

    def vjp(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, t.data.shape).copy(),)

    return Tensor._result(out, (t,), vjp)


def tmean(t: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    t = as_tensor(t)
    axes = _reduce_axes(axis, t.ndim)
    count = int(np.prod([t.shape[a] for a in axes])) if axes else 1
    out = t.data.mean(axis=axes, keepdims=keepdims)

    def vjp(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / count, t.data.shape).copy(),)

    return Tensor._result(out, (t,), vjp)


# -- pointwise nonlinearities --------------------------------------------------


def sigmoid(t: Tensor) -> Tensor:
    t = as_tensor(t)
    # evaluate on the stable side of 0 to avoid overflow in exp
    x = t.data
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def vjp(g):
        return (g * out * (1.0 - out),)

    return Tensor._result(out, (t,), vjp)


def silu(t: Tensor) -> Tensor:
    t = as_tensor(t)
    x = t.data
    s = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = x * s

    def vjp(g):
        return (g * (s + x * s * (1.0 - s)),)

    return Tensor._result(out, (t,), vjp)


def tanh(t: Tensor) -> Tensor:
    """tanh composed from the sigmoid primitive: 2*sigmoid(2x) - 1."""
    return add(mul(sigmoid(mul(t, 2.0)), 2.0), -1.0)


def softmax(t: Tensor, axis: int = -1) -> Tensor:
    t = as_tensor(t)
    x = t.data
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        gy = g * out
        return (gy - out * gy.sum(axis=axis, keepdims=True),)

    return Tensor._result(out, (t,), vjp)


def layer_norm(t: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalization over the last axis with learned scale and shift."""
    t, gamma, beta = as_tensor(t), as_tensor(gamma), as_tensor(beta)
    x = t.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def vjp(g):
        gg = _unbroadcast(g * xhat, gamma.data.shape)
        gb = _unbroadcast(g, beta.data.shape)
        gxh = g * gamma.data
        m1 = gxh.mean(axis=-1, keepdims=True)
        m2 = (gxh * xhat).mean(axis=-1, keepdims=True)
        gx = inv * (gxh - m1 - xhat * m2)
        return gx, gg, gb

    return Tensor._result(out, (t, gamma, beta), vjp)


def smooth_l1(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise smooth L1 (Huber, delta=1) between two tensors."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"smooth_l1 shapes differ: {a.shape} vs {b.shape}")
    d = a.data - b.data
    absd = np.abs(d)
    out = np.where(absd < 1.0, 0.5 * d * d, absd - 0.5)

    def vjp(g):
        gd = g * np.where(absd < 1.0, d, np.sign(d))
        return gd, -gd

    return Tensor._result(out, (a, b), vjp)


# -- convolution ---------------------------------------------------------------


def conv2d(x: Tensor, w: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation over [B, C, H, W] with an [O, C, kh, kw] kernel.

    Kernel sides must be 1 or 3; padding is symmetric zero padding.
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 4 or w.ndim != 4:
        raise ValueError(f"conv2d expects 4-D input and weight, got {x.shape} and {w.shape}")
    if not isinstance(stride, int) or stride < 1:
        raise ValueError(f"stride must be a positive int, got {stride!r}")
    if not isinstance(padding, int) or padding < 0:
        raise ValueError(f"padding must be a non-negative int, got {padding!r}")
    b_, cin, h, wd = x.shape
    cout, cin_w, kh, kw = w.shape
    if cin != cin_w:
        raise ValueError(f"conv2d channel mismatch: input has {cin}, weight expects {cin_w}")
    if kh not in (1, 3) or kw not in (1, 3):
        raise ValueError(f"conv2d kernel sides must be 1 or 3, got {kh}x{kw}")
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (cout,):
            raise ValueError(f"conv2d bias shape {bias.shape} != ({cout},)")
    hp, wp = h + 2 * padding, wd + 2 * padding
    if hp < kh or wp < kw:
        raise ValueError("conv2d input smaller than kernel after padding")
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    out = np.einsum("bcijuv,ocuv->boij", win, w.data, optimize=True)
    if bias is not None:
        out = out + bias.data[None, :, None, None]

    parents = (x, w) if bias is None else (x, w, bias)

    def vjp(g):
        gw = np.einsum("bcijuv,boij->ocuv", win, g, optimize=True)
        gxp = np.zeros((b_, cin, hp, wp))
        for u in range(kh):
            for v in range(kw):
                contrib = np.einsum("boij,oc->bcij", g, w.data[:, :, u, v], optimize=True)
                gxp[:, :, u : u + stride * ho : stride, v : v + stride * wo : stride] += contrib
        gx = gxp[:, :, padding : padding + h, padding : padding + wd] if padding else gxp
        if bias is None:
            return gx, gw
        return gx, gw, g.sum(axis=(0, 2, 3))

    return Tensor._result(out, parents, vjp)


def _lerp_matrix(n_out: int, n_in: int, scale: int) -> np.ndarray:
    """Row-interpolation matrix for half-pixel-centers bilinear resampling."""
    m = np.zeros((n_out, n_in))
    for i in range(n_out):
        src = (i + 0.5) / scale - 0.5
        src = min(max(src, 0.0), n_in - 1.0)
        lo = int(np.floor(src))
        hi = min(lo + 1, n_in - 1)
        frac = src - lo
        m[i, lo] += 1.0 - frac
        m[i, hi] += frac
    return m


def bilinear_upsample(x: Tensor, scale: int = 2) -> Tensor:
    """Bilinear resampling of [B, C, H, W] to [B, C, scale*H, scale*W].

    Uses the half-pixel-centers convention; scale=1 is an exact identity.
    """
    x = as_tensor(x)
    if x.ndim != 4:
        raise ValueError(f"bilinear_upsample expects a 4-D tensor, got {x.shape}")
    if not isinstance(scale, int) or scale < 1:
        raise ValueError(f"scale must be an int >= 1, got {scale!r}")
    b, c, h, w = x.shape
    rm = _lerp_matrix(scale * h, h, scale)
    cm = _lerp_matrix(scale * w, w, scale)
    out = np.einsum("Ih,bchw,Jw->bcIJ", rm, x.data, cm, optimize=True)

    def vjp(g):
        return (np.einsum("Ih,bcIJ,Jw->bchw", rm, g, cm, optimize=True),)

    return Tensor._result(out, (x,), vjp)
