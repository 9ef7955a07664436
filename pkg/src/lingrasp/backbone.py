"""Four-stage hierarchical visual feature extractor.

Two convolutional stages produce maps at 1/4 and 1/8 resolution; two token
stages mix flattened maps at 1/16 and 1/32 resolution with a state-space
branch plus a symmetric convolution-only branch, followed by multi-head
self-attention. Channel width doubles at every stage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as tt
from .tensor import Tensor
from .layers import CausalConv1d, ChannelNorm, Conv2d, LayerNorm, Linear, Mlp, Module
from .ssm import discretize, init_ssm_params, scan, ssm_kernel, conv_apply

__all__ = [
    "FeaturePyramid",
    "Backbone",
    "MambaVisionBlock",
    "AttentionBlock",
    "tokens_from_map",
    "map_from_tokens",
]


@dataclass
class FeaturePyramid:
    """Four maps at 1/4 ... 1/32 resolution with widths C, 2C, 4C, 8C."""

    levels: list

    def __post_init__(self):
        if len(self.levels) != 4:
            raise ValueError(f"a feature pyramid has exactly 4 levels, got {len(self.levels)}")
        for i in range(1, 4):
            prev, cur = self.levels[i - 1].shape, self.levels[i].shape
            if cur[1] != 2 * prev[1] or 2 * cur[2] != prev[2] or 2 * cur[3] != prev[3]:
                raise ValueError(f"level {i} shape {cur} does not halve/double level {i - 1} shape {prev}")

    @property
    def shapes(self):
        return [lvl.shape for lvl in self.levels]


def tokens_from_map(x: Tensor) -> Tensor:
    """[B, C, H, W] -> [B, H*W, C], rows scanned in row-major order."""
    b, c, h, w = x.shape
    return tt.transpose(tt.reshape(x, (b, c, h * w)), (0, 2, 1))


def map_from_tokens(t: Tensor, h: int, w: int) -> Tensor:
    """Inverse of :func:`tokens_from_map`."""
    b, l, c = t.shape
    if l != h * w:
        raise ValueError(f"token count {l} != {h}x{w}")
    return tt.reshape(tt.transpose(t, (0, 2, 1)), (b, c, h, w))


class SSMChannelMixer(Module):
    """Per-channel state-space sequence transform applied to token features."""

    def __init__(self, rng: np.random.Generator, dim: int, state_dim: int):
        self.params = init_ssm_params(rng, dim, state_dim)

    def forward(self, x: Tensor, mode: str = "scan") -> Tensor:
        d = discretize(self.params)
        if mode == "scan":
            return scan(d, self.params.c, x)
        if mode == "conv":
            k = ssm_kernel(d, self.params.c, x.shape[-2])
            return conv_apply(x, k)
        raise ValueError(f"unknown ssm mode: {mode!r}")

    def named_tensors(self, prefix: str = ""):
        yield prefix + "a_diag", self.params.a_diag
        yield prefix + "b", self.params.b
        yield prefix + "c", self.params.c
        yield prefix + "log_delta", self.params.log_delta


class MambaVisionBlock(Module):
    """Token mixer with an SSM branch and a symmetric branch without SSM.

    The channel halves are processed by (linear -> short causal conv ->
    SiLU), the first half additionally through the state-space scan; the
    halves are concatenated and projected, with pre-norm residuals around
    the mixer and around a two-layer MLP.
    """

    def __init__(self, rng: np.random.Generator, dim: int, state_dim: int, conv_width: int = 3, mlp_ratio: int = 2):
        if dim % 2 != 0:
            raise ValueError(f"token width must be even to split into branches, got {dim}")
        half = dim // 2
        self.norm1 = LayerNorm(dim)
        self.lin_ssm = Linear(rng, half, half)
        self.conv_ssm = CausalConv1d(rng, half, conv_width)
        self.ssm = SSMChannelMixer(rng, half, state_dim)
        self.lin_sym = Linear(rng, half, half)
        self.conv_sym = CausalConv1d(rng, half, conv_width)
        self.proj = Linear(rng, dim, dim)
        self.norm2 = LayerNorm(dim)
        self.mlp = Mlp(rng, dim, mlp_ratio * dim)

    def forward(self, x: Tensor, mode: str = "scan") -> Tensor:
        dim = x.shape[-1]
        half = dim // 2
        t = self.norm1(x)
        t1 = tt.narrow(t, t.ndim - 1, 0, half)
        t2 = tt.narrow(t, t.ndim - 1, half, half)
        b1 = self.ssm(tt.silu(self.conv_ssm(self.lin_ssm(t1))), mode=mode)
        b2 = tt.silu(self.conv_sym(self.lin_sym(t2)))
        x = x + self.proj(tt.concat([b1, b2], axis=x.ndim - 1))
        return x + self.mlp(self.norm2(x))


class AttentionBlock(Module):
    """Standard pre-norm multi-head self-attention block (no positions)."""

    def __init__(self, rng: np.random.Generator, dim: int, heads: int, mlp_ratio: int = 2):
        if dim % heads != 0:
            raise ValueError(f"token width {dim} not divisible by {heads} heads")
        self.heads = heads
        self.norm1 = LayerNorm(dim)
        self.qkv = Linear(rng, dim, 3 * dim)
        self.proj = Linear(rng, dim, dim)
        self.norm2 = LayerNorm(dim)
        self.mlp = Mlp(rng, dim, mlp_ratio * dim)

    def attention(self, x: Tensor) -> Tensor:
        b, l, d = x.shape
        h = self.heads
        dh = d // h
        qkv = self.qkv(x)  # [B, L, 3D]
        qkv = tt.transpose(tt.reshape(qkv, (b, l, 3, h, dh)), (2, 0, 3, 1, 4))  # [3, B, h, L, dh]
        q = tt.reshape(tt.narrow(qkv, 0, 0, 1), (b, h, l, dh))
        k = tt.reshape(tt.narrow(qkv, 0, 1, 1), (b, h, l, dh))
        v = tt.reshape(tt.narrow(qkv, 0, 2, 1), (b, h, l, dh))
        scores = tt.matmul(q, tt.transpose(k, (0, 1, 3, 2))) * (1.0 / np.sqrt(dh))
        weights = tt.softmax(scores, axis=-1)
        out = tt.matmul(weights, v)  # [B, h, L, dh]
        out = tt.reshape(tt.transpose(out, (0, 2, 1, 3)), (b, l, d))
        return self.proj(out)

    def forward(self, x: Tensor) -> Tensor:
        x = x + self.attention(self.norm1(x))
        return x + self.mlp(self.norm2(x))


class ResidualConvBlock(Module):
    def __init__(self, rng: np.random.Generator, channels: int):
        self.conv1 = Conv2d(rng, channels, channels, 3)
        self.conv2 = Conv2d(rng, channels, channels, 3)

    def forward(self, x: Tensor) -> Tensor:
        return x + self.conv2(tt.silu(self.conv1(x)))


class TokenStage(Module):
    """State-space mixer blocks followed by attention blocks."""

    def __init__(self, rng, dim, depth, state_dim, heads, conv_width, mlp_ratio):
        n_mixer = (depth + 1) // 2
        self.blocks = []
        for i in range(depth):
            if i < n_mixer:
                self.blocks.append(MambaVisionBlock(rng, dim, state_dim, conv_width, mlp_ratio))
            else:
                self.blocks.append(AttentionBlock(rng, dim, heads, mlp_ratio))

    def forward(self, x: Tensor, mode: str = "scan") -> Tensor:
        b, c, h, w = x.shape
        t = tokens_from_map(x)
        for block in self.blocks:
            if isinstance(block, MambaVisionBlock):
                t = block(t, mode=mode)
            else:
                t = block(t)
        return map_from_tokens(t, h, w)


class Backbone(Module):
    def __init__(self, rng: np.random.Generator, stem_width: int, depths=(1, 1, 2, 2),
                 state_dim: int = 8, heads: int = 4, conv_width: int = 3, mlp_ratio: int = 2):
        c = stem_width
        self.stem1 = Conv2d(rng, 3, c, 3, stride=2)
        self.stem2 = Conv2d(rng, c, c, 3, stride=2)
        self.stage1 = [ResidualConvBlock(rng, c) for _ in range(depths[0])]
        self.down2 = Conv2d(rng, c, 2 * c, 3, stride=2)
        self.stage2 = [ResidualConvBlock(rng, 2 * c) for _ in range(depths[1])]
        self.down3 = Conv2d(rng, 2 * c, 4 * c, 3, stride=2)
        self.stage3 = TokenStage(rng, 4 * c, depths[2], state_dim, heads, conv_width, mlp_ratio)
        self.down4 = Conv2d(rng, 4 * c, 8 * c, 3, stride=2)
        self.stage4 = TokenStage(rng, 8 * c, depths[3], state_dim, heads, conv_width, mlp_ratio)
        # stage outputs are channel-normalized so every pyramid level hands
        # the fusion stack features of comparable scale
        self.out_norms = [ChannelNorm(c), ChannelNorm(2 * c), ChannelNorm(4 * c), ChannelNorm(8 * c)]

    def forward(self, image: Tensor, mode: str = "scan") -> FeaturePyramid:
        """Extract the 4-level pyramid from an RGB image batch [B, 3, H, W]."""
        if image.ndim != 4 or image.shape[1] != 3:
            raise ValueError(f"expected [B, 3, H, W] image batch, got {image.shape}")
        h, w = image.shape[2], image.shape[3]
        if h % 32 != 0 or w % 32 != 0 or h < 32 or w < 32:
            raise ValueError(f"image sides must be multiples of 32 and >= 32, got {h}x{w}")
        x = tt.silu(self.stem2(tt.silu(self.stem1(image))))
        for blk in self.stage1:
            x = blk(x)
        x1 = x
        x = self.down2(x1)
        for blk in self.stage2:
            x = blk(x)
        x2 = x
        x3 = self.stage3(self.down3(x2), mode=mode)
        x4 = self.stage4(self.down4(x3), mode=mode)
        levels = [norm(lvl) for norm, lvl in zip(self.out_norms, (x1, x2, x3, x4))]
        return FeaturePyramid(levels=levels)
