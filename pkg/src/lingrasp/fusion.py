"""Multi-scale vision-language feature fusion.

Each pyramid level projects its image features and the (spatially
broadcast) text features to a common width with 1x1 maps, concatenates
them along channels, and mixes with a 3x3 convolution. Fused levels are
combined top-down: each deeper level is convolved, bilinearly doubled,
and added to the level above, ending at the finest resolution.
"""

from __future__ import annotations

import numpy as np

from . import tensor as tt
from .tensor import Tensor
from .layers import Conv2d, Linear, Module

__all__ = ["FuseLevel", "Upscale", "FusionHierarchy"]


class FuseLevel(Module):
    """Per-level fusion: concat(1x1 image proj, broadcast text proj) -> 3x3 conv."""

    def __init__(self, rng: np.random.Generator, c_img: int, c_text: int, c_fused: int):
        self.img_proj = Conv2d(rng, c_img, c_fused, 1)
        self.text_proj = Linear(rng, c_text, c_fused)
        self.mix = Conv2d(rng, 2 * c_fused, c_fused, 3)

    def forward(self, x: Tensor, text: Tensor) -> Tensor:
        """x: [B, C_l, H, W]; text: [B, C_T] broadcast to every location."""
        if x.ndim != 4:
            raise ValueError(f"expected [B, C, H, W] features, got {x.shape}")
        if text.ndim != 2 or text.shape[0] != x.shape[0]:
            raise ValueError(f"text batch {text.shape} does not match image batch {x.shape}")
        b, _, h, w = x.shape
        img = self.img_proj(x)
        txt = self.text_proj(text)  # a 1x1 conv of spatially constant input
        txt = tt.broadcast_to(tt.reshape(txt, (b, txt.shape[1], 1, 1)), (b, txt.shape[1], h, w))
        return self.mix(tt.concat([img, txt], axis=1))


class Upscale(Module):
    """3x3 convolution followed by exact 2x bilinear growth."""

    def __init__(self, rng: np.random.Generator, c_fused: int):
        self.conv = Conv2d(rng, c_fused, c_fused, 3)

    def forward(self, f: Tensor) -> Tensor:
        return tt.bilinear_upsample(self.conv(f), 2)


class FusionHierarchy(Module):
    """Top-down recursion over fused levels.

    The deepest level is its own fusion; every shallower level adds the
    upscaled deeper result. ``n_levels`` image widths are given finest
    first, matching pyramid order.
    """

    def __init__(self, rng: np.random.Generator, img_widths: list[int], c_text: int, c_fused: int):
        if not img_widths:
            raise ValueError("at least one pyramid level is required")
        self.levels = [FuseLevel(rng, c, c_text, c_fused) for c in img_widths]
        self.upscales = [Upscale(rng, c_fused) for _ in img_widths[1:]]

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def forward(self, pyramid_levels: list[Tensor], text: Tensor, return_all: bool = False):
        """Returns the finest fused map, or all per-level maps finest-first."""
        n = self.n_levels
        if len(pyramid_levels) != n:
            raise ValueError(f"expected {n} pyramid levels, got {len(pyramid_levels)}")
        fused = [None] * n
        fused[n - 1] = self.levels[n - 1](pyramid_levels[n - 1], text)
        for l in range(n - 2, -1, -1):
            up = self.upscales[l](fused[l + 1])
            phi = self.levels[l](pyramid_levels[l], text)
            if up.shape != phi.shape:
                raise ValueError(
                    f"upscaled level {l + 1} shape {up.shape} does not land on level {l} shape {phi.shape}"
                )
            fused[l] = phi + up
        return fused if return_all else fused[0]
