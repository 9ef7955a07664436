"""The full detector: backbone -> per-level text fusion -> grasp-map head."""

from __future__ import annotations

import numpy as np

from . import tensor as tt
from .tensor import Tensor
from .backbone import Backbone
from .config import TrainConfig
from .fusion import FusionHierarchy
from .layers import Conv2d, Module
from .text import TextEncoder

__all__ = ["GraspHead", "GraspModel", "build_model"]


class GraspHead(Module):
    """Per-position MLP (two 1x1 convs) to 4 maps, then upsample to image size.

    Output channels are (quality, cos 2t, sin 2t, width) squashed into
    their ranges with sigmoid / tanh before resampling, so interpolated
    values stay in range.
    """

    def __init__(self, rng: np.random.Generator, c_in: int):
        self.fc1 = Conv2d(rng, c_in, c_in, 1)
        self.fc2 = Conv2d(rng, c_in, 4, 1)
        # quality starts low: most positions are background, so training
        # budget goes into raising peaks rather than suppressing everything
        self.fc2.b.data[0] = -2.0

    def forward(self, fused: Tensor, out_hw: tuple[int, int]) -> Tensor:
        raw = self.fc2(tt.silu(self.fc1(fused)))
        quality = tt.sigmoid(tt.narrow(raw, 1, 0, 1))
        cos2t = tt.tanh(tt.narrow(raw, 1, 1, 1))
        sin2t = tt.tanh(tt.narrow(raw, 1, 2, 1))
        width = tt.sigmoid(tt.narrow(raw, 1, 3, 1))
        maps = tt.concat([quality, cos2t, sin2t, width], axis=1)
        scale = out_hw[0] // fused.shape[2]
        if scale * fused.shape[2] != out_hw[0] or scale * fused.shape[3] != out_hw[1]:
            raise ValueError(f"fused map {fused.shape} does not scale to {out_hw}")
        if scale > 1:
            maps = tt.bilinear_upsample(maps, scale)
        return maps


class GraspModel(Module):
    """End-to-end network mapping (image batch, prompts) to grasp maps."""

    def __init__(self, config: TrainConfig, rng: np.random.Generator):
        c = config.stem_width
        self.backbone = Backbone(
            rng,
            stem_width=c,
            depths=config.depths,
            state_dim=config.state_dim,
            heads=config.heads,
            conv_width=config.conv_width,
            mlp_ratio=config.mlp_ratio,
        )
        self.fusion = FusionHierarchy(
            rng,
            img_widths=[c, 2 * c, 4 * c, 8 * c],
            c_text=config.text_dim,
            c_fused=config.fused_width,
        )
        self.head = GraspHead(rng, config.fused_width)
        self.text = TextEncoder(
            embed_dim=config.text_dim,
            n_buckets=config.vocab_buckets,
            seed=config.seed,
        )
        self.use_fusion = config.fusion

    def embed_prompts(self, prompts: list[str]) -> np.ndarray:
        """Prompt vectors [B, C_T]; zeros when the fusion path is disabled."""
        if not self.use_fusion:
            return np.zeros((len(prompts), self.text.embed_dim))
        return self.text.encode_batch(prompts)

    def forward(self, images: Tensor, text_vecs, mode: str = "scan") -> Tensor:
        """Dense maps [B, 4, H, W] for [B, 3, H, W] images and [B, C_T] text."""
        text = text_vecs if isinstance(text_vecs, Tensor) else Tensor(np.asarray(text_vecs))
        pyramid = self.backbone(images, mode=mode)
        fused = self.fusion(pyramid.levels, text)
        return self.head(fused, (images.shape[2], images.shape[3]))

    def predict_maps(self, images: np.ndarray, prompts: list[str], mode: str = "scan") -> np.ndarray:
        """Inference convenience: numpy in, numpy [B, 4, H, W] out."""
        vecs = self.embed_prompts(prompts)
        out = self.forward(Tensor(np.asarray(images, dtype=np.float64)), vecs, mode=mode)
        return out.data


def build_model(config: TrainConfig) -> GraspModel:
    """Deterministic construction from the config's seed."""
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    return GraspModel(config, rng)
