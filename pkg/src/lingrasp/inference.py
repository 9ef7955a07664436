"""Forward passes on real inputs: grasp extraction and heatmap rendering."""

from __future__ import annotations

import numpy as np
from PIL import Image

from .config import TrainConfig
from .maps import GraspMaps, decode_grasps
from .model import GraspModel

__all__ = ["infer", "predict_sample", "load_image", "save_heatmap"]


def load_image(path) -> np.ndarray:
    """PNG -> [3, H, W] floats in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return arr.transpose(2, 0, 1)


def _decode(maps_arr: np.ndarray, config: TrainConfig, k: int):
    maps = GraspMaps.from_stack(maps_arr)
    return maps, decode_grasps(
        maps,
        k=k,
        max_width=config.max_gripper_width,
        quality_threshold=config.quality_threshold,
        blur_sigma=config.peak_blur_sigma,
        min_distance=config.peak_min_distance,
    )


def infer(model: GraspModel, config: TrainConfig, image: np.ndarray, prompt: str, k: int = 1):
    """Returns (decoded grasps best first, quality map [H, W])."""
    if image.ndim != 3 or image.shape[0] != 3:
        raise ValueError(f"expected a [3, H, W] image, got {image.shape}")
    if image.shape[1] % 32 != 0 or image.shape[2] % 32 != 0:
        raise ValueError(f"image sides must be multiples of 32, got {image.shape[1]}x{image.shape[2]}")
    out = model.predict_maps(image[None], [prompt])[0]
    maps, decoded = _decode(out, config, k)
    return decoded, maps.quality


def predict_sample(model: GraspModel, config: TrainConfig, sample, k: int = 1):
    """Decoded rectangles for a dataset sample (no quality map)."""
    out = model.predict_maps(sample.image[None], [sample.prompt])[0]
    _, decoded = _decode(out, config, k)
    return [d.rect for d in decoded]


# three-stop gradient: dark blue -> amber -> red
_STOPS = np.array([[0.05, 0.05, 0.30], [0.95, 0.75, 0.10], [0.90, 0.10, 0.10]])


def render_heatmap(quality: np.ndarray) -> np.ndarray:
    """Color-map a [H, W] quality field to an [H, W, 3] uint8 image."""
    q = np.clip(quality, 0.0, 1.0)
    pos = q * (len(_STOPS) - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, len(_STOPS) - 1)
    frac = (pos - lo)[..., None]
    rgb = _STOPS[lo] * (1.0 - frac) + _STOPS[hi] * frac
    return np.clip(np.round(rgb * 255.0), 0, 255).astype(np.uint8)


def save_heatmap(quality: np.ndarray, path):
    Image.fromarray(render_heatmap(quality), mode="RGB").save(path)
