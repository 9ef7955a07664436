"""Dense grasp maps and the conversions to and from grasp rectangles.

Targets paint a quality of 1 on the center third (along the opening axis)
of each rectangle, together with cos(2*theta), sin(2*theta) and the
normalized opening width on the same support. Decoding finds quality
peaks on a lightly smoothed copy of the map, reads the angle and width at
each peak, and fixes the jaw size at half the opening.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .geometry import GraspRect

__all__ = ["GraspMaps", "encode_targets", "decode_grasps", "DecodedGrasp"]


@dataclass
class GraspMaps:
    """Per-pixel grasp fields sharing one [H, W] grid."""

    quality: np.ndarray  # in [0, 1]
    cos2t: np.ndarray    # in [-1, 1]
    sin2t: np.ndarray    # in [-1, 1]
    width: np.ndarray    # opening / max opening, in [0, 1]

    def __post_init__(self):
        shape = self.quality.shape
        for name in ("cos2t", "sin2t", "width"):
            if getattr(self, name).shape != shape:
                raise ValueError(f"map {name} shape {getattr(self, name).shape} != {shape}")

    def stack(self) -> np.ndarray:
        return np.stack([self.quality, self.cos2t, self.sin2t, self.width])

    @classmethod
    def from_stack(cls, arr: np.ndarray) -> "GraspMaps":
        if arr.ndim != 3 or arr.shape[0] != 4:
            raise ValueError(f"expected [4, H, W], got {arr.shape}")
        return cls(quality=arr[0], cos2t=arr[1], sin2t=arr[2], width=arr[3])


@dataclass
class DecodedGrasp:
    rect: GraspRect
    quality: float


def _support_mask(h: int, w: int, g: GraspRect) -> np.ndarray:
    """Pixels whose centers fall in the center third of the rectangle."""
    half_u = g.w / 6.0  # third of the opening, centered
    half_v = g.h / 2.0
    reach = math.hypot(half_u, half_v)
    x0 = max(int(math.floor(g.x - reach)), 0)
    x1 = min(int(math.ceil(g.x + reach)) + 1, w)
    y0 = max(int(math.floor(g.y - reach)), 0)
    y1 = min(int(math.ceil(g.y + reach)) + 1, h)
    mask = np.zeros((h, w), dtype=bool)
    if x0 >= x1 or y0 >= y1:
        return mask
    ys, xs = np.mgrid[y0:y1, x0:x1]
    dx = xs - g.x
    dy = ys - g.y
    ct, st = math.cos(g.theta), math.sin(g.theta)
    u = dx * ct + dy * st
    v = -dx * st + dy * ct
    mask[y0:y1, x0:x1] = (np.abs(u) <= half_u) & (np.abs(v) <= half_v)
    return mask


def encode_targets(grasps: list[GraspRect], h: int, w: int, max_width: float) -> GraspMaps:
    """Rasterize ground-truth grasps into training maps (later ones win)."""
    quality = np.zeros((h, w))
    cos2t = np.zeros((h, w))
    sin2t = np.zeros((h, w))
    width = np.zeros((h, w))
    for g in grasps:
        mask = _support_mask(h, w, g)
        quality[mask] = 1.0
        cos2t[mask] = math.cos(2.0 * g.theta)
        sin2t[mask] = math.sin(2.0 * g.theta)
        width[mask] = min(g.w, max_width) / max_width
    return GraspMaps(quality=quality, cos2t=cos2t, sin2t=sin2t, width=width)


def _gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian with zero padding; sigma <= 0 is a no-op."""
    if sigma <= 0:
        return img
    radius = max(1, int(round(3.0 * sigma)))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (xs / sigma) ** 2)
    kernel /= kernel.sum()
    out = np.apply_along_axis(lambda row: np.convolve(row, kernel, mode="same"), 1, img)
    out = np.apply_along_axis(lambda col: np.convolve(col, kernel, mode="same"), 0, out)
    return out


def _local_maxima(img: np.ndarray, min_distance: int) -> np.ndarray:
    """Boolean map of pixels equal to the max over their (2d+1)^2 window."""
    d = max(1, int(min_distance))
    padded = np.pad(img, d, mode="constant", constant_values=-np.inf)
    windows = sliding_window_view(padded, (2 * d + 1, 2 * d + 1))
    return img >= windows.max(axis=(-1, -2))


def decode_grasps(
    maps: GraspMaps,
    k: int,
    max_width: float,
    quality_threshold: float = 0.3,
    blur_sigma: float = 2.0,
    min_distance: int = 5,
) -> list[DecodedGrasp]:
    """Extract up to k grasp rectangles from dense maps, best quality first.

    Peaks are local maxima of the smoothed quality above the threshold;
    ties are broken by position in row-major order. Angle comes from
    atan2(sin2t, cos2t)/2 at the peak; jaw size is half the opening.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    smooth = _gaussian_blur(maps.quality, blur_sigma)
    peaks = _local_maxima(smooth, min_distance) & (maps.quality > quality_threshold)
    ys, xs = np.nonzero(peaks)
    if ys.size == 0:
        return []
    order = sorted(range(ys.size), key=lambda i: (-maps.quality[ys[i], xs[i]], ys[i], xs[i]))
    results: list[DecodedGrasp] = []
    taken: list[tuple[int, int]] = []
    for i in order:
        y, x = int(ys[i]), int(xs[i])
        if any(abs(y - ty) <= min_distance and abs(x - tx) <= min_distance for ty, tx in taken):
            continue
        theta = 0.5 * math.atan2(maps.sin2t[y, x], maps.cos2t[y, x])
        # widths regressed at low resolution are attenuated toward the zero
        # background by upsampling; a small window max undoes that
        r = 2
        window = maps.width[max(y - r, 0) : y + r + 1, max(x - r, 0) : x + r + 1]
        opening = float(np.clip(window.max(), 0.0, 1.0)) * max_width
        if opening <= 0.0:
            continue
        rect = GraspRect(x=float(x), y=float(y), w=opening, h=opening / 2.0, theta=theta)
        results.append(DecodedGrasp(rect=rect, quality=float(maps.quality[y, x])))
        taken.append((y, x))
        if len(results) == k:
            break
    return results
