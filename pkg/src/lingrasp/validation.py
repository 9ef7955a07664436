"""Input validation helpers shared by the public entry points."""

from __future__ import annotations

import numpy as np

__all__ = ["check_image", "check_prompt", "check_samples", "check_positive_int"]


def check_image(image, name: str = "image") -> np.ndarray:
    """Validate and return a [3, H, W] float image with sides divisible by 32."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise ValueError(f"{name} must have shape [3, H, W], got {arr.shape}")
    if arr.shape[1] % 32 != 0 or arr.shape[2] % 32 != 0 or min(arr.shape[1:]) < 32:
        raise ValueError(f"{name} sides must be multiples of 32 and >= 32, got {arr.shape[1]}x{arr.shape[2]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_prompt(prompt, name: str = "prompt") -> str:
    if not isinstance(prompt, str) or not prompt.strip():
        raise ValueError(f"{name} must be a non-empty string, got {prompt!r}")
    return prompt


def check_samples(samples, name: str = "samples") -> list:
    samples = list(samples)
    if not samples:
        raise ValueError(f"{name} must be non-empty")
    for s in samples:
        for attr in ("image", "prompt", "grasps", "split"):
            if not hasattr(s, attr):
                raise ValueError(f"{name} entries must be dataset samples; missing {attr!r}")
    return samples


def check_positive_int(value, name: str) -> int:
    if not isinstance(value, (int, np.integer)) or value < 1:
        raise ValueError(f"{name} must be a positive int, got {value!r}")
    return int(value)
