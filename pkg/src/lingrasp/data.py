"""Procedural language-grasp scenes.

A scene is one prompted target object (bar, disk, ring, L-shape or
T-shape in a palette color) plus a few distractors on a dark table. The
target's grasp set follows from its geometry, so every sample carries
exact ground truth. Categories are color-shape pairs; the seen/unseen
split holds out whole categories.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .geometry import GraspRect, normalize_theta

__all__ = [
    "COLORS",
    "SHAPES",
    "SceneConfig",
    "Sample",
    "category_names",
    "split_categories",
    "generate_scene",
    "make_dataset",
    "save_dataset",
    "load_dataset",
]

COLORS = {
    "red": (0.85, 0.15, 0.15),
    "green": (0.15, 0.75, 0.25),
    "blue": (0.2, 0.35, 0.9),
    "yellow": (0.9, 0.85, 0.2),
}

SHAPES = ("bar", "disk", "ring", "L-shape", "T-shape")

_BACKGROUND = 0.12

PROMPT_TEMPLATES = (
    "grasp the {color} {shape}",
    "pick up the {color} {shape}",
    "grab the {color} {shape}",
    "give me the {color} {shape}",
)


@dataclass
class SceneConfig:
    image_size: int = 224
    colors: tuple = tuple(COLORS)
    shapes: tuple = SHAPES
    min_distractors: int = 0
    max_distractors: int = 3
    grasp_clearance: float = 4.0     # extra opening beyond the object extent, px
    seen_categories: frozenset | None = None  # None marks every sample as seen

    def __post_init__(self):
        self.colors = tuple(self.colors)
        self.shapes = tuple(self.shapes)
        if self.image_size < 32 or self.image_size % 32 != 0:
            raise ValueError(f"image_size must be a multiple of 32, got {self.image_size}")
        if not (0 <= self.min_distractors <= self.max_distractors):
            raise ValueError("need 0 <= min_distractors <= max_distractors")
        for c in self.colors:
            if c not in COLORS:
                raise ValueError(f"unknown color {c!r}")
        for s in self.shapes:
            if s not in SHAPES:
                raise ValueError(f"unknown shape {s!r}")


@dataclass
class Sample:
    id: str
    image: np.ndarray          # [3, H, W] floats in [0, 1]
    prompt: str
    category: str
    grasps: list
    split: str                 # "seen" or "unseen"


def category_names(config: SceneConfig) -> list[str]:
    return [f"{c}-{s}" for c in config.colors for s in config.shapes]


def split_categories(categories: list[str], ratio: float = 0.7, seed: int = 0):
    """Deterministic disjoint partition with |seen| = round(ratio * n)."""
    if len(categories) < 2:
        raise ValueError("need at least 2 categories to split")
    if not (0.0 < ratio < 1.0):
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    rng = np.random.default_rng(seed)
    order = list(categories)
    rng.shuffle(order)
    n_seen = int(len(order) * ratio + 0.5)  # half-up, not banker's
    n_seen = min(max(n_seen, 1), len(order) - 1)
    return frozenset(order[:n_seen]), frozenset(order[n_seen:])


# -- shape rendering ---------------------------------------------------------


def _rot_rect_mask(size: int, cx, cy, length, thickness, alpha) -> np.ndarray:
    ys, xs = np.mgrid[0:size, 0:size]
    dx = xs - cx
    dy = ys - cy
    ct, st = math.cos(alpha), math.sin(alpha)
    u = dx * ct + dy * st
    v = -dx * st + dy * ct
    return (np.abs(u) <= length / 2.0) & (np.abs(v) <= thickness / 2.0)


def _disk_mask(size: int, cx, cy, r) -> np.ndarray:
    ys, xs = np.mgrid[0:size, 0:size]
    return (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r


class _Object:
    """A placed object: mask plus its analytic grasp set."""

    def __init__(self, mask: np.ndarray, grasps: list[GraspRect], radius: float, center):
        self.mask = mask
        self.grasps = grasps
        self.radius = radius  # bounding circle, used for overlap rejection
        self.center = center


# Jaw size relative to the opening. Kept under 2x so a decoded rectangle
# (jaw fixed at half the opening) still clears the 0.25 IoU bar against
# ground truth with a couple of pixels of center error.
_JAW_FACTOR = 1.2


def _build_object(rng: np.random.Generator, shape: str, size: int, clearance: float) -> _Object:
    s = float(size)
    margin = 0.22 * s
    cx = rng.uniform(margin, s - margin)
    cy = rng.uniform(margin, s - margin)
    if shape == "bar":
        length = rng.uniform(0.24, 0.36) * s
        thick = rng.uniform(0.10, 0.15) * s
        alpha = rng.uniform(0.0, math.pi)
        mask = _rot_rect_mask(size, cx, cy, length, thick, alpha)
        w = thick + clearance
        grasps = [GraspRect(cx, cy, w, _JAW_FACTOR * w, alpha + math.pi / 2.0)]
        return _Object(mask, grasps, length / 2.0 + 2, (cx, cy))
    if shape == "disk":
        r = rng.uniform(0.08, 0.12) * s
        mask = _disk_mask(size, cx, cy, r)
        w = 2.0 * r + clearance
        grasps = [GraspRect(cx, cy, w, _JAW_FACTOR * w, i * math.pi / 8.0) for i in range(8)]
        return _Object(mask, grasps, r + 2, (cx, cy))
    if shape == "ring":
        r_out = rng.uniform(0.10, 0.14) * s
        r_in = 0.5 * r_out
        mask = _disk_mask(size, cx, cy, r_out) & ~_disk_mask(size, cx, cy, r_in)
        wall = r_out - r_in
        mid = (r_out + r_in) / 2.0
        w = wall + clearance
        grasps = []
        for i in range(8):
            phi = i * math.pi / 4.0
            gx = cx + mid * math.cos(phi)
            gy = cy + mid * math.sin(phi)
            grasps.append(GraspRect(gx, gy, w, _JAW_FACTOR * w, phi))
        return _Object(mask, grasps, r_out + 2, (cx, cy))
    if shape in ("L-shape", "T-shape"):
        thick = rng.uniform(0.09, 0.13) * s
        la = rng.uniform(0.22, 0.32) * s
        lb = rng.uniform(0.22, 0.32) * s
        alpha = rng.uniform(0.0, math.pi)
        ct, st = math.cos(alpha), math.sin(alpha)
        if shape == "L-shape":
            # limb A along alpha from the corner, limb B perpendicular
            a_cx, a_cy = cx + ct * la / 2.0, cy + st * la / 2.0
            b_cx, b_cy = cx - st * lb / 2.0, cy + ct * lb / 2.0
        else:
            # T: stem along alpha, cap centered at the stem's far end
            a_cx, a_cy = cx, cy
            b_cx, b_cy = cx + ct * la / 2.0, cy + st * la / 2.0
        mask_a = _rot_rect_mask(size, a_cx, a_cy, la, thick, alpha)
        mask_b = _rot_rect_mask(size, b_cx, b_cy, lb, thick, alpha + math.pi / 2.0)
        w = thick + clearance
        grasps = [
            GraspRect(a_cx, a_cy, w, _JAW_FACTOR * w, alpha + math.pi / 2.0),
            GraspRect(b_cx, b_cy, w, _JAW_FACTOR * w, alpha),
        ]
        return _Object(mask_a | mask_b, grasps, (max(la, lb) + thick) / 2.0 + 4, (cx, cy))
    raise ValueError(f"unknown shape {shape!r}")


def _in_bounds(g: GraspRect, size: int) -> bool:
    reach = math.hypot(g.w, g.h) / 2.0
    return reach <= g.x <= size - 1 - reach and reach <= g.y <= size - 1 - reach


def generate_scene(seed: int, config: SceneConfig, index: int = 0) -> Sample:
    """One fully seeded scene; equal (seed, config, index) gives equal bytes."""
    cats = category_names(config)
    if len(cats) < 2:
        raise ValueError("scene generation needs at least 2 categories")
    rng = np.random.default_rng(seed)
    target_cat = cats[rng.integers(len(cats))]
    color_name, shape = target_cat.split("-", 1)

    # rejection-sample a target whose grasps all fit in the image
    for _ in range(64):
        target = _build_object(rng, shape, config.image_size, config.grasp_clearance)
        if all(_in_bounds(g, config.image_size) for g in target.grasps):
            break
    else:
        raise RuntimeError(f"could not place target for category {target_cat}")

    image = np.full((3, config.image_size, config.image_size), _BACKGROUND)
    placed = [target]
    n_distract = int(rng.integers(config.min_distractors, config.max_distractors + 1))
    distractors = []
    for _ in range(n_distract):
        for _ in range(16):
            cat = cats[rng.integers(len(cats))]
            if cat == target_cat:
                continue
            d_color, d_shape = cat.split("-", 1)
            obj = _build_object(rng, d_shape, config.image_size, config.grasp_clearance)
            if all(
                math.hypot(obj.center[0] - p.center[0], obj.center[1] - p.center[1])
                > obj.radius + p.radius
                for p in placed
            ):
                placed.append(obj)
                distractors.append((obj, d_color))
                break

    for obj, d_color in distractors:
        for ch in range(3):
            image[ch][obj.mask] = COLORS[d_color][ch]
    for ch in range(3):
        image[ch][target.mask] = COLORS[color_name][ch]

    template = PROMPT_TEMPLATES[rng.integers(len(PROMPT_TEMPLATES))]
    prompt = template.format(color=color_name, shape=shape.lower())
    split = "seen"
    if config.seen_categories is not None and target_cat not in config.seen_categories:
        split = "unseen"
    return Sample(
        id=f"scene-{index:05d}",
        image=image,
        prompt=prompt,
        category=target_cat,
        grasps=target.grasps,
        split=split,
    )


def make_dataset(n_scenes: int, seed: int, config: SceneConfig, split_ratio: float = 0.7) -> list[Sample]:
    """Generate scenes with per-sample seeds ``seed ^ index`` and a
    category split drawn once from ``seed``."""
    if n_scenes < 1:
        raise ValueError("n_scenes must be >= 1")
    cats = category_names(config)
    seen, _unseen = split_categories(cats, ratio=split_ratio, seed=seed)
    cfg = SceneConfig(**{**vars(config), "seen_categories": seen})
    return [generate_scene(seed ^ i, cfg, index=i) for i in range(n_scenes)]


# -- (de)serialization --------------------------------------------------------


def save_dataset(samples: list[Sample], out_dir):
    """Write images/<id>.png plus index.jsonl; images are 8-bit RGB."""
    img_dir = os.path.join(out_dir, "images")
    os.makedirs(img_dir, exist_ok=True)
    index_path = os.path.join(out_dir, "index.jsonl")
    with open(index_path, "w", encoding="utf-8") as fh:
        for s in samples:
            rel = f"images/{s.id}.png"
            arr = np.clip(np.round(s.image * 255.0), 0, 255).astype(np.uint8)
            Image.fromarray(arr.transpose(1, 2, 0), mode="RGB").save(os.path.join(out_dir, rel))
            record = {
                "id": s.id,
                "image": rel,
                "prompt": s.prompt,
                "category": s.category,
                "split": s.split,
                "grasps": [g.to_dict() for g in s.grasps],
            }
            fh.write(json.dumps(record) + "\n")


def load_dataset(data_dir) -> list[Sample]:
    index_path = os.path.join(data_dir, "index.jsonl")
    if not os.path.exists(index_path):
        raise FileNotFoundError(f"no index.jsonl under {data_dir}")
    samples = []
    ids = set()
    with open(index_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"index.jsonl line {lineno}: malformed JSON ({e})") from None
            for key in ("id", "image", "prompt", "category", "split", "grasps"):
                if key not in record:
                    raise ValueError(f"index.jsonl line {lineno}: missing key {key!r}")
            if record["id"] in ids:
                raise ValueError(f"index.jsonl line {lineno}: duplicate id {record['id']!r}")
            ids.add(record["id"])
            img_path = os.path.join(data_dir, record["image"])
            if not os.path.exists(img_path):
                raise FileNotFoundError(f"index.jsonl line {lineno}: missing image {record['image']}")
            with Image.open(img_path) as im:
                arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
            samples.append(
                Sample(
                    id=record["id"],
                    image=arr.transpose(2, 0, 1),
                    prompt=record["prompt"],
                    category=record["category"],
                    grasps=[GraspRect.from_dict(g) for g in record["grasps"]],
                    split=record["split"],
                )
            )
    return samples
