"""Run configuration: every free hyperparameter in one serializable place."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

__all__ = ["TrainConfig"]


@dataclass
class TrainConfig:
    # optimization
    epochs: int = 30
    batch_size: int = 8
    learning_rate: float = 1e-2
    momentum: float = 0.9          # used by the sgd optimizer
    optimizer: str = "adam"        # "adam" or "sgd"
    seed: int = 0
    # architecture
    stem_width: int = 16          # C; stage widths are C, 2C, 4C, 8C
    fused_width: int = 16         # common width of fused per-level features
    text_dim: int = 64
    state_dim: int = 8            # N states per SSM channel
    depths: tuple = (1, 1, 2, 2)
    heads: int = 4
    mlp_ratio: int = 2
    conv_width: int = 3           # causal conv taps inside mixer branches
    vocab_buckets: int = 4096
    fusion: bool = True           # off: prompts are ignored (zero text vector)
    # grasp head / decoding
    max_gripper_width: float = 150.0
    quality_threshold: float = 0.3
    peak_blur_sigma: float = 2.0
    peak_min_distance: int = 5
    topk: int = 1

    def __post_init__(self):
        self.depths = tuple(self.depths)
        if len(self.depths) != 4 or any(d < 1 for d in self.depths):
            raise ValueError(f"depths must be 4 positive ints, got {self.depths}")
        positive = [
            ("epochs", self.epochs), ("batch_size", self.batch_size),
            ("learning_rate", self.learning_rate), ("stem_width", self.stem_width),
            ("fused_width", self.fused_width), ("text_dim", self.text_dim),
            ("state_dim", self.state_dim), ("heads", self.heads),
            ("mlp_ratio", self.mlp_ratio), ("conv_width", self.conv_width),
            ("vocab_buckets", self.vocab_buckets),
            ("max_gripper_width", self.max_gripper_width),
            ("quality_threshold", self.quality_threshold),
            ("peak_min_distance", self.peak_min_distance), ("topk", self.topk),
        ]
        for name, value in positive:
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.momentum < 0 or self.momentum >= 1:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        for mult in (4, 8):
            if (mult * self.stem_width) % self.heads != 0:
                raise ValueError(
                    f"token width {mult * self.stem_width} not divisible by heads={self.heads}"
                )
        if (4 * self.stem_width) % 4 != 0:
            raise ValueError("stage-3 width must split into even halves")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["depths"] = list(self.depths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "TrainConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def replace(self, **updates) -> "TrainConfig":
        d = self.to_dict()
        d.update(updates)
        return TrainConfig.from_dict(d)
