"""Seen / unseen evaluation protocol."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .geometry import harmonic_mean, is_success

__all__ = ["EvalReport", "evaluate"]


@dataclass
class EvalReport:
    seen_rate: float
    unseen_rate: float
    h: float
    n_seen: int
    n_unseen: int

    def to_dict(self) -> dict:
        return {
            "seen": self.seen_rate,
            "unseen": self.unseen_rate,
            "h": self.h,
            "n_seen": self.n_seen,
            "n_unseen": self.n_unseen,
        }

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def evaluate(predictor, samples: list) -> EvalReport:
    """Top-1 success rates by split.

    ``predictor(sample)`` returns grasp rectangles best first; only the
    first is scored. A sample with no prediction counts as a failure. A
    split with no samples reports rate 0 over count 0.
    """
    if not samples:
        raise ValueError("evaluate requires at least one sample")
    counts = {"seen": 0, "unseen": 0}
    hits = {"seen": 0, "unseen": 0}
    for sample in samples:
        if sample.split not in counts:
            raise ValueError(f"sample {sample.id} has unknown split {sample.split!r}")
        counts[sample.split] += 1
        rects = predictor(sample)
        if rects and is_success(rects[0], sample.grasps):
            hits[sample.split] += 1
    seen_rate = hits["seen"] / counts["seen"] if counts["seen"] else 0.0
    unseen_rate = hits["unseen"] / counts["unseen"] if counts["unseen"] else 0.0
    return EvalReport(
        seen_rate=seen_rate,
        unseen_rate=unseen_rate,
        h=harmonic_mean(seen_rate, unseen_rate),
        n_seen=counts["seen"],
        n_unseen=counts["unseen"],
    )
