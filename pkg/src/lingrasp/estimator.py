"""scikit-learn style front end.

``GraspDetector`` follows the estimator protocol: hyperparameters are
stored verbatim in ``__init__``, ``get_params`` / ``set_params`` make it
clonable and grid-searchable, ``fit`` trains on the seen split, and
``predict`` / ``score`` run detection. The protocol is duck-typed so the
package itself stays free of a scikit-learn dependency.
"""

from __future__ import annotations

import inspect

import numpy as np

from .config import TrainConfig
from .evaluation import EvalReport, evaluate
from .geometry import is_success
from .inference import predict_sample
from .training import train
from .validation import check_positive_int, check_samples

__all__ = ["GraspDetector"]


class GraspDetector:
    """Language-conditioned grasp rectangle detector.

    Parameters mirror :class:`TrainConfig`. Fitted state lives in
    trailing-underscore attributes (``model_``, ``config_``, ``history_``).
    """

    def __init__(
        self,
        epochs: int = 30,
        batch_size: int = 8,
        learning_rate: float = 1e-2,
        momentum: float = 0.9,
        seed: int = 0,
        stem_width: int = 16,
        fused_width: int = 16,
        text_dim: int = 64,
        state_dim: int = 8,
        depths: tuple = (1, 1, 2, 2),
        heads: int = 4,
        fusion: bool = True,
        max_gripper_width: float = 150.0,
        quality_threshold: float = 0.3,
        peak_min_distance: int = 5,
        topk: int = 1,
    ):
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.seed = seed
        self.stem_width = stem_width
        self.fused_width = fused_width
        self.text_dim = text_dim
        self.state_dim = state_dim
        self.depths = depths
        self.heads = heads
        self.fusion = fusion
        self.max_gripper_width = max_gripper_width
        self.quality_threshold = quality_threshold
        self.peak_min_distance = peak_min_distance
        self.topk = topk

    # -- estimator protocol -------------------------------------------------

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [p for p in sig.parameters if p != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "GraspDetector":
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"invalid parameter {key!r} for GraspDetector")
            setattr(self, key, value)
        return self

    def _config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            seed=self.seed,
            stem_width=self.stem_width,
            fused_width=self.fused_width,
            text_dim=self.text_dim,
            state_dim=self.state_dim,
            depths=self.depths,
            heads=self.heads,
            fusion=self.fusion,
            max_gripper_width=self.max_gripper_width,
            quality_threshold=self.quality_threshold,
            peak_min_distance=self.peak_min_distance,
            topk=self.topk,
        )

    # -- fitting and prediction ----------------------------------------------

    def fit(self, X, y=None) -> "GraspDetector":
        """Train on the seen split of a list of dataset samples."""
        samples = check_samples(X)
        config = self._config()
        self.model_, self.history_ = train(config, samples)
        self.config_ = config
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise RuntimeError("this GraspDetector is not fitted; call fit first")

    def predict(self, X) -> list:
        """Top-k grasp rectangles (best first) for each sample in X."""
        self._check_fitted()
        samples = check_samples(X)
        k = check_positive_int(self.topk, "topk")
        return [predict_sample(self.model_, self.config_, s, k=k) for s in samples]

    def score(self, X, y=None) -> float:
        """Mean top-1 success over the given samples."""
        self._check_fitted()
        samples = check_samples(X)
        hits = 0
        for s, rects in zip(samples, self.predict(samples)):
            hits += bool(rects) and is_success(rects[0], s.grasps)
        return hits / len(samples)

    def evaluate(self, X) -> EvalReport:
        """Seen / unseen / harmonic-mean report over the given samples."""
        self._check_fitted()
        samples = check_samples(X)
        return evaluate(lambda s: predict_sample(self.model_, self.config_, s, k=1), samples)
