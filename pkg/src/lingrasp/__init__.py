"""Language-conditioned grasp rectangle detection.

A self-contained numpy implementation: a small autodiff tensor core, a
state-space sequence backbone with scan/convolution duality, multi-scale
vision-language fusion, a rotated-rectangle grasp head, exact geometric
metrics, and a procedural scene generator for end-to-end training.
"""

from .config import TrainConfig
from .data import SceneConfig, Sample, load_dataset, make_dataset, save_dataset
from .estimator import GraspDetector
from .evaluation import EvalReport, evaluate
from .geometry import GraspRect, angle_offset_deg, harmonic_mean, is_success, rotated_iou
from .maps import GraspMaps, decode_grasps, encode_targets
from .model import GraspModel, build_model
from .tensor import Tensor
from .text import TextEncoder, load_external_embeddings

__version__ = "0.1.0"

__all__ = [
    "TrainConfig",
    "SceneConfig",
    "Sample",
    "load_dataset",
    "make_dataset",
    "save_dataset",
    "GraspDetector",
    "EvalReport",
    "evaluate",
    "GraspRect",
    "angle_offset_deg",
    "harmonic_mean",
    "is_success",
    "rotated_iou",
    "GraspMaps",
    "decode_grasps",
    "encode_targets",
    "GraspModel",
    "build_model",
    "Tensor",
    "TextEncoder",
    "load_external_embeddings",
    "__version__",
]
