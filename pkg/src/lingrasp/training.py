"""Loss, optimizer and the training loop."""

from __future__ import annotations

import logging
import math

import numpy as np

from . import tensor as tt
from .tensor import Tensor
from .config import TrainConfig
from .maps import encode_targets
from .model import GraspModel, build_model

__all__ = ["loss_fn", "SGD", "Adam", "make_optimizer", "cosine_lr", "train"]

log = logging.getLogger(__name__)


def loss_fn(pred: Tensor, target: Tensor) -> Tensor:
    """Mean smooth-L1 per map, summed over the 4 maps with equal weight."""
    if pred.shape != target.shape:
        raise ValueError(f"prediction {pred.shape} and target {target.shape} differ")
    per_elem = tt.smooth_l1(pred, target)
    total = None
    for m in range(pred.shape[1]):
        term = tt.tmean(tt.narrow(per_elem, 1, m, 1))
        total = term if total is None else total + term
    return total


def _to_f32_grid(arr: np.ndarray) -> np.ndarray:
    # parameters live on the float32 grid: math stays float64 but the
    # 32-bit checkpoint payload then reproduces the live model exactly
    return arr.astype(np.float32).astype(np.float64)


class SGD:
    """Gradient descent with momentum."""

    def __init__(self, params: list[Tensor], momentum: float = 0.9):
        self.params = params
        self.momentum = momentum
        self.buffers = [np.zeros_like(p.data) for p in params]

    def step(self, lr: float):
        if lr == 0.0:
            return
        for p, buf in zip(self.params, self.buffers):
            if p.grad is None:
                continue
            buf *= self.momentum
            buf += p.grad
            p.data = _to_f32_grid(p.data - lr * buf)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


class Adam:
    """Adam with bias correction.

    The grasp-quality target is nonzero on only a few percent of pixels;
    plain SGD stalls in the resulting saturated-sigmoid plateau, while
    per-parameter step normalization walks out of it. The short
    second-moment horizon (beta2 = 0.99) recovers step size quickly after
    the early background-fitting phase.
    """

    def __init__(self, params: list[Tensor], beta1: float = 0.9, beta2: float = 0.99, eps: float = 1e-8):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]
        self.t = 0

    def step(self, lr: float):
        if lr == 0.0:
            return
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data = _to_f32_grid(p.data - lr * (m / c1) / (np.sqrt(v / c2) + self.eps))

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


def make_optimizer(config: TrainConfig, params: list[Tensor]):
    if config.optimizer == "adam":
        return Adam(params)
    if config.optimizer == "sgd":
        return SGD(params, momentum=config.momentum)
    raise ValueError(f"unknown optimizer {config.optimizer!r}")


def cosine_lr(base_lr: float, epoch: int, total_epochs: int) -> float:
    if total_epochs <= 1:
        return base_lr
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * epoch / (total_epochs - 1)))


def _batched(indices: np.ndarray, batch_size: int):
    for i in range(0, len(indices), batch_size):
        yield indices[i : i + batch_size]


def train(config: TrainConfig, samples: list, model: GraspModel | None = None):
    """Fit a model on the seen split of ``samples``.

    Returns (model, history) where history is the mean loss per epoch.
    Fully determined by (config, samples): batches reshuffle from a seeded
    stream and all math is sequential float64.
    """
    train_samples = [s for s in samples if s.split == "seen"]
    if not train_samples:
        raise ValueError("no seen-split samples to train on")
    if model is None:
        model = build_model(config)

    h, w = train_samples[0].image.shape[1], train_samples[0].image.shape[2]
    images = np.stack([s.image for s in train_samples])
    targets = np.stack(
        [encode_targets(s.grasps, h, w, config.max_gripper_width).stack() for s in train_samples]
    )
    text_vecs = model.embed_prompts([s.prompt for s in train_samples])

    opt = make_optimizer(config, model.parameters())
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    history = []
    for epoch in range(config.epochs):
        lr = cosine_lr(config.learning_rate, epoch, config.epochs)
        order = shuffle_rng.permutation(len(train_samples))
        epoch_loss = 0.0
        n_batches = 0
        for batch in _batched(order, config.batch_size):
            pred = model.forward(Tensor(images[batch]), Tensor(text_vecs[batch]))
            loss = loss_fn(pred, Tensor(targets[batch]))
            value = loss.item()
            if not math.isfinite(value):
                raise RuntimeError(
                    f"non-finite loss {value} at epoch {epoch} batch {n_batches}; "
                    "try a lower learning rate"
                )
            opt.zero_grad()
            loss.backward()
            opt.step(lr)
            epoch_loss += value
            n_batches += 1
        history.append(epoch_loss / n_batches)
        log.info("epoch %d/%d lr %.3g loss %.6f", epoch + 1, config.epochs, lr, history[-1])
    return model, history
