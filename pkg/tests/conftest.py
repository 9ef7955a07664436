import numpy as np
import pytest

from lingrasp.config import TrainConfig
from lingrasp.data import SceneConfig, make_dataset


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


def fd_gradcheck(fn, tensors, eps=1e-5, tol=1e-4, max_coords=24, seed=0):
    """Central finite differences against analytic gradients, per coordinate.

    ``fn()`` rebuilds the scalar loss from the given leaf tensors. At most
    ``max_coords`` coordinates per tensor are probed (all, when small).
    """
    loss = fn()
    for t in tensors:
        t.zero_grad()
    loss.backward()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t in tensors:
        flat = t.data.ravel()
        gflat = t.grad.ravel()
        n = flat.size
        idxs = range(n) if n <= max_coords else rng.choice(n, size=max_coords, replace=False)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + eps
            lp = fn().item()
            flat[i] = orig - eps
            lm = fn().item()
            flat[i] = orig
            fd = (lp - lm) / (2.0 * eps)
            an = gflat[i]
            if abs(an - fd) <= 1e-7:
                continue
            err = rel_err(an, fd)
            worst = max(worst, err)
            assert err <= tol, f"grad mismatch at coord {i}: analytic {an}, fd {fd} (rel {err:.2e})"
    return worst


def fd_directional(fn, tensors, eps=1e-5, tol=1e-4, n_dirs=2, seed=0):
    """Directional derivative checks: cheap for large parameter tensors."""
    loss = fn()
    for t in tensors:
        t.zero_grad()
    loss.backward()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t in tensors:
        for _ in range(n_dirs):
            direction = rng.normal(size=t.data.shape)
            direction /= np.linalg.norm(direction.ravel()) + 1e-12
            analytic = float((t.grad * direction).sum())
            saved = t.data.copy()
            t.data = saved + eps * direction
            lp = fn().item()
            t.data = saved - eps * direction
            lm = fn().item()
            t.data = saved
            fd = (lp - lm) / (2.0 * eps)
            if abs(analytic - fd) <= 1e-7:
                continue
            err = rel_err(analytic, fd)
            worst = max(worst, err)
            assert err <= tol, f"directional grad mismatch: analytic {analytic}, fd {fd} (rel {err:.2e})"
    return worst


@pytest.fixture(scope="session")
def tiny_config():
    return TrainConfig(
        stem_width=4,
        fused_width=4,
        text_dim=16,
        state_dim=4,
        heads=2,
        batch_size=4,
        epochs=2,
        seed=0,
    )


@pytest.fixture(scope="session")
def small_scene_config():
    return SceneConfig(image_size=64, min_distractors=0, max_distractors=2)


@pytest.fixture(scope="session")
def small_dataset(small_scene_config):
    return make_dataset(12, 5, small_scene_config)
