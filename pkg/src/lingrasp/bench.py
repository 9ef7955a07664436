"""Wall-time scaling of the sequence operators.

Times the recurrent scan, the kernel-convolution route, and softmax
attention over growing sequence lengths. The scan's cost per step is
constant, so its total grows linearly in L; attention materializes an
L x L weight matrix and grows quadratically.
"""

from __future__ import annotations

import time

import numpy as np

from .ssm import _kernel_forward, _scan_forward

__all__ = ["benchmark_scan", "format_table", "MODES"]

MODES = ("scan", "conv", "attention")


def _run_scan(x, a_bar, b_bar, c):
    h0 = np.zeros((x.shape[1], a_bar.shape[1]))
    y, _ = _scan_forward(x, a_bar, b_bar, c, h0)
    return y


def _run_conv(x, a_bar, b_bar, c):
    k, _ = _kernel_forward(a_bar, b_bar, c, x.shape[0])
    length, d = x.shape
    out = np.empty_like(x)
    for di in range(d):
        out[:, di] = np.convolve(x[:, di], k[di])[:length]
    return out


def _run_attention(q, k, v):
    scores = q @ k.T / np.sqrt(q.shape[1])
    scores -= scores.max(axis=1, keepdims=True)
    e = np.exp(scores)
    return (e / e.sum(axis=1, keepdims=True)) @ v


def benchmark_scan(
    lengths: list[int],
    modes: list[str] = MODES,
    repeats: int = 5,
    warmup: int = 2,
    n_channels: int = 8,
    state_dim: int = 8,
    attn_dim: int = 64,
    seed: int = 0,
) -> list[dict]:
    """Median-of-``repeats`` wall times; returns rows of (mode, length, seconds)."""
    if list(lengths) != sorted(lengths) or len(lengths) < 1:
        raise ValueError("lengths must be non-empty and ascending")
    for m in modes:
        if m not in MODES:
            raise ValueError(f"unknown mode {m!r}; choose from {MODES}")
    rng = np.random.default_rng(seed)
    a_bar = rng.uniform(0.5, 0.99, (n_channels, state_dim))
    b_bar = rng.normal(size=(n_channels, state_dim))
    c = rng.normal(size=(n_channels, state_dim))

    rows = []
    for mode in modes:
        for length in lengths:
            if mode == "attention":
                q = rng.normal(size=(length, attn_dim))
                k = rng.normal(size=(length, attn_dim))
                v = rng.normal(size=(length, attn_dim))
                fn = lambda: _run_attention(q, k, v)
            else:
                x = rng.normal(size=(length, n_channels))
                runner = _run_scan if mode == "scan" else _run_conv
                fn = lambda: runner(x, a_bar, b_bar, c)
            for _ in range(warmup):
                fn()
            times = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                fn()
                times.append(time.perf_counter() - t0)
            rows.append({"mode": mode, "length": int(length), "seconds": float(np.median(times))})
    return rows


def format_table(rows: list[dict]) -> str:
    lines = [f"{'mode':<10} {'L':>8} {'seconds':>12}"]
    for r in rows:
        lines.append(f"{r['mode']:<10} {r['length']:>8} {r['seconds']:>12.6f}")
    return "\n".join(lines)
