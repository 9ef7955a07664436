"""Prompt embedding.

The built-in encoder hashes normalized tokens into a frozen random table
and mean-pools the rows, so equal prompts embed identically on every
platform. Real embeddings can be supplied through a lookup file instead
(see EMBED_MAGIC for the format), in which case prompts must match the
file exactly.
"""

from __future__ import annotations

import base64
import hashlib
import re
from dataclasses import dataclass

import numpy as np

from .tensor import Tensor

__all__ = ["TextEmbedding", "TextEncoder", "load_external_embeddings", "write_external_embeddings", "EMBED_MAGIC"]

EMBED_MAGIC = "GMEMB"
_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass
class TextEmbedding:
    vector: np.ndarray
    source: str  # "toy" or "external"


def _bucket(token: str, n_buckets: int) -> int:
    # blake2b is stable across platforms and Python runs (unlike hash())
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % n_buckets


def tokenize(prompt: str) -> list[str]:
    return _TOKEN_RE.findall(prompt.lower())


class TextEncoder:
    """Hashed bag-of-tokens encoder with a frozen, seeded embedding table."""

    def __init__(self, embed_dim: int = 64, n_buckets: int = 4096, seed: int = 0):
        if embed_dim < 1 or n_buckets < 1:
            raise ValueError("embed_dim and n_buckets must be positive")
        self.embed_dim = embed_dim
        self.n_buckets = n_buckets
        rng = np.random.default_rng(seed)
        table = rng.normal(0.0, 1.0 / np.sqrt(embed_dim), (n_buckets, embed_dim))
        table = table.astype(np.float32).astype(np.float64)
        self.table = Tensor(table, requires_grad=False)  # frozen
        self.external: dict[str, np.ndarray] | None = None

    def encode(self, prompt: str) -> TextEmbedding:
        if self.external is not None:
            if prompt not in self.external:
                raise KeyError(f"prompt not present in external embeddings: {prompt!r}")
            return TextEmbedding(vector=self.external[prompt].copy(), source="external")
        tokens = tokenize(prompt)
        if not tokens:
            raise ValueError(f"prompt has no alphanumeric tokens: {prompt!r}")
        rows = np.stack([self.table.data[_bucket(t, self.n_buckets)] for t in tokens])
        return TextEmbedding(vector=rows.mean(axis=0), source="toy")

    def encode_batch(self, prompts: list[str]) -> np.ndarray:
        return np.stack([self.encode(p).vector for p in prompts])


def load_external_embeddings(path, embed_dim: int) -> dict[str, np.ndarray]:
    """Parse a prompt -> vector lookup file.

    Line 1: "GMEMB 1 <dim>". Each following line: prompt, a tab, then
    base64 of the vector as little-endian float32.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        parts = header.split(" ")
        if len(parts) != 3 or parts[0] != EMBED_MAGIC or parts[1] != "1":
            raise ValueError(f"bad embedding file header: {header!r}")
        file_dim = int(parts[2])
        if file_dim != embed_dim:
            raise ValueError(f"embedding dim mismatch: file has {file_dim}, model expects {embed_dim}")
        table = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise ValueError(f"line {lineno}: expected 'prompt<TAB>base64'")
            prompt, blob = line.split("\t", 1)
            raw = base64.b64decode(blob)
            vec = np.frombuffer(raw, dtype="<f4")
            if vec.size != embed_dim:
                raise ValueError(f"line {lineno}: vector has {vec.size} values, expected {embed_dim}")
            table[prompt] = vec.astype(np.float64)
    return table


def write_external_embeddings(path, table: dict[str, np.ndarray], embed_dim: int):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{EMBED_MAGIC} 1 {embed_dim}\n")
        for prompt, vec in table.items():
            blob = base64.b64encode(np.asarray(vec, dtype="<f4").tobytes()).decode("ascii")
            fh.write(f"{prompt}\t{blob}\n")
