"""Model checkpoints.

Layout: 4-byte magic "GMV1", a little-endian uint32 header length, a UTF-8
JSON header {version, seed, config, tensors: [{name, dtype, shape,
offset}]}, then the raw float32 little-endian tensor payloads back to
back in manifest order (offsets are relative to the payload start).
Parameters live on the float32 grid (see SGD), so save -> load -> forward
is bit-identical to the pre-save model.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .config import TrainConfig
from .model import GraspModel, build_model

__all__ = ["CheckpointError", "save_checkpoint", "load_checkpoint"]

MAGIC = b"GMV1"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(model: GraspModel, config: TrainConfig, path):
    tensors = list(model.named_tensors())
    manifest = []
    payloads = []
    offset = 0
    for name, t in tensors:
        raw = np.ascontiguousarray(t.data, dtype="<f4").tobytes()
        manifest.append({"name": name, "dtype": "f4", "shape": list(t.shape), "offset": offset})
        payloads.append(raw)
        offset += len(raw)
    header = json.dumps(
        {"version": VERSION, "seed": config.seed, "config": config.to_dict(), "tensors": manifest}
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for raw in payloads:
            fh.write(raw)


def load_checkpoint(path):
    """Rebuild (model, config) from a checkpoint file."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8 or blob[:4] != MAGIC:
        raise CheckpointError(f"not a checkpoint: bad magic in {path}")
    header_len = struct.unpack("<I", blob[4:8])[0]
    if len(blob) < 8 + header_len:
        raise CheckpointError(f"truncated checkpoint header in {path}")
    try:
        header = json.loads(blob[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"unreadable checkpoint header: {e}") from None
    if header.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.get('version')!r}")

    config = TrainConfig.from_dict(header["config"])
    model = build_model(config)
    payload = blob[8 + header_len :]

    manifest = {entry["name"]: entry for entry in header["tensors"]}
    for name, tensor in model.named_tensors():
        entry = manifest.pop(name, None)
        if entry is None:
            raise CheckpointError(f"checkpoint is missing tensor {name!r}")
        shape = tuple(entry["shape"])
        if shape != tensor.shape:
            raise CheckpointError(
                f"shape mismatch for tensor {name!r}: checkpoint has {shape}, model expects {tensor.shape}"
            )
        if entry["dtype"] != "f4":
            raise CheckpointError(f"tensor {name!r} has unsupported dtype {entry['dtype']!r}")
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + 4 * count
        if end > len(payload):
            raise CheckpointError(f"truncated payload for tensor {name!r}")
        values = np.frombuffer(payload[start:end], dtype="<f4").astype(np.float64).reshape(shape)
        tensor.data = values
    if manifest:
        raise CheckpointError(f"checkpoint has extra tensors: {sorted(manifest)}")
    return model, config
