import json
import struct

import numpy as np
import pytest

from lingrasp.checkpoint import MAGIC, CheckpointError, load_checkpoint, save_checkpoint
from lingrasp.config import TrainConfig
from lingrasp.model import build_model
from lingrasp.training import train


@pytest.fixture(scope="module")
def trained(small_dataset):
    cfg = TrainConfig(stem_width=4, fused_width=4, text_dim=16, state_dim=2, heads=2,
                      batch_size=4, epochs=2, seed=1, max_gripper_width=40.0)
    model, _ = train(cfg, small_dataset)
    return model, cfg


class TestRoundTrip:
    def test_forward_bit_identical(self, trained, tmp_path, small_dataset):
        model, cfg = trained
        path = tmp_path / "ckpt.gmv"
        save_checkpoint(model, cfg, path)
        loaded, cfg2 = load_checkpoint(path)
        assert cfg2.to_dict() == cfg.to_dict()
        img = small_dataset[0].image[None]
        prompt = [small_dataset[0].prompt]
        assert np.array_equal(model.predict_maps(img, prompt), loaded.predict_maps(img, prompt))

    def test_second_round_trip_stable(self, trained, tmp_path):
        model, cfg = trained
        p1, p2 = tmp_path / "a.gmv", tmp_path / "b.gmv"
        save_checkpoint(model, cfg, p1)
        m1, _ = load_checkpoint(p1)
        save_checkpoint(m1, cfg, p2)
        assert p1.read_bytes()[8:] == p2.read_bytes()[8:]  # identical payloads

    def test_magic_bytes(self, trained, tmp_path):
        model, cfg = trained
        path = tmp_path / "ckpt.gmv"
        save_checkpoint(model, cfg, path)
        assert path.read_bytes()[:4] == b"GMV1" == MAGIC


class TestValidation:
    def _save(self, trained, tmp_path):
        model, cfg = trained
        path = tmp_path / "ckpt.gmv"
        save_checkpoint(model, cfg, path)
        return path

    def test_bad_magic(self, trained, tmp_path):
        path = self._save(trained, tmp_path)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"NOPE"
        path.write_bytes(bytes(blob))
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path)

    def test_truncated_payload(self, trained, tmp_path):
        path = self._save(trained, tmp_path)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) - 64])
        with pytest.raises(CheckpointError, match="truncated"):
            load_checkpoint(path)

    def test_unknown_version(self, trained, tmp_path):
        path = self._save(trained, tmp_path)
        blob = path.read_bytes()
        header_len = struct.unpack("<I", blob[4:8])[0]
        header = json.loads(blob[8 : 8 + header_len])
        header["version"] = 99
        new_header = json.dumps(header).encode()
        path.write_bytes(blob[:4] + struct.pack("<I", len(new_header)) + new_header + blob[8 + header_len :])
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path)

    def test_config_width_mismatch_names_tensor(self, trained, tmp_path):
        # manifest shapes written under a different stem width must be
        # rejected with the offending tensor's name
        path = self._save(trained, tmp_path)
        blob = path.read_bytes()
        header_len = struct.unpack("<I", blob[4:8])[0]
        header = json.loads(blob[8 : 8 + header_len])
        header["config"]["stem_width"] = 8
        new_header = json.dumps(header).encode()
        path.write_bytes(blob[:4] + struct.pack("<I", len(new_header)) + new_header + blob[8 + header_len :])
        with pytest.raises(CheckpointError, match="shape mismatch for tensor"):
            load_checkpoint(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_checkpoint(tmp_path / "missing.gmv")

    def test_garbage_header(self, trained, tmp_path):
        path = self._save(trained, tmp_path)
        blob = path.read_bytes()
        path.write_bytes(blob[:8] + b"\xff" * 32 + blob[40:])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)


def test_manifest_is_little_endian_f32(trained, tmp_path):
    model, cfg = trained
    path = tmp_path / "ckpt.gmv"
    save_checkpoint(model, cfg, path)
    blob = path.read_bytes()
    header_len = struct.unpack("<I", blob[4:8])[0]
    header = json.loads(blob[8 : 8 + header_len])
    assert all(t["dtype"] == "f4" for t in header["tensors"])
    first = header["tensors"][0]
    count = int(np.prod(first["shape"])) if first["shape"] else 1
    payload = blob[8 + header_len :]
    vals = np.frombuffer(payload[first["offset"] : first["offset"] + 4 * count], dtype="<f4")
    name_to_tensor = dict(model.named_tensors())
    assert np.array_equal(vals.astype(np.float64).reshape(first["shape"]), name_to_tensor[first["name"]].data)
