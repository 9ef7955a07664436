import json

import numpy as np
import pytest
from PIL import Image

from lingrasp.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """gen-data + train once; downstream commands reuse the artifacts."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    ckpt = root / "ckpt.gmv"
    config = root / "config.json"
    config.write_text(json.dumps({
        "stem_width": 4, "fused_width": 4, "text_dim": 16, "state_dim": 2,
        "heads": 2, "batch_size": 4, "epochs": 2, "max_gripper_width": 40.0,
    }))
    rc = main(["gen-data", "--out", str(data), "--scenes", "8", "--seed", "3",
               "--image-size", "64", "--split-ratio", "0.7"])
    assert rc == 0
    rc = main(["train", "--data", str(data), "--out", str(ckpt),
               "--epochs", "2", "--seed", "1", "--config", str(config)])
    assert rc == 0
    return root, data, ckpt


class TestGenData(object):
    def test_layout(self, workspace):
        _, data, _ = workspace
        assert (data / "index.jsonl").exists()
        lines = (data / "index.jsonl").read_text().splitlines()
        assert len(lines) == 8
        record = json.loads(lines[0])
        assert set(record) == {"id", "image", "prompt", "category", "split", "grasps"}
        assert (data / record["image"]).exists()
        assert set(record["grasps"][0]) == {"x", "y", "w", "h", "theta"}


class TestTrain(object):
    def test_checkpoint_written(self, workspace):
        _, _, ckpt = workspace
        assert ckpt.read_bytes()[:4] == b"GMV1"

    def test_no_fusion_flag(self, workspace, tmp_path):
        root, data, _ = workspace
        out = tmp_path / "nf.gmv"
        rc = main(["train", "--data", str(data), "--out", str(out),
                   "--epochs", "1", "--seed", "1", "--config", str(root / "config.json"),
                   "--no-fusion"])
        assert rc == 0
        from lingrasp.checkpoint import load_checkpoint

        _, cfg = load_checkpoint(out)
        assert cfg.fusion is False


class TestEval(object):
    def test_report_schema(self, workspace, tmp_path):
        _, data, ckpt = workspace
        report = tmp_path / "report.json"
        rc = main(["eval", "--data", str(data), "--ckpt", str(ckpt), "--report", str(report)])
        assert rc == 0
        payload = json.loads(report.read_text())
        assert set(payload) == {"seen", "unseen", "h", "n_seen", "n_unseen"}
        assert payload["n_seen"] + payload["n_unseen"] == 8


class TestInfer(object):
    def test_outputs(self, workspace, tmp_path):
        _, data, ckpt = workspace
        record = json.loads((data / "index.jsonl").read_text().splitlines()[0])
        image = data / record["image"]
        heatmap = tmp_path / "heat.png"
        grasps = tmp_path / "grasps.json"
        rc = main(["infer", "--ckpt", str(ckpt), "--image", str(image),
                   "--prompt", record["prompt"], "--topk", "3",
                   "--heatmap", str(heatmap), "--grasps", str(grasps)])
        assert rc == 0
        with Image.open(heatmap) as im:
            assert im.size == (64, 64)  # heatmap dims equal input dims
        payload = json.loads(grasps.read_text())
        assert isinstance(payload, list)
        for item in payload:
            assert set(item) == {"x", "y", "w", "h", "theta", "quality"}

    def test_deterministic(self, workspace, tmp_path):
        _, data, ckpt = workspace
        record = json.loads((data / "index.jsonl").read_text().splitlines()[0])
        image = data / record["image"]
        outs = []
        for i in range(2):
            g = tmp_path / f"g{i}.json"
            main(["infer", "--ckpt", str(ckpt), "--image", str(image),
                  "--prompt", record["prompt"], "--topk", "2", "--grasps", str(g)])
            outs.append(g.read_text())
        assert outs[0] == outs[1]

    def test_indivisible_image_rejected(self, workspace, tmp_path):
        _, _, ckpt = workspace
        bad = tmp_path / "bad.png"
        Image.fromarray(np.zeros((50, 64, 3), dtype=np.uint8)).save(bad)
        with pytest.raises(ValueError, match="32"):
            main(["infer", "--ckpt", str(ckpt), "--image", str(bad), "--prompt", "grasp the bar"])


class TestBench(object):
    def test_table_and_json(self, tmp_path, capsys):
        report = tmp_path / "bench.json"
        rc = main(["bench", "--lengths", "32,64", "--modes", "scan,conv", "--report", str(report)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "scan" in out and "64" in out
        rows = json.loads(report.read_text())
        assert len(rows) == 4
        assert {r["mode"] for r in rows} == {"scan", "conv"}
        for row in rows:
            assert row["seconds"] >= 0.0


def test_cli_requires_subcommand():
    with pytest.raises(SystemExit):
        main([])
