import json
import math

import pytest

from lingrasp.data import Sample
from lingrasp.evaluation import EvalReport, evaluate
from lingrasp.geometry import GraspRect

import numpy as np


def mini_samples():
    g = lambda x: [GraspRect(x, 20, 10, 5, 0.3)]
    img = np.zeros((3, 32, 32))
    return [
        Sample(id="a", image=img, prompt="p", category="c1", grasps=g(10), split="seen"),
        Sample(id="b", image=img, prompt="p", category="c1", grasps=g(12), split="seen"),
        Sample(id="c", image=img, prompt="p", category="c2", grasps=g(14), split="unseen"),
        Sample(id="d", image=img, prompt="p", category="c2", grasps=g(16), split="unseen"),
    ]


class TestEvaluate:
    def test_perfect_oracle(self):
        report = evaluate(lambda s: [s.grasps[0]], mini_samples())
        assert report.seen_rate == 1.0 and report.unseen_rate == 1.0 and report.h == 1.0
        assert report.n_seen == 2 and report.n_unseen == 2

    def test_all_failures(self):
        miss = GraspRect(100, 100, 4, 2, 0.0)
        report = evaluate(lambda s: [miss], mini_samples())
        assert report.seen_rate == 0.0 and report.unseen_rate == 0.0 and report.h == 0.0

    def test_enumerated_mixed_fixture(self):
        samples = mini_samples()
        hits = {"a", "b", "c"}  # 2/2 seen, 1/2 unseen
        miss = GraspRect(100, 100, 4, 2, 0.0)
        report = evaluate(lambda s: [s.grasps[0]] if s.id in hits else [miss], samples)
        assert report.seen_rate == 1.0
        assert report.unseen_rate == 0.5
        assert abs(report.h - 2.0 / 3.0) <= 1e-12

    def test_empty_prediction_counts_as_failure(self):
        report = evaluate(lambda s: [], mini_samples())
        assert report.seen_rate == 0.0

    def test_only_top1_scored(self):
        second = [GraspRect(100, 100, 4, 2, 0.0)]
        report = evaluate(lambda s: second + [s.grasps[0]], mini_samples())
        assert report.seen_rate == 0.0  # the correct grasp is ranked second

    def test_empty_samples_rejected(self):
        with pytest.raises(ValueError):
            evaluate(lambda s: [], [])

    def test_unknown_split_rejected(self):
        bad = mini_samples()
        bad[0].split = "validation"
        with pytest.raises(ValueError, match="split"):
            evaluate(lambda s: [], bad)

    def test_one_sided_split(self):
        seen_only = [s for s in mini_samples() if s.split == "seen"]
        report = evaluate(lambda s: [s.grasps[0]], seen_only)
        assert report.seen_rate == 1.0
        assert report.unseen_rate == 0.0 and report.n_unseen == 0
        assert report.h == 0.0


def test_report_json_schema(tmp_path):
    report = EvalReport(seen_rate=0.5, unseen_rate=0.25, h=1.0 / 3.0, n_seen=8, n_unseen=4)
    path = tmp_path / "report.json"
    report.to_json(path)
    data = json.loads(path.read_text())
    assert set(data) == {"seen", "unseen", "h", "n_seen", "n_unseen"}
    assert data["seen"] == 0.5 and data["n_unseen"] == 4
    assert abs(data["h"] - 1.0 / 3.0) <= 1e-12
