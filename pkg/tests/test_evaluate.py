import math

import numpy as np
import pytest

from posestream.errors import ConfigError
from posestream.evaluate import evaluate
from posestream.geometry import Pose6DoF
from posestream.metrics import add_hand, add_tool, drill_direction_error, drill_tip_error
from posestream.records import PoseRecord, read_pose_records, write_pose_records

from conftest import random_pose


def make_records(rng, n, hand=True):
    rows = []
    for fid in range(n):
        pose = random_pose(rng, tz_range=(0.4, 1.2))
        rows.append(PoseRecord(fid, pose, rng.normal(size=(21, 3)) * 0.1 if hand else None))
    return rows


class TestRecords:
    def test_round_trip(self, rng, tmp_path):
        rows = make_records(rng, 7)
        path = tmp_path / "r.jsonl"
        write_pose_records(rows, path)
        loaded = read_pose_records(path)
        assert sorted(loaded) == list(range(7))
        for r in rows:
            got = loaded[r.frame_id]
            assert np.array_equal(got.pose.rotation, r.pose.rotation)
            assert np.array_equal(got.pose.translation, r.pose.translation)
            assert np.array_equal(got.hand, r.hand)

    def test_hand_optional(self, rng, tmp_path):
        rows = make_records(rng, 3, hand=False)
        path = tmp_path / "r.jsonl"
        write_pose_records(rows, path)
        assert all(r.hand is None for r in read_pose_records(path).values())

    def test_duplicate_ids_rejected(self, rng, tmp_path):
        rows = make_records(rng, 2)
        rows[1] = PoseRecord(0, rows[1].pose, rows[1].hand)
        path = tmp_path / "r.jsonl"
        write_pose_records(rows, path)
        with pytest.raises(ConfigError):
            read_pose_records(path)

    def test_malformed_row_rejected(self, tmp_path):
        path = tmp_path / "r.jsonl"
        path.write_text('{"frame_id": 0, "rotation": [1, 2]}\n')
        with pytest.raises(ConfigError):
            read_pose_records(path)


class TestEvaluate:
    def test_identical_files_give_zero(self, rng, tmp_path, tool_model):
        rows = make_records(rng, 10)
        gt = tmp_path / "gt.jsonl"
        write_pose_records(rows, gt)
        result = evaluate(gt, gt, tool_model)
        assert result.report.tool_add_mm == (0.0, 0.0)
        assert result.report.tip_error_mm == (0.0, 0.0)
        assert result.report.direction_error_deg == (0.0, 0.0)
        assert result.report.hand_add_mm == (0.0, 0.0)
        assert result.report.n_frames == 10

    def test_five_mm_offset(self, rng, tmp_path, tool_model):
        rows = make_records(rng, 6)
        shifted = [
            PoseRecord(
                r.frame_id,
                Pose6DoF(rotation=r.pose.rotation,
                         translation=r.pose.translation + np.array([0.005, 0.0, 0.0])),
                r.hand,
            )
            for r in rows
        ]
        gt = tmp_path / "gt.jsonl"
        pred = tmp_path / "pred.jsonl"
        write_pose_records(rows, gt)
        write_pose_records(shifted, pred)
        result = evaluate(pred, gt, tool_model)
        assert np.isclose(result.report.tool_add_mm[0], 5.0, atol=1e-9)
        assert np.isclose(result.report.tool_add_mm[1], 0.0, atol=1e-9)
        assert result.report.direction_error_deg == (0.0, 0.0)

    def test_matches_direct_metric_recomputation(self, rng, tmp_path, tool_model):
        gt_rows = make_records(rng, 20)
        pred_rows = [
            PoseRecord(r.frame_id, random_pose(rng, tz_range=(0.4, 1.2)),
                       r.hand + rng.normal(size=(21, 3)) * 0.01)
            for r in gt_rows
        ]
        gt = tmp_path / "gt.jsonl"
        pred = tmp_path / "pred.jsonl"
        write_pose_records(gt_rows, gt)
        write_pose_records(pred_rows, pred)
        result = evaluate(pred, gt, tool_model)
        points = tool_model.subsample(500, 0)
        for frame, g, p in zip(result.per_frame, gt_rows, pred_rows):
            assert frame.tool_add_m == add_tool(g.pose, p.pose, points)
            assert frame.tip_error_m == drill_tip_error(g.pose, p.pose, points)
            assert frame.direction_error_deg == drill_direction_error(g.pose, p.pose, points)
            assert frame.hand_add_m == add_hand(g.hand, p.hand)

    def test_missing_ids_excluded(self, rng, tmp_path, tool_model):
        rows = make_records(rng, 10)
        gt = tmp_path / "gt.jsonl"
        pred = tmp_path / "pred.jsonl"
        write_pose_records(rows, gt)
        write_pose_records(rows[:6], pred)
        result = evaluate(pred, gt, tool_model)
        assert result.report.n_frames == 6
        assert result.missing_in_pred == [6, 7, 8, 9]
        assert result.missing_in_gt == []

    def test_empty_intersection_is_error(self, rng, tmp_path, tool_model):
        rows = make_records(rng, 4)
        gt = tmp_path / "gt.jsonl"
        pred = tmp_path / "pred.jsonl"
        write_pose_records(rows[:2], gt)
        write_pose_records(
            [PoseRecord(r.frame_id + 100, r.pose, r.hand) for r in rows[2:]], pred
        )
        with pytest.raises(ConfigError):
            evaluate(pred, gt, tool_model)

    def test_pose_only_predictions_skip_hand_metric(self, rng, tmp_path, tool_model):
        gt_rows = make_records(rng, 5, hand=True)
        pred_rows = [PoseRecord(r.frame_id, r.pose, None) for r in gt_rows]
        gt = tmp_path / "gt.jsonl"
        pred = tmp_path / "pred.jsonl"
        write_pose_records(gt_rows, gt)
        write_pose_records(pred_rows, pred)
        result = evaluate(pred, gt, tool_model)
        assert result.report.tool_add_mm == (0.0, 0.0)
        assert math.isnan(result.report.hand_add_mm[0])

    def test_repeated_runs_identical(self, rng, tmp_path, tool_model):
        rows = make_records(rng, 8)
        gt = tmp_path / "gt.jsonl"
        write_pose_records(rows, gt)
        a = evaluate(gt, gt, tool_model)
        b = evaluate(gt, gt, tool_model)
        assert a.report == b.report
