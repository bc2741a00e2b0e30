import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from posestream.errors import ConfigError, DomainError
from posestream.geometry import ModelPoints, Pose6DoF, axis_angle_to_matrix
from posestream.metrics import (
    FrameMetrics,
    add_hand,
    add_tool,
    aggregate_metrics,
    drill_direction_error,
    drill_tip_error,
    read_frame_metrics,
    write_frame_metrics,
)

from conftest import random_pose, random_rotation_vec


def brute_force_add_tool(pose_gt, pose_pred, pts):
    R = axis_angle_to_matrix(pose_gt.rotation)
    Rp = axis_angle_to_matrix(pose_pred.rotation)
    total = 0.0
    for x in pts:
        total += float(np.linalg.norm((R @ x + pose_gt.translation) - (Rp @ x + pose_pred.translation)))
    return total / len(pts)


class TestAddTool:
    def test_identical_poses(self, rng, tool_model):
        pose = random_pose(rng)
        assert add_tool(pose, pose, tool_model) == 0.0

    def test_pure_translation_is_exact(self, rng, tool_model):
        # With bit-identical rotations the result must equal ||dt|| exactly,
        # not merely within tolerance.
        for _ in range(50):
            pose_gt = random_pose(rng)
            offset = rng.uniform(-0.05, 0.05, 3)
            pose_pred = Pose6DoF(
                rotation=pose_gt.rotation, translation=pose_gt.translation + offset
            )
            expected = float(np.linalg.norm(pose_gt.translation - pose_pred.translation))
            assert add_tool(pose_gt, pose_pred, tool_model) == expected

    def test_symmetric(self, rng, tool_model):
        a, b = random_pose(rng), random_pose(rng)
        assert np.isclose(add_tool(a, b, tool_model), add_tool(b, a, tool_model), atol=1e-12)

    def test_matches_brute_force(self, rng):
        for _ in range(40):
            pts = rng.uniform(-0.2, 0.2, size=(rng.integers(1, 30), 3))
            a, b = random_pose(rng), random_pose(rng)
            assert np.isclose(add_tool(a, b, pts), brute_force_add_tool(a, b, pts), atol=1e-9)

    def test_rejects_empty(self, rng):
        with pytest.raises(DomainError):
            add_tool(random_pose(rng), random_pose(rng), np.zeros((0, 3)))


class TestAddHand:
    def test_identical(self, rng):
        h = rng.normal(size=(21, 3))
        assert add_hand(h, h) == 0.0

    def test_uniform_offset(self, rng):
        h = rng.normal(size=(21, 3))
        d = np.array([0.003, -0.004, 0.012])
        assert np.isclose(add_hand(h, h + d), np.linalg.norm(d), atol=1e-12)

    def test_matches_brute_force(self, rng):
        for _ in range(40):
            h_gt = rng.uniform(-0.5, 0.5, size=(21, 3))
            h_pred = h_gt + rng.uniform(-0.1, 0.1, size=(21, 3))
            expected = sum(
                float(np.linalg.norm(h_gt[j] - h_pred[j])) for j in range(21)
            ) / 21.0
            assert np.isclose(add_hand(h_gt, h_pred), expected, atol=1e-9)


class TestDrillTipError:
    def test_identical(self, rng, tool_model):
        pose = random_pose(rng)
        assert drill_tip_error(pose, pose, tool_model) == 0.0

    def test_pure_translation(self, rng, tool_model):
        pose_gt = random_pose(rng)
        d = np.array([0.005, 0.0, 0.0])
        pose_pred = Pose6DoF(rotation=pose_gt.rotation, translation=pose_gt.translation + d)
        expected = float(np.linalg.norm(pose_gt.translation - pose_pred.translation))
        assert drill_tip_error(pose_gt, pose_pred, tool_model) == expected

    def test_equals_add_tool_on_tip_singleton(self, rng, tool_model):
        a, b = random_pose(rng), random_pose(rng)
        tip_set = tool_model.tip.reshape(1, 3)
        assert np.isclose(
            drill_tip_error(a, b, tool_model), add_tool(a, b, tip_set), atol=1e-12
        )

    def test_needs_model_metadata(self, rng):
        with pytest.raises(ConfigError):
            drill_tip_error(random_pose(rng), random_pose(rng), np.zeros((3, 3)))


class TestDrillDirectionError:
    def test_identical_rotations(self, rng, tool_model):
        pose = random_pose(rng)
        other = Pose6DoF(rotation=pose.rotation, translation=pose.translation + 0.1)
        assert drill_direction_error(pose, other, tool_model) == 0.0

    def test_constructed_ninety_degrees(self, rng, tool_model):
        # Rotate the predicted pose 90 degrees about an axis orthogonal to the
        # rotated bit axis, via an independent quaternion construction.
        for _ in range(20):
            pose_gt = random_pose(rng)
            R_gt = Rotation.from_rotvec(pose_gt.rotation)
            a = R_gt.apply(tool_model.axis)
            helper = np.array([1.0, 0.0, 0.0])
            if abs(a @ helper) > 0.9:
                helper = np.array([0.0, 1.0, 0.0])
            u = np.cross(a, helper)
            u /= np.linalg.norm(u)
            R_pred = Rotation.from_rotvec(u * (np.pi / 2)) * R_gt
            pose_pred = Pose6DoF(rotation=R_pred.as_rotvec(), translation=pose_gt.translation)
            err = drill_direction_error(pose_gt, pose_pred, tool_model)
            assert abs(err - 90.0) < 1e-6

    def test_translation_invariant(self, rng, tool_model):
        a, b = random_pose(rng), random_pose(rng)
        b_shifted = Pose6DoF(rotation=b.rotation, translation=b.translation + 5.0)
        assert drill_direction_error(a, b, tool_model) == drill_direction_error(
            a, b_shifted, tool_model
        )

    def test_range(self, rng, tool_model):
        for _ in range(50):
            err = drill_direction_error(random_pose(rng), random_pose(rng), tool_model)
            assert 0.0 <= err <= 180.0


class TestAggregateMetrics:
    def _frame(self, fid, value):
        return FrameMetrics(
            frame_id=fid, tool_add_m=value, tip_error_m=2 * value,
            direction_error_deg=10 * value, hand_add_m=0.5 * value,
        )

    def test_single_frame(self):
        report = aggregate_metrics([self._frame(0, 0.004)])
        assert report.tool_add_mm == (4.0, 0.0)
        assert report.n_frames == 1

    def test_two_point_case(self):
        report = aggregate_metrics([self._frame(0, 0.001), self._frame(1, 0.003)])
        assert np.isclose(report.tool_add_mm[0], 2.0)
        assert np.isclose(report.tool_add_mm[1], 1.0)

    def test_matches_two_pass_oracle(self, rng):
        values = rng.uniform(0.0, 0.1, 1000)
        frames = [self._frame(i, v) for i, v in enumerate(values)]
        report = aggregate_metrics(frames)
        mean = sum(values) / len(values)
        std = (sum((v - mean) ** 2 for v in values) / len(values)) ** 0.5
        assert np.isclose(report.tool_add_mm[0], mean * 1000.0, atol=1e-9)
        assert np.isclose(report.tool_add_mm[1], std * 1000.0, atol=1e-9)

    def test_rejects_empty(self):
        with pytest.raises(DomainError):
            aggregate_metrics([])

    def test_report_formatting(self):
        report = aggregate_metrics([self._frame(0, 0.005)])
        text = report.format_text()
        assert "Tool ADD (mm)" in text
        assert "population" in text
        csv = report.to_csv()
        assert csv.startswith("metric,mean,std")

    def test_frame_metrics_file_round_trip(self, tmp_path, rng):
        frames = [self._frame(i, float(v)) for i, v in enumerate(rng.uniform(0, 1, 20))]
        path = tmp_path / "per_frame.jsonl"
        write_frame_metrics(frames, path)
        loaded = read_frame_metrics(path)
        assert len(loaded) == 20
        for a, b in zip(frames, loaded):
            assert a.frame_id == b.frame_id
            assert a.tool_add_m == b.tool_add_m
            assert a.hand_add_m == b.hand_add_m
