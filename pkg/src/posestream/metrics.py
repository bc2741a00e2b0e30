"""Pose and hand evaluation metrics, plus frame-set aggregation.

Internal unit is meters; MetricReport carries millimeters/degrees since
that is how results are tabulated.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError
from .geometry import ModelPoints, Pose6DoF, axis_angle_to_matrix
from .losses import as_hand_skeleton

__all__ = [
    "add_tool",
    "add_hand",
    "drill_tip_error",
    "drill_direction_error",
    "FrameMetrics",
    "MetricReport",
    "aggregate_metrics",
    "write_frame_metrics",
    "read_frame_metrics",
]


def _anchored_mean(values: np.ndarray) -> float:
    # Anchoring at the first element keeps the all-equal case (identical
    # rotations, pure translation offset) exact instead of within an ulp.
    return float(values[0] + np.mean(values - values[0]))


def _row_norms(diffs: np.ndarray) -> np.ndarray:
    # Per-row 1-D norms rather than norm(..., axis=1): the axis form reduces
    # through a different kernel and can drift an ulp from np.linalg.norm of
    # the identical 3-vector, breaking the translation-only exactness.
    return np.array([np.linalg.norm(d) for d in diffs])


def add_tool(pose_gt: Pose6DoF, pose_pred: Pose6DoF, points) -> float:
    """Mean 3D distance between model points under the two poses, in meters.

    (1/m) * sum_x ||(R x + t) - (R~ x + t~)||
    """
    if isinstance(points, ModelPoints):
        points = points.points
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] == 0:
        raise DomainError("model point set must be non-empty")
    dR = axis_angle_to_matrix(pose_gt.rotation) - axis_angle_to_matrix(pose_pred.rotation)
    dt = pose_gt.translation - pose_pred.translation
    diffs = pts @ dR.T + dt
    return _anchored_mean(_row_norms(diffs))


def add_hand(h_gt, h_pred) -> float:
    """Mean end-point error across the 21 joints, in meters."""
    hg = as_hand_skeleton(h_gt)
    hp = as_hand_skeleton(h_pred)
    return _anchored_mean(_row_norms(hg - hp))


def drill_tip_error(pose_gt: Pose6DoF, pose_pred: Pose6DoF, model: ModelPoints) -> float:
    """Distance between the transformed tool tip under the two poses, in meters."""
    if not isinstance(model, ModelPoints):
        raise ConfigError("tip error needs model metadata (tip point)")
    dR = axis_angle_to_matrix(pose_gt.rotation) - axis_angle_to_matrix(pose_pred.rotation)
    dt = pose_gt.translation - pose_pred.translation
    return float(np.linalg.norm(dR @ model.tip + dt))


def drill_direction_error(pose_gt: Pose6DoF, pose_pred: Pose6DoF, model: ModelPoints) -> float:
    """Angle in degrees between the rotated bit axes; translation plays no part.

    atan2(|a x b|, a.b) evaluates the same arccos-of-dot angle but stays
    well-conditioned near 0 and 180 degrees, and is exactly zero for
    bit-identical axes.
    """
    if not isinstance(model, ModelPoints):
        raise ConfigError("direction error needs model metadata (bit axis)")
    a_gt = axis_angle_to_matrix(pose_gt.rotation) @ model.axis
    a_pred = axis_angle_to_matrix(pose_pred.rotation) @ model.axis
    cross = float(np.linalg.norm(np.cross(a_gt, a_pred)))
    dot = float(a_gt @ a_pred)
    return math.degrees(math.atan2(cross, dot))


@dataclass(frozen=True)
class FrameMetrics:
    """Per-frame metric values in SI base units (meters) plus degrees."""

    frame_id: int
    tool_add_m: float
    tip_error_m: float
    direction_error_deg: float
    hand_add_m: float


@dataclass(frozen=True)
class MetricReport:
    """Frame-set aggregate: (mean, population std) per metric, mm and degrees."""

    tool_add_mm: tuple[float, float]
    tip_error_mm: tuple[float, float]
    direction_error_deg: tuple[float, float]
    hand_add_mm: tuple[float, float]
    n_frames: int

    def format_text(self) -> str:
        rows = [
            ("Tool ADD (mm)", self.tool_add_mm),
            ("Drill Tip Error (mm)", self.tip_error_mm),
            ("Drill Bit Direction Error (deg)", self.direction_error_deg),
            ("Hand ADD (mm)", self.hand_add_mm),
        ]
        width = max(len(r[0]) for r in rows)
        lines = [f"{'Metric':<{width}}  Mean +/- Std"]
        for name, (mean, std) in rows:
            lines.append(f"{name:<{width}}  {mean:.2f} +/- {std:.2f}")
        lines.append(f"n = {self.n_frames} frames; std is population (/n)")
        return "\n".join(lines)

    def to_csv(self) -> str:
        lines = ["metric,mean,std"]
        lines.append(f"tool_add_mm,{self.tool_add_mm[0]:.17g},{self.tool_add_mm[1]:.17g}")
        lines.append(f"tip_error_mm,{self.tip_error_mm[0]:.17g},{self.tip_error_mm[1]:.17g}")
        lines.append(
            f"direction_error_deg,{self.direction_error_deg[0]:.17g},{self.direction_error_deg[1]:.17g}"
        )
        lines.append(f"hand_add_mm,{self.hand_add_mm[0]:.17g},{self.hand_add_mm[1]:.17g}")
        lines.append(f"n_frames,{self.n_frames},")
        return "\n".join(lines) + "\n"


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def aggregate_metrics(per_frame: list[FrameMetrics]) -> MetricReport:
    """Mean and population standard deviation per metric over a frame set."""
    if not per_frame:
        raise DomainError("cannot aggregate an empty frame set")
    tool_m, tool_s = _mean_std([f.tool_add_m for f in per_frame])
    tip_m, tip_s = _mean_std([f.tip_error_m for f in per_frame])
    dir_m, dir_s = _mean_std([f.direction_error_deg for f in per_frame])
    hand_m, hand_s = _mean_std([f.hand_add_m for f in per_frame])
    return MetricReport(
        tool_add_mm=(tool_m * 1000.0, tool_s * 1000.0),
        tip_error_mm=(tip_m * 1000.0, tip_s * 1000.0),
        direction_error_deg=(dir_m, dir_s),
        hand_add_mm=(hand_m * 1000.0, hand_s * 1000.0),
        n_frames=len(per_frame),
    )


def write_frame_metrics(records: list[FrameMetrics], path) -> None:
    """Dump per-frame metrics as JSON lines, one record per frame, SI units."""
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps({
                "frame_id": r.frame_id,
                "tool_add_m": r.tool_add_m,
                "tip_error_m": r.tip_error_m,
                "direction_error_deg": r.direction_error_deg,
                "hand_add_m": r.hand_add_m,
            }) + "\n")


def read_frame_metrics(path) -> list[FrameMetrics]:
    records = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        raw = json.loads(line)
        records.append(FrameMetrics(
            frame_id=int(raw["frame_id"]),
            tool_add_m=float(raw["tool_add_m"]),
            tip_error_m=float(raw["tip_error_m"]),
            direction_error_deg=float(raw["direction_error_deg"]),
            hand_add_m=float(raw["hand_add_m"]),
        ))
    return records
