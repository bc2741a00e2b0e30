"""Pose/hand record files: JSON lines, one frame per row.

Row layout: {"frame_id": int, "rotation": [3], "translation": [3],
"hand": [63]} in radians/meters.  The hand field is optional — the
streaming client only receives the 24-byte pose core, so its dumps are
pose-only; server-side dumps carry the full detection.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .geometry import Pose6DoF
from .losses import HAND_JOINTS

__all__ = ["PoseRecord", "write_pose_records", "read_pose_records", "pose_record_row"]


class PoseRecord:
    __slots__ = ("frame_id", "pose", "hand")

    def __init__(self, frame_id: int, pose: Pose6DoF, hand: np.ndarray | None = None):
        self.frame_id = int(frame_id)
        self.pose = pose
        self.hand = None if hand is None else np.asarray(hand, dtype=np.float64).reshape(
            HAND_JOINTS, 3
        )


def pose_record_row(record: PoseRecord) -> str:
    row = {
        "frame_id": record.frame_id,
        "rotation": [float(v) for v in record.pose.rotation],
        "translation": [float(v) for v in record.pose.translation],
    }
    if record.hand is not None:
        row["hand"] = [float(v) for v in record.hand.reshape(-1)]
    return json.dumps(row)


def write_pose_records(records, path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(pose_record_row(r) + "\n")


def read_pose_records(path) -> dict[int, PoseRecord]:
    """Load a record file keyed by frame id; duplicate ids are a config error."""
    out: dict[int, PoseRecord] = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read pose records {path}: {e}") from e
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            frame_id = int(raw["frame_id"])
            pose = Pose6DoF(
                rotation=np.asarray(raw["rotation"], dtype=np.float64),
                translation=np.asarray(raw["translation"], dtype=np.float64),
            )
            hand = raw.get("hand")
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as e:
            raise ConfigError(f"{path}:{lineno}: bad pose record: {e}") from e
        if frame_id in out:
            raise ConfigError(f"{path}:{lineno}: duplicate frame id {frame_id}")
        out[frame_id] = PoseRecord(frame_id, pose, hand)
    return out
