"""Deterministic synthetic poses, frames, and tool models.

A PoseScript is a seeded, frame-id-keyed generator: the streaming client
and the server's synthetic inference backend construct the same script from
a shared seed, which is what makes exact end-to-end verification possible
without a trained network.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import (
    CameraIntrinsics,
    ModelPoints,
    Pose6DoF,
    project_points,
    recover_translation,
    transform_points,
)
from .losses import HAND_JOINTS
from .preprocess import FrameYUV420, rgb_to_yuv420

__all__ = [
    "PoseScript",
    "SyntheticFrameSource",
    "make_default_tool_model",
    "draw_points",
]


class PoseScript:
    """Seeded pose/hand sequence with centers constrained inside the frame."""

    def __init__(
        self,
        seed: int,
        intrinsics: CameraIntrinsics,
        tz_range: tuple[float, float] = (0.3, 1.5),
        center_margin: float = 0.15,
    ):
        if not 0.0 <= center_margin < 0.5:
            raise ValueError(f"center margin must be in [0, 0.5), got {center_margin}")
        self.seed = int(seed)
        self.intrinsics = intrinsics
        self.tz_range = (float(tz_range[0]), float(tz_range[1]))
        self.center_margin = float(center_margin)

    def sample(self, frame_id: int) -> tuple[Pose6DoF, np.ndarray]:
        """Pose and 21x3 hand for one frame id; same (seed, id) gives same values."""
        rng = np.random.default_rng([self.seed, int(frame_id)])
        K = self.intrinsics
        cx = rng.uniform(self.center_margin * K.width, (1.0 - self.center_margin) * K.width)
        cy = rng.uniform(self.center_margin * K.height, (1.0 - self.center_margin) * K.height)
        tz = rng.uniform(*self.tz_range)
        translation = recover_translation(np.array([cx, cy]), tz, K)

        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(0.05, math.pi - 0.05)
        rotation = axis * angle

        hand = translation + rng.uniform(-0.1, 0.1, size=(HAND_JOINTS, 3))
        return Pose6DoF(rotation=rotation, translation=translation), hand


def make_default_tool_model(seed: int = 0, n_points: int = 120) -> ModelPoints:
    """Elongated synthetic tool point cloud with a tip and a bit axis.

    Stands in for real instrument geometry in demos, benches, and tests.
    """
    rng = np.random.default_rng(seed)
    length = 0.20           # 20 cm body along +z, model frame
    radius = 0.03
    z = rng.uniform(-length / 2, length / 2, size=n_points)
    phi = rng.uniform(0.0, 2.0 * math.pi, size=n_points)
    rad = radius * np.sqrt(rng.uniform(0.0, 1.0, size=n_points))
    points = np.stack([rad * np.cos(phi), rad * np.sin(phi), z], axis=1)
    return ModelPoints(
        points=points,
        tip=np.array([0.0, 0.0, length / 2 + 0.05]),
        axis=np.array([0.0, 0.0, 1.0]),
    )


def draw_points(rgb: np.ndarray, points_px: np.ndarray, color, radius: int = 2) -> None:
    """Stamp filled squares at pixel locations, in place; off-image points are skipped."""
    h, w = rgb.shape[:2]
    color = np.asarray(color, dtype=np.uint8)
    for u, v in np.asarray(points_px, dtype=np.float64).reshape(-1, 2):
        ui, vi = int(round(u)), int(round(v))
        if not (0 <= ui < w and 0 <= vi < h):
            continue
        rgb[max(0, vi - radius):min(h, vi + radius + 1),
            max(0, ui - radius):min(w, ui + radius + 1)] = color


class SyntheticFrameSource:
    """Renders script poses as projected tool points on a neutral background."""

    def __init__(
        self,
        script: PoseScript,
        model: ModelPoints | None = None,
        background: int = 128,
    ):
        self.script = script
        self.model = model
        self.background = int(background)
        self._plain: FrameYUV420 | None = None

    def frame(self, frame_id: int, timestamp_us: int = 0) -> FrameYUV420:
        K = self.script.intrinsics
        if self.model is None:
            # Content is identical for every frame id; convert once.
            if self._plain is None:
                rgb = np.full((K.height, K.width, 3), self.background, dtype=np.uint8)
                self._plain = rgb_to_yuv420(rgb)
            p = self._plain
            return FrameYUV420(
                width=p.width, height=p.height, y=p.y, u=p.u, v=p.v,
                frame_id=frame_id, timestamp_us=timestamp_us,
            )
        rgb = np.full((K.height, K.width, 3), self.background, dtype=np.uint8)
        pose, _ = self.script.sample(frame_id)
        pts = transform_points(pose, self.model)
        draw_points(rgb, project_points(K, pts), color=(40, 90, 200))
        return rgb_to_yuv420(rgb, frame_id=frame_id, timestamp_us=timestamp_us)
