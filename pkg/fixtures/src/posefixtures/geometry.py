"""Minimal geometry needed to author fixtures.

Deliberately independent of the pipeline package: fixtures are a
cross-check, so they re-derive projection and rotation from the documented
conventions rather than importing the implementation under test.
"""

from __future__ import annotations

import math

import numpy as np


def rodrigues(r: np.ndarray) -> np.ndarray:
    """Axis-angle 3-vector to rotation matrix."""
    r = np.asarray(r, dtype=np.float64)
    theta = float(np.linalg.norm(r))
    K = np.array([
        [0.0, -r[2], r[1]],
        [r[2], 0.0, -r[0]],
        [-r[1], r[0], 0.0],
    ])
    if theta < 1e-8:
        return np.eye(3) + K
    a = math.sin(theta) / theta
    b = (1.0 - math.cos(theta)) / (theta * theta)
    return np.eye(3) + a * K + b * (K @ K)


def project(intr: dict, pts: np.ndarray) -> np.ndarray:
    """Pinhole projection of (N, 3) camera-frame points to pixels."""
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
    z = pts[:, 2]
    u = intr["fx"] * pts[:, 0] / z + intr.get("s", 0.0) * pts[:, 1] / z + intr["px"]
    v = intr["fy"] * pts[:, 1] / z + intr["py"]
    return np.stack([u, v], axis=1)


def back_project(intr: dict, center: np.ndarray, depth: float) -> np.ndarray:
    """Center pixel + depth to a full translation (inverse of project)."""
    tx = (center[0] - intr["px"]) * depth / intr["fx"]
    ty = (center[1] - intr["py"]) * depth / intr["fy"]
    return np.array([tx, ty, float(depth)])


def rescale_intrinsics(intr: dict, to_w: int, to_h: int) -> dict:
    """Per-axis stretch to a new image size."""
    sx = to_w / intr["width"]
    sy = to_h / intr["height"]
    return {
        "fx": intr["fx"] * sx, "fy": intr["fy"] * sy,
        "px": intr["px"] * sx, "py": intr["py"] * sy,
        "s": intr.get("s", 0.0) * sx,
        "width": int(to_w), "height": int(to_h),
    }
