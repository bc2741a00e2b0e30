"""Rotation representations, pinhole projection, and translation recovery.

Conventions used throughout the package:

- Lengths are meters, camera frame, z forward.  Reports convert to mm only
  at presentation time.
- Rotations are axis-angle 3-vectors (unit axis scaled by angle in radians),
  canonical magnitude in [0, pi].
- Pixel coordinates follow the usual image convention: u right, v down,
  origin at the top-left corner.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BehindCameraError, ConfigError, DomainError

__all__ = [
    "CameraIntrinsics",
    "ModelPoints",
    "Pose6DoF",
    "axis_angle_to_matrix",
    "matrix_to_axis_angle",
    "canonicalize_rotation_vec",
    "project_point",
    "project_points",
    "recover_translation",
    "transform_points",
    "rescale_intrinsics",
    "load_intrinsics",
    "load_model_points",
]

_ORTHO_TOL = 1e-6


def _as_vec3(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {v.shape}")
    return v


@dataclass(frozen=True, eq=False)
class Pose6DoF:
    """Rigid pose: axis-angle rotation + translation, camera frame, meters."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _as_vec3(self.rotation, "rotation"))
        object.__setattr__(self, "translation", _as_vec3(self.translation, "translation"))

    @property
    def matrix(self) -> np.ndarray:
        """3x3 rotation matrix of the axis-angle component."""
        return axis_angle_to_matrix(self.rotation)

    def homogeneous(self) -> np.ndarray:
        """4x4 [R | t] transform."""
        T = np.eye(4)
        T[:3, :3] = self.matrix
        T[:3, 3] = self.translation
        return T


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters, all in pixels."""

    fx: float
    fy: float
    px: float
    py: float
    width: int
    height: int
    s: float = 0.0

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ConfigError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width <= 0 or self.height <= 0:
            raise ConfigError(f"image size must be positive, got {self.width}x{self.height}")
        if not (0 <= self.px <= self.width) or not (0 <= self.py <= self.height):
            raise ConfigError(
                f"principal point ({self.px}, {self.py}) outside {self.width}x{self.height} image"
            )

    def matrix(self) -> np.ndarray:
        """3x3 intrinsic matrix [[fx, s, px], [0, fy, py], [0, 0, 1]]."""
        return np.array([[self.fx, self.s, self.px], [0.0, self.fy, self.py], [0.0, 0.0, 1.0]])

    def to_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "px": self.px, "py": self.py,
            "s": self.s, "width": self.width, "height": self.height,
        }


def axis_angle_to_matrix(r) -> np.ndarray:
    """Rodrigues formula: axis-angle 3-vector to 3x3 rotation matrix.

    Small angles take the series branch of the coefficients, so theta = 0
    yields the identity with no special casing at the call site.
    """
    r = _as_vec3(r, "rotation vector")
    if not np.all(np.isfinite(r)):
        raise DomainError("rotation vector must be finite")
    theta2 = float(r @ r)
    theta = math.sqrt(theta2)
    K = np.array([
        [0.0, -r[2], r[1]],
        [r[2], 0.0, -r[0]],
        [-r[1], r[0], 0.0],
    ])
    if theta < 1e-8:
        # sin(t)/t ~ 1 - t^2/6, (1-cos t)/t^2 ~ 1/2 - t^2/24
        a = 1.0 - theta2 / 6.0
        b = 0.5 - theta2 / 24.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / theta2
    return np.eye(3) + a * K + b * (K @ K)


def _check_rotation_matrix(R: np.ndarray) -> np.ndarray:
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise ValueError(f"rotation matrix must be 3x3, got {R.shape}")
    if np.max(np.abs(R.T @ R - np.eye(3))) > _ORTHO_TOL:
        raise DomainError("matrix is not orthonormal within 1e-6")
    if abs(np.linalg.det(R) - 1.0) > _ORTHO_TOL:
        raise DomainError("matrix determinant is not 1 within 1e-6")
    return R


def matrix_to_axis_angle(R) -> np.ndarray:
    """Inverse of axis_angle_to_matrix; canonical output magnitude in [0, pi].

    The theta = pi sign ambiguity is resolved by flipping the axis so its
    first nonzero component is positive.
    """
    R = _check_rotation_matrix(R)
    trace = float(np.trace(R))
    cos_theta = max(-1.0, min(1.0, (trace - 1.0) / 2.0))
    theta = math.acos(cos_theta)
    # w = 2 sin(theta) * axis
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < 1e-8:
        return np.zeros(3)
    if theta < math.pi - 1e-4:
        return theta * w / (2.0 * math.sin(theta))
    # Near pi the antisymmetric part cancels; take magnitudes from the
    # symmetric part (R ~ 2 aa^T - I) and the largest diagonal as pivot.
    d = np.diag(R)
    axis = np.sqrt(np.maximum(0.0, (d + 1.0) / 2.0))
    i = int(np.argmax(axis))
    for j in range(3):
        if j != i:
            axis[j] = (R[i, j] + R[j, i]) / (4.0 * axis[i])
    axis /= np.linalg.norm(axis)
    if np.linalg.norm(w) > 1e-9:
        # theta still below pi: the true sign is recoverable.
        if float(w @ axis) < 0:
            axis = -axis
    else:
        # Exactly pi: sign convention, first nonzero component positive.
        nonzero = np.nonzero(np.abs(axis) > 1e-12)[0]
        if nonzero.size and axis[nonzero[0]] < 0:
            axis = -axis
    return theta * axis


def canonicalize_rotation_vec(r) -> np.ndarray:
    """Wrap an axis-angle vector so its magnitude lies in [0, pi]."""
    r = _as_vec3(r, "rotation vector")
    theta = float(np.linalg.norm(r))
    if theta <= math.pi or theta == 0.0:
        return r.copy()
    axis = r / theta
    wrapped = math.fmod(theta, 2.0 * math.pi)
    if wrapped > math.pi:
        wrapped = 2.0 * math.pi - wrapped
        axis = -axis
    return axis * wrapped


def project_point(K: CameraIntrinsics, x) -> np.ndarray:
    """Pinhole projection of a camera-frame 3D point to pixel coordinates."""
    x = _as_vec3(x, "point")
    if x[2] <= 0:
        raise BehindCameraError(f"point depth must be positive, got z={x[2]}")
    u = K.fx * x[0] / x[2] + K.s * x[1] / x[2] + K.px
    v = K.fy * x[1] / x[2] + K.py
    return np.array([u, v])


def project_points(K: CameraIntrinsics, pts) -> np.ndarray:
    """Vectorized pinhole projection of an (N, 3) array; all depths must be positive."""
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
    z = pts[:, 2]
    if np.any(z <= 0):
        raise BehindCameraError("all point depths must be positive")
    u = K.fx * pts[:, 0] / z + K.s * pts[:, 1] / z + K.px
    v = K.fy * pts[:, 1] / z + K.py
    return np.stack([u, v], axis=1)


def recover_translation(c, t_z: float, K: CameraIntrinsics) -> np.ndarray:
    """Rebuild the full translation from a projected center and its depth.

    t_x = (c_x - p_x) * t_z / f_x,  t_y = (c_y - p_y) * t_z / f_y.
    """
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (2,):
        raise ValueError(f"center must be a pixel 2-vector, got shape {c.shape}")
    if t_z <= 0:
        raise DomainError(f"depth must be positive, got t_z={t_z}")
    t_x = (c[0] - K.px) * t_z / K.fx
    t_y = (c[1] - K.py) * t_z / K.fy
    return np.array([t_x, t_y, float(t_z)])


def transform_points(pose: Pose6DoF, pts) -> np.ndarray:
    """Apply R x + t to every model point; returns an (N, 3) array."""
    if isinstance(pts, ModelPoints):
        pts = pts.points
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
    R = pose.matrix
    return pts @ R.T + pose.translation


def rescale_intrinsics(K: CameraIntrinsics, to_width: int, to_height: int) -> CameraIntrinsics:
    """Per-axis stretch of the intrinsics to a new image size (no letterboxing)."""
    if to_width <= 0 or to_height <= 0:
        raise DomainError(f"target size must be positive, got {to_width}x{to_height}")
    sx = to_width / K.width
    sy = to_height / K.height
    return CameraIntrinsics(
        fx=K.fx * sx, fy=K.fy * sy,
        px=K.px * sx, py=K.py * sy,
        s=K.s * sx,
        width=int(to_width), height=int(to_height),
    )


@dataclass(frozen=True, eq=False)
class ModelPoints:
    """3D model point set plus tool metadata (tip point and bit axis, model frame).

    Tip and axis come from the model metadata file; they are never inferred
    from the point cloud.
    """

    points: np.ndarray
    tip: np.ndarray
    axis: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
            raise ConfigError(f"model points must be a non-empty (N, 3) array, got {pts.shape}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "tip", _as_vec3(self.tip, "tip"))
        axis = _as_vec3(self.axis, "axis")
        if abs(np.linalg.norm(axis) - 1.0) > 1e-6:
            raise ConfigError(f"axis must be unit length, got norm {np.linalg.norm(axis):.9f}")
        object.__setattr__(self, "axis", axis)

    def __len__(self) -> int:
        return self.points.shape[0]

    def subsample(self, max_points: int = 500, seed: int = 0) -> "ModelPoints":
        """Uniform random subsample without replacement; deterministic for a seed."""
        n = len(self)
        if n <= max_points:
            return self
        idx = np.random.default_rng(seed).choice(n, size=max_points, replace=False)
        return ModelPoints(points=self.points[np.sort(idx)], tip=self.tip, axis=self.axis)


def load_intrinsics(path) -> CameraIntrinsics:
    """Read the intrinsics config JSON: {fx, fy, px, py, s, width, height}."""
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read intrinsics file {path}: {e}") from e
    try:
        return CameraIntrinsics(
            fx=float(raw["fx"]), fy=float(raw["fy"]),
            px=float(raw["px"]), py=float(raw["py"]),
            s=float(raw.get("s", 0.0)),
            width=int(raw["width"]), height=int(raw["height"]),
        )
    except KeyError as e:
        raise ConfigError(f"intrinsics file {path} missing field {e}") from e


def save_intrinsics(K: CameraIntrinsics, path) -> None:
    Path(path).write_text(json.dumps(K.to_dict(), indent=2) + "\n")


def load_model_points(path) -> ModelPoints:
    """Read model metadata JSON: {points, tip, axis, units} with units == "m"."""
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read model metadata {path}: {e}") from e
    units = raw.get("units")
    if units != "m":
        raise ConfigError(f"model metadata units must be 'm', got {units!r}")
    for field in ("points", "tip", "axis"):
        if field not in raw:
            raise ConfigError(f"model metadata {path} missing field {field!r}")
    return ModelPoints(points=raw["points"], tip=raw["tip"], axis=raw["axis"])


def save_model_points(m: ModelPoints, path) -> None:
    payload = {
        "points": m.points.tolist(),
        "tip": m.tip.tolist(),
        "axis": m.axis.tolist(),
        "units": "m",
    }
    Path(path).write_text(json.dumps(payload) + "\n")
