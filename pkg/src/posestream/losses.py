"""Training losses as verifiable numerical functions, with analytic gradients.

These are the optimization targets the pose network is trained against:
a point-set rotation loss, a smooth-L1 translation loss, and a smooth-L1
hand-skeleton loss.  Training itself is out of scope here; the functions
exist so the loss surface can be validated independently (brute-force
oracles, finite-difference gradient checks).
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError
from .geometry import ModelPoints, axis_angle_to_matrix

__all__ = [
    "smooth_l1",
    "smooth_l1_grad",
    "rotation_loss",
    "rotation_loss_grad",
    "translation_loss",
    "translation_loss_grad",
    "hand_loss",
    "hand_loss_grad",
    "finite_diff_gradient",
    "as_hand_skeleton",
]

HAND_JOINTS = 21


def _points_array(pts) -> np.ndarray:
    if isinstance(pts, ModelPoints):
        pts = pts.points
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] == 0:
        raise DomainError("model point set must be non-empty")
    return pts


def as_hand_skeleton(h) -> np.ndarray:
    """Validate and reshape a hand skeleton to (21, 3); accepts a flat 63-vector."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape == (3 * HAND_JOINTS,):
        h = h.reshape(HAND_JOINTS, 3)
    if h.shape != (HAND_JOINTS, 3):
        raise ValueError(f"hand skeleton must be (21, 3) or flat 63, got {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValueError("hand skeleton must be finite")
    return h


def smooth_l1(x):
    """Piecewise loss: 0.5 x^2 when |x| < 1, |x| - 0.5 otherwise. Elementwise."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(np.abs(x) < 1.0, 0.5 * x * x, np.abs(x) - 0.5)
    return float(out) if out.ndim == 0 else out


def smooth_l1_grad(x):
    """Derivative of smooth_l1: x inside the quadratic zone, sign(x) outside."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(np.abs(x) < 1.0, x, np.sign(x))
    return float(out) if out.ndim == 0 else out


def rotation_loss(r_pred, r_gt, points) -> float:
    """Average squared distance between model points under the two rotations.

    (1 / 2m) * sum_x ||R_pred x - R_gt x||^2
    """
    pts = _points_array(points)
    R_pred = axis_angle_to_matrix(r_pred)
    R_gt = axis_angle_to_matrix(r_gt)
    diff = pts @ (R_pred - R_gt).T
    return float(np.sum(diff * diff) / (2.0 * pts.shape[0]))


def _rodrigues_jacobian(r) -> np.ndarray:
    """d vec(R) / d r_i as a (3, 3, 3) array: out[i] = dR/dr_i.

    Closed form for the derivative of the exponential map:
        dR/dr_i = (r_i [r]x + [r x (I - R) e_i]x) / ||r||^2 @ R
    with the limit [e_i]x at r = 0.
    """
    r = np.asarray(r, dtype=np.float64)
    R = axis_angle_to_matrix(r)
    theta2 = float(r @ r)
    out = np.empty((3, 3, 3))
    if theta2 < 1e-16:
        for i in range(3):
            e = np.zeros(3)
            e[i] = 1.0
            out[i] = _skew(e)
        return out
    rx = _skew(r)
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1.0
        v = np.cross(r, (np.eye(3) - R) @ e)
        out[i] = ((r[i] * rx + _skew(v)) / theta2) @ R
    return out


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def rotation_loss_grad(r_pred, r_gt, points) -> np.ndarray:
    """Analytic gradient of rotation_loss with respect to the predicted rotation."""
    pts = _points_array(points)
    R_pred = axis_angle_to_matrix(r_pred)
    R_gt = axis_angle_to_matrix(r_gt)
    diff = pts @ (R_pred - R_gt).T          # (m, 3)
    dR = _rodrigues_jacobian(r_pred)        # (3, 3, 3)
    m = pts.shape[0]
    grad = np.empty(3)
    for i in range(3):
        grad[i] = np.sum(diff * (pts @ dR[i].T)) / m
    return grad


def translation_loss(t_pred, t_gt, points) -> float:
    """Smooth-L1 loss over translated model points.

    Translating a point by t gives x + t, so the per-point difference is
    t_pred - t_gt for every point; smooth-L1 is applied per component and
    summed, then averaged over points (making the value independent of m).
    """
    pts = _points_array(points)
    t_pred = np.asarray(t_pred, dtype=np.float64).reshape(3)
    t_gt = np.asarray(t_gt, dtype=np.float64).reshape(3)
    per_point = np.sum(smooth_l1(t_pred - t_gt))
    return float(pts.shape[0] * per_point / (2.0 * pts.shape[0]))


def translation_loss_grad(t_pred, t_gt, points) -> np.ndarray:
    """Analytic gradient of translation_loss with respect to the prediction."""
    _points_array(points)
    t_pred = np.asarray(t_pred, dtype=np.float64).reshape(3)
    t_gt = np.asarray(t_gt, dtype=np.float64).reshape(3)
    return 0.5 * smooth_l1_grad(t_pred - t_gt)


def hand_loss(h_pred, h_gt) -> float:
    """Smooth-L1 loss between two 21-joint skeletons, averaged over joints."""
    hp = as_hand_skeleton(h_pred)
    hg = as_hand_skeleton(h_gt)
    return float(np.sum(smooth_l1(hp - hg)) / (2.0 * HAND_JOINTS))


def hand_loss_grad(h_pred, h_gt) -> np.ndarray:
    """Analytic gradient of hand_loss with respect to the predicted joints, (21, 3)."""
    hp = as_hand_skeleton(h_pred)
    hg = as_hand_skeleton(h_gt)
    return smooth_l1_grad(hp - hg) / (2.0 * HAND_JOINTS)


def finite_diff_gradient(f, x, eps: float = 1e-6) -> np.ndarray:
    """Central-difference gradient oracle: (f(x + e_i eps) - f(x - e_i eps)) / 2 eps."""
    if eps <= 0:
        raise DomainError(f"step must be positive, got {eps}")
    x = np.asarray(x, dtype=np.float64)
    flat = x.reshape(-1)
    grad = np.empty_like(flat)
    for i in range(flat.size):
        hi = flat.copy()
        lo = flat.copy()
        hi[i] += eps
        lo[i] -= eps
        grad[i] = (f(hi.reshape(x.shape)) - f(lo.reshape(x.shape))) / (2.0 * eps)
    return grad.reshape(x.shape)
