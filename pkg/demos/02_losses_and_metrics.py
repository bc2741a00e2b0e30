"""The training losses and the evaluation metrics, with gradient checks.

Shows the three loss surfaces (rotation, translation, hand), verifies an
analytic gradient against central differences, and computes the evaluation
metrics the result tables are built from.
"""

import numpy as np

from posestream.geometry import Pose6DoF
from posestream.losses import (
    finite_diff_gradient,
    hand_loss,
    rotation_loss,
    rotation_loss_grad,
    smooth_l1,
    translation_loss,
)
from posestream.metrics import (
    add_hand,
    add_tool,
    aggregate_metrics,
    drill_direction_error,
    drill_tip_error,
    FrameMetrics,
)
from posestream.synthetic import make_default_tool_model

rng = np.random.default_rng(0)
model = make_default_tool_model()
points = model.subsample(200, seed=0)

# Smooth-L1 is quadratic inside |x| < 1 and linear outside.
print("smooth_l1(0.5) =", smooth_l1(0.5), "   smooth_l1(2.0) =", smooth_l1(2.0))

r_gt = np.array([0.4, -0.1, 0.8])
r_pred = r_gt + np.array([0.05, 0.02, -0.03])
print("\nrotation loss at gt:", rotation_loss(r_gt, r_gt, points))
print("rotation loss perturbed:", rotation_loss(r_pred, r_gt, points))

analytic = rotation_loss_grad(r_pred, r_gt, points)
numeric = finite_diff_gradient(lambda r: rotation_loss(r, r_gt, points), r_pred, 1e-6)
print("gradient check |analytic - numeric| =", np.abs(analytic - numeric).max())

t_gt = np.array([0.0, 0.0, 0.6])
print("\ntranslation loss for a 3 cm miss:",
      translation_loss(t_gt + np.array([0.03, 0.0, 0.0]), t_gt, points))

h_gt = t_gt + rng.uniform(-0.1, 0.1, size=(21, 3))
h_pred = h_gt + rng.normal(scale=0.01, size=(21, 3))
print("hand loss for ~1 cm jitter:", hand_loss(h_pred, h_gt))

# Evaluation metrics: ADD, tip error, bit-direction error.
pose_gt = Pose6DoF(rotation=r_gt, translation=t_gt)
pose_pred = Pose6DoF(rotation=r_pred, translation=t_gt + np.array([0.004, -0.002, 0.006]))
print("\ntool ADD: %.3f mm" % (1000 * add_tool(pose_gt, pose_pred, points)))
print("tip error: %.3f mm" % (1000 * drill_tip_error(pose_gt, pose_pred, points)))
print("direction error: %.3f deg" % drill_direction_error(pose_gt, pose_pred, points))
print("hand ADD: %.3f mm" % (1000 * add_hand(h_gt, h_pred)))

# Aggregating a frame set the way the result tables report it.
frames = [
    FrameMetrics(frame_id=i, tool_add_m=float(v), tip_error_m=float(2 * v),
                 direction_error_deg=float(100 * v), hand_add_m=float(1.5 * v))
    for i, v in enumerate(rng.uniform(0.005, 0.02, 50))
]
print("\n" + aggregate_metrics(frames).format_text())
