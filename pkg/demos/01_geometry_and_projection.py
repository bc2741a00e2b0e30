"""Rotations, pinhole projection, and translation recovery.

Walks through the geometric core: axis-angle <-> matrix conversion, the
pinhole camera model, and rebuilding a full 3D translation from a projected
center point plus its depth.
"""

import numpy as np

from posestream.geometry import (
    CameraIntrinsics,
    Pose6DoF,
    axis_angle_to_matrix,
    matrix_to_axis_angle,
    project_point,
    recover_translation,
    rescale_intrinsics,
    transform_points,
)
from posestream.synthetic import make_default_tool_model

# An axis-angle rotation: unit axis scaled by the angle in radians.
r = np.array([0.0, 0.0, np.pi / 2])
R = axis_angle_to_matrix(r)
print("quarter turn about z maps x-hat to:", np.round(R @ [1.0, 0.0, 0.0], 6))
print("round trip recovers the vector:", matrix_to_axis_angle(R))

# Egocentric capture camera: 896x504 with the principal point mid-frame.
K = CameraIntrinsics(fx=620.0, fy=620.0, px=448.0, py=252.0, width=896, height=504)

# A tool 80 cm in front of the camera, slightly left and up.
t = np.array([-0.05, -0.03, 0.8])
c = project_point(K, t)
print("\nobject center projects to pixel:", np.round(c, 2))

# The network regresses the center pixel and the depth; the missing
# translation components come back through the intrinsics.
t_recovered = recover_translation(c, t[2], K)
print("recovered translation:", t_recovered, "error:", np.abs(t_recovered - t).max())

# Inference runs at 256x256, so the intrinsics stretch per axis.
K_net = rescale_intrinsics(K, 256, 256)
print("\nnetwork-input intrinsics: fx=%.2f fy=%.2f px=%.2f py=%.2f"
      % (K_net.fx, K_net.fy, K_net.px, K_net.py))

# Rigid transform of a model point cloud.
model = make_default_tool_model()
pose = Pose6DoF(rotation=np.array([0.3, -0.2, 0.1]), translation=t)
moved = transform_points(pose, model)
print("\nmodel has", len(model), "points; first transformed point:", np.round(moved[0], 4))
print("tool tip in camera frame:", np.round(axis_angle_to_matrix(pose.rotation) @ model.tip + t, 4))
