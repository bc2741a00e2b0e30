"""Anchor grid generation and the head encode/decode round trip.

The detector tiles 12,276 anchors over the 256x256 input; each anchor
carries a candidate pose. encode_ground_truth writes a known pose into raw
head arrays, and the decode + filter path must hand it back.
"""

import numpy as np

from posestream.anchors import AnchorConfig, generate_anchors
from posestream.decode import decode_heads, encode_ground_truth, filter_detections
from posestream.geometry import CameraIntrinsics, Pose6DoF, recover_translation

grid = generate_anchors(256)
print("default grid:", len(grid), "anchors over", grid.config.levels, "pyramid levels")
for level, stride in enumerate(grid.config.strides):
    count = int(np.sum(grid.level_of == level))
    print(f"  stride {stride:>3}: {count} anchors")

K = CameraIntrinsics(fx=177.0, fy=313.0, px=128.0, py=128.0, width=256, height=256)

# Scripted ground truth: a pose whose center lands at pixel (90, 140).
center = np.array([90.0, 140.0])
pose = Pose6DoF(rotation=np.array([0.4, -0.8, 0.2]),
                translation=recover_translation(center, 0.55, K))
hand = pose.translation + np.random.default_rng(1).uniform(-0.08, 0.08, (21, 3))

raw = encode_ground_truth(pose, hand, grid, K)
assigned = int(np.argmax(raw.class_logit))
print("\nassigned anchor", assigned, "at center", grid.centers[assigned],
      "for projected center", center)

candidates = decode_heads(raw, grid, K)
print("decoded", len(candidates), "candidates; best score %.4f" % candidates.scores.max())

detection = filter_detections(candidates, score_threshold=0.5, iou_threshold=0.5)
print("\nfiltered detection:")
print("  score:", round(detection.score, 4))
print("  translation error:", np.abs(detection.pose.translation - pose.translation).max())
print("  rotation error:", np.abs(detection.pose.rotation - pose.rotation).max())
print("  hand error:", np.abs(detection.hand - hand).max())

# A one-anchor layout for intuition.
tiny = generate_anchors(64, AnchorConfig(strides=(64,), scales=(1.0,), ratios=(1.0,)))
print("\nsingle-anchor layout:", tiny.boxes)
