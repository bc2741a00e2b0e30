"""Decode raw per-anchor network heads into pose + hand detections.

The network emits, per anchor: a class logit, a 4-vector box regression,
an axis-angle rotation, a pixel offset of the object center relative to
the anchor center, a depth t_z in meters, and a flat 63-vector of hand
joint coordinates.  Decoding composes the translation from the center
point, the depth, and the camera intrinsics of the network-input image.

encode_ground_truth is the exact inverse used by the synthetic inference
backend and by round-trip tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anchors import AnchorGrid
from .errors import EncodeError, StructuralError
from .geometry import CameraIntrinsics, Pose6DoF, project_point
from .losses import HAND_JOINTS

__all__ = [
    "RawHeads",
    "Detection",
    "DetectionSet",
    "decode_heads",
    "box_iou",
    "nms",
    "filter_detections",
    "encode_ground_truth",
    "sigmoid",
]

ASSIGNED_LOGIT = 6.0
BACKGROUND_LOGIT = -6.0
# Depth written to unassigned anchors so every decoded candidate carries a
# representable (if meaningless) pose.
BACKGROUND_DEPTH = 1.0


def sigmoid(x):
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class RawHeads:
    """Struct-of-arrays network output, one row per anchor."""

    class_logit: np.ndarray     # (A,)
    box_regress: np.ndarray     # (A, 4) as (dx, dy, dw, dh)
    rotation: np.ndarray        # (A, 3) axis-angle
    center_offset: np.ndarray   # (A, 2) pixels relative to anchor center
    depth: np.ndarray           # (A,) t_z in meters
    hand: np.ndarray            # (A, 63) camera-frame joint coordinates

    def __post_init__(self):
        arrays = {
            "class_logit": (self.class_logit, (None,)),
            "box_regress": (self.box_regress, (None, 4)),
            "rotation": (self.rotation, (None, 3)),
            "center_offset": (self.center_offset, (None, 2)),
            "depth": (self.depth, (None,)),
            "hand": (self.hand, (None, 3 * HAND_JOINTS)),
        }
        count = None
        for name, (arr, shape) in arrays.items():
            arr = np.asarray(arr, dtype=np.float64)
            if arr.ndim != len(shape) or any(
                s is not None and arr.shape[i] != s for i, s in enumerate(shape)
            ):
                raise StructuralError(f"{name} has shape {arr.shape}, expected {shape}")
            if count is None:
                count = arr.shape[0]
            elif arr.shape[0] != count:
                raise StructuralError(
                    f"{name} covers {arr.shape[0]} anchors, expected {count}"
                )
            if not np.all(np.isfinite(arr)):
                raise StructuralError(f"{name} contains non-finite values")
            object.__setattr__(self, name, arr)

    @property
    def anchor_count(self) -> int:
        return self.class_logit.shape[0]


@dataclass(frozen=True, eq=False)
class Detection:
    """One decoded candidate: score in [0, 1], pose, 21x3 hand, xyxy box."""

    score: float
    pose: Pose6DoF
    hand: np.ndarray
    box: np.ndarray
    anchor_index: int = -1


class DetectionSet:
    """Lazy sequence of Detection over vectorized decode results.

    Behaves like a list of Detection (len / index / iterate) while keeping
    the per-anchor data as arrays; materializing 12k Python objects per
    frame would dominate the per-frame budget.
    """

    def __init__(self, scores, rotations, translations, hands, boxes):
        self.scores = scores
        self.rotations = rotations
        self.translations = translations
        self.hands = hands
        self.boxes = boxes

    def __len__(self) -> int:
        return self.scores.shape[0]

    def __getitem__(self, i: int) -> Detection:
        if isinstance(i, slice):
            raise TypeError("DetectionSet does not support slicing")
        i = int(i)
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        return Detection(
            score=float(self.scores[i]),
            pose=Pose6DoF(rotation=self.rotations[i], translation=self.translations[i]),
            hand=self.hands[i].reshape(HAND_JOINTS, 3),
            box=self.boxes[i],
            anchor_index=i,
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]


def decode_heads(raw: RawHeads, grid: AnchorGrid, K: CameraIntrinsics) -> DetectionSet:
    """Decode every anchor's head outputs into detection candidates.

    K must be the intrinsics of the network-input-sized image.  Boxes are
    clipped to the image bounds; scores are sigmoid(logit); the hand vector
    is taken as absolute camera-frame coordinates.
    """
    if raw.anchor_count != len(grid):
        raise StructuralError(
            f"raw heads cover {raw.anchor_count} anchors, grid has {len(grid)}"
        )
    scores = sigmoid(raw.class_logit)
    centers = grid.centers + raw.center_offset
    tz = raw.depth
    # Translation recovery, vectorized; candidates with junk depth still get
    # a value so scoring can reject them downstream.
    tx = (centers[:, 0] - K.px) * tz / K.fx
    ty = (centers[:, 1] - K.py) * tz / K.fy
    translations = np.stack([tx, ty, tz], axis=1)

    aw = grid.boxes[:, 2]
    ah = grid.boxes[:, 3]
    bcx = grid.boxes[:, 0] + raw.box_regress[:, 0] * aw
    bcy = grid.boxes[:, 1] + raw.box_regress[:, 1] * ah
    with np.errstate(over="ignore"):
        bw = aw * np.exp(raw.box_regress[:, 2])
        bh = ah * np.exp(raw.box_regress[:, 3])
    boxes = np.stack([bcx - bw / 2, bcy - bh / 2, bcx + bw / 2, bcy + bh / 2], axis=1)
    boxes[:, 0::2] = np.clip(boxes[:, 0::2], 0.0, grid.input_width)
    boxes[:, 1::2] = np.clip(boxes[:, 1::2], 0.0, grid.input_height)

    return DetectionSet(scores, raw.rotation, translations, raw.hand, boxes)


def box_iou(a: np.ndarray, b: np.ndarray) -> float:
    """IoU of two xyxy boxes."""
    ix1 = max(a[0], b[0])
    iy1 = max(a[1], b[1])
    ix2 = min(a[2], b[2])
    iy2 = min(a[3], b[3])
    iw = max(0.0, ix2 - ix1)
    ih = max(0.0, iy2 - iy1)
    inter = iw * ih
    if inter == 0.0:
        return 0.0
    area_a = max(0.0, a[2] - a[0]) * max(0.0, a[3] - a[1])
    area_b = max(0.0, b[2] - b[0]) * max(0.0, b[3] - b[1])
    union = area_a + area_b - inter
    return inter / union if union > 0 else 0.0


def nms(boxes, scores, iou_threshold: float) -> list[int]:
    """Greedy non-maximum suppression.

    Returns kept indices in descending score order; equal scores break
    toward the lower index.  A candidate is suppressed when its IoU with an
    already-kept box exceeds the threshold.
    """
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if boxes.shape[0] != scores.shape[0]:
        raise StructuralError(
            f"{boxes.shape[0]} boxes but {scores.shape[0]} scores"
        )
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou threshold must be in (0, 1], got {iou_threshold}")
    order = np.argsort(-scores, kind="stable")
    x1, y1, x2, y2 = boxes[:, 0], boxes[:, 1], boxes[:, 2], boxes[:, 3]
    areas = np.maximum(0.0, x2 - x1) * np.maximum(0.0, y2 - y1)
    kept: list[int] = []
    suppressed = np.zeros(len(order), dtype=bool)
    for pos, i in enumerate(order):
        if suppressed[pos]:
            continue
        kept.append(int(i))
        rest = order[pos + 1:]
        if rest.size == 0:
            break
        iw = np.maximum(
            0.0, np.minimum(x2[i], x2[rest]) - np.maximum(x1[i], x1[rest])
        )
        ih = np.maximum(
            0.0, np.minimum(y2[i], y2[rest]) - np.maximum(y1[i], y1[rest])
        )
        inter = iw * ih
        union = areas[i] + areas[rest] - inter
        iou = np.where(union > 0, inter / np.maximum(union, 1e-12), 0.0)
        suppressed[pos + 1:] |= iou > iou_threshold
    return kept


def filter_detections(
    candidates,
    score_threshold: float = 0.5,
    iou_threshold: float = 0.5,
) -> Detection | None:
    """Score-filter, NMS, and top-1 selection for a single-tool scene.

    Returns None when nothing clears the score threshold; that is the
    normal "no detection" outcome, not an error.
    """
    if isinstance(candidates, DetectionSet):
        mask = candidates.scores >= score_threshold
        if not np.any(mask):
            return None
        idx = np.nonzero(mask)[0]
        boxes = candidates.boxes[idx]
        scores = candidates.scores[idx]
    else:
        candidates = list(candidates)
        idx = np.array(
            [i for i, d in enumerate(candidates) if d.score >= score_threshold],
            dtype=np.int64,
        )
        if idx.size == 0:
            return None
        boxes = np.stack([candidates[i].box for i in idx])
        scores = np.array([candidates[i].score for i in idx])
    kept = nms(boxes, scores, iou_threshold)
    best = idx[kept[0]]
    return candidates[int(best)]


def encode_ground_truth(
    pose: Pose6DoF,
    hand,
    grid: AnchorGrid,
    K: CameraIntrinsics,
) -> RawHeads:
    """Inverse of decode_heads for one known pose: the synthetic-backend oracle.

    The anchor nearest the projected object center gets a high class logit
    and exact center offset / depth / rotation / hand values; every other
    anchor is background.
    """
    hand = np.asarray(hand, dtype=np.float64).reshape(3 * HAND_JOINTS)
    if pose.translation[2] <= 0:
        raise EncodeError(f"pose depth must be positive, got {pose.translation[2]}")
    c = project_point(K, pose.translation)
    if not (0.0 <= c[0] < grid.input_width and 0.0 <= c[1] < grid.input_height):
        raise EncodeError(
            f"projected center ({c[0]:.1f}, {c[1]:.1f}) outside "
            f"{grid.input_width}x{grid.input_height} input"
        )
    a = grid.nearest_anchor(c)
    n = len(grid)
    class_logit = np.full(n, BACKGROUND_LOGIT)
    box_regress = np.zeros((n, 4))
    rotation = np.zeros((n, 3))
    center_offset = np.zeros((n, 2))
    depth = np.full(n, BACKGROUND_DEPTH)
    hand_out = np.zeros((n, 3 * HAND_JOINTS))

    class_logit[a] = ASSIGNED_LOGIT
    center_offset[a] = c - grid.centers[a]
    depth[a] = pose.translation[2]
    rotation[a] = pose.rotation
    hand_out[a] = hand
    # Box: centered on the projected point, anchor-sized.
    box_regress[a, 0] = center_offset[a, 0] / grid.boxes[a, 2]
    box_regress[a, 1] = center_offset[a, 1] / grid.boxes[a, 3]

    return RawHeads(
        class_logit=class_logit,
        box_regress=box_regress,
        rotation=rotation,
        center_offset=center_offset,
        depth=depth,
        hand=hand_out,
    )
