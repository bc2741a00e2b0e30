"""Offline evaluation: prediction records vs ground truth, tabulated metrics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .geometry import ModelPoints
from .metrics import (
    FrameMetrics,
    MetricReport,
    add_hand,
    add_tool,
    drill_direction_error,
    drill_tip_error,
)
from .records import read_pose_records

logger = logging.getLogger(__name__)

__all__ = ["EvaluationResult", "evaluate"]

SUBSAMPLE_MAX_POINTS = 500
SUBSAMPLE_SEED = 0


@dataclass(frozen=True)
class EvaluationResult:
    report: MetricReport
    per_frame: list[FrameMetrics]
    missing_in_pred: list[int]
    missing_in_gt: list[int]


def _agg(values: list[float]) -> tuple[float, float]:
    arr = np.asarray([v for v in values if not math.isnan(v)], dtype=np.float64)
    if arr.size == 0:
        return (float("nan"), float("nan"))
    return float(arr.mean()), float(arr.std())


def evaluate(
    pred_path,
    gt_path,
    model: ModelPoints,
    subsample_max: int = SUBSAMPLE_MAX_POINTS,
    subsample_seed: int = SUBSAMPLE_SEED,
) -> EvaluationResult:
    """Per-frame pose/hand metrics over the frame ids common to both files.

    Frames present on only one side are listed and excluded (warning); an
    empty intersection is an error.  Hand ADD covers the frames where both
    sides carry a hand (client dumps are pose-only).
    """
    preds = read_pose_records(pred_path)
    gts = read_pose_records(gt_path)
    common = sorted(set(preds) & set(gts))
    missing_in_pred = sorted(set(gts) - set(preds))
    missing_in_gt = sorted(set(preds) - set(gts))
    if not common:
        raise ConfigError(
            f"no overlapping frame ids between {pred_path} and {gt_path}"
        )
    for label, missing in (("predictions", missing_in_pred), ("ground truth", missing_in_gt)):
        if missing:
            shown = ", ".join(str(i) for i in missing[:10])
            more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
            logger.warning("%d frame ids missing from %s: %s%s", len(missing), label, shown, more)

    points = model.subsample(subsample_max, subsample_seed)
    per_frame = []
    for fid in common:
        p = preds[fid]
        g = gts[fid]
        if g.hand is not None and p.hand is not None:
            hand = add_hand(g.hand, p.hand)
        else:
            hand = float("nan")
        per_frame.append(FrameMetrics(
            frame_id=fid,
            tool_add_m=add_tool(g.pose, p.pose, points),
            tip_error_m=drill_tip_error(g.pose, p.pose, points),
            direction_error_deg=drill_direction_error(g.pose, p.pose, points),
            hand_add_m=hand,
        ))

    tool = _agg([f.tool_add_m for f in per_frame])
    tip = _agg([f.tip_error_m for f in per_frame])
    direction = _agg([f.direction_error_deg for f in per_frame])
    hand = _agg([f.hand_add_m for f in per_frame])
    report = MetricReport(
        tool_add_mm=(tool[0] * 1000.0, tool[1] * 1000.0),
        tip_error_mm=(tip[0] * 1000.0, tip[1] * 1000.0),
        direction_error_deg=direction,
        hand_add_mm=(hand[0] * 1000.0, hand[1] * 1000.0),
        n_frames=len(common),
    )
    return EvaluationResult(
        report=report,
        per_frame=per_frame,
        missing_in_pred=missing_in_pred,
        missing_in_gt=missing_in_gt,
    )
