"""Marker-less 6DoF tool and hand pose tracking over a low-latency streaming link.

Library layout:

- geometry:    rotation representations, pinhole projection, translation recovery
- losses:      rotation / translation / hand training losses with gradients
- metrics:     ADD, tip and direction errors, frame-set aggregation
- anchors:     anchor grid generation
- decode:      raw network heads -> detections, NMS, ground-truth encoding
- preprocess:  YUV420 -> RGB -> resized, normalized input tensor
- transport:   datagram packetization, reassembly, pose wire messages
- latency:     pixel-to-photon traces and stage-breakdown reports
- backends:    synthetic oracle backend and TorchScript graph execution
- server / client / bench / evaluate: the runnable pipeline
"""

from .anchors import AnchorConfig, AnchorGrid, generate_anchors
from .decode import (
    Detection,
    DetectionSet,
    RawHeads,
    decode_heads,
    encode_ground_truth,
    filter_detections,
    nms,
)
from .geometry import (
    CameraIntrinsics,
    ModelPoints,
    Pose6DoF,
    axis_angle_to_matrix,
    load_intrinsics,
    load_model_points,
    matrix_to_axis_angle,
    project_point,
    recover_translation,
    rescale_intrinsics,
    transform_points,
)
from .latency import LatencyTrace, latency_report, record_stage
from .losses import (
    finite_diff_gradient,
    hand_loss,
    rotation_loss,
    smooth_l1,
    translation_loss,
)
from .metrics import (
    MetricReport,
    add_hand,
    add_tool,
    aggregate_metrics,
    drill_direction_error,
    drill_tip_error,
)
from .preprocess import (
    FrameYUV420,
    bilinear_resize,
    normalize,
    preprocess,
    yuv420_to_rgb,
)
from .transport import (
    FramePacket,
    Reassembler,
    chunk_frame,
    decode_pose_message,
    encode_pose_message,
)

__version__ = "0.1.0"
