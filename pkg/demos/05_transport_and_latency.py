"""The datagram wire protocol and latency trace bookkeeping.

Frames chunk into <=1200-byte payloads; the reassembler survives loss,
duplication, and reordering, always preferring the newest complete frame.
Pose replies ride a fixed 24-byte core. Latency traces follow each frame
through nine checkpoints.
"""

import numpy as np

from posestream.geometry import Pose6DoF
from posestream.latency import (
    STAGES,
    LatencyTrace,
    latency_report,
    record_stage,
)
from posestream.preprocess import FrameYUV420
from posestream.transport import (
    Reassembler,
    chunk_frame,
    decode_pose_message,
    encode_pose_message,
    serialize_frame,
)

rng = np.random.default_rng(9)

frame = FrameYUV420(
    width=96, height=96,
    y=rng.integers(0, 256, (96, 96), dtype=np.uint8),
    u=rng.integers(0, 256, (48, 48), dtype=np.uint8),
    v=rng.integers(0, 256, (48, 48), dtype=np.uint8),
    frame_id=7, timestamp_us=1_000,
)
packets = chunk_frame(frame)
print("frame of", len(serialize_frame(frame)), "bytes ->", len(packets), "packets")
print("header layout: 19-byte header + u16 payload length, magic eb90, version 1")

# Deliver shuffled with a duplicate; the frame still comes out byte-exact.
wire = [p.pack() for p in packets]
order = rng.permutation(len(wire)).tolist() + [0]
r = Reassembler()
completed = []
for i in order:
    completed += r.feed(wire[i])
print("reassembled:", len(completed), "frame(s); byte-exact:",
      completed[0].blob == serialize_frame(frame),
      "; duplicates seen:", r.duplicate_packets)

# Latest-wins: an incomplete older frame dies when a newer one completes.
r = Reassembler()
old = chunk_frame(FrameYUV420(width=96, height=96, y=frame.y, u=frame.u, v=frame.v,
                              frame_id=8))
new = chunk_frame(FrameYUV420(width=96, height=96, y=frame.y, u=frame.u, v=frame.v,
                              frame_id=9))
for pkt in old[:-1]:
    r.feed(pkt.pack())
emitted = []
for pkt in new:
    emitted += r.feed(pkt.pack())
print("newer frame completes ->", [f.frame_id for f in emitted],
      "; discarded incomplete:", r.discarded_frames)

# The 24-byte pose message.
pose = Pose6DoF(rotation=np.float32([0.3, -0.5, 0.1]), translation=np.float32([0.02, 0.01, 0.74]))
wire = encode_pose_message(pose)
print("\npose message:", wire.hex(), f"({len(wire)} bytes)")
print("decodes to rotation", decode_pose_message(wire).rotation,
      "translation", decode_pose_message(wire).translation)

# A synthetic nine-stage trace and its report.
trace = LatencyTrace(frame_id=0)
t = 0
spans_us = [2_000, 160_000, 6_000, 12_000, 1_000, 500, 8_000, 16_000]
trace = record_stage(trace, STAGES[0], t)
for stage, span in zip(STAGES[1:], spans_us):
    t += span
    trace = record_stage(trace, stage, t)
print("\n" + latency_report([trace]).format_text())
