"""Pixel-to-photon latency traces and stage-breakdown reporting.

A trace follows one frame through nine checkpoints from camera capture to
the rendered pose update.  All timestamps are microseconds from the
system-wide monotonic clock, so client and server traces recorded on the
same host merge cleanly.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, InstrumentationError

__all__ = [
    "STAGES",
    "SPANS",
    "now_us",
    "LatencyTrace",
    "record_stage",
    "merge_traces",
    "LatencyReport",
    "latency_report",
    "write_traces",
    "read_traces",
]

STAGES = (
    "capture",
    "first_packet_sent",
    "frame_complete",
    "preprocess_done",
    "inference_done",
    "filter_done",
    "pose_sent",
    "pose_received",
    "render_done",
)
_STAGE_ORDER = {name: i for i, name in enumerate(STAGES)}

# Consecutive spans of the critical path, named after what happens inside.
SPANS = (
    ("capture_to_send", "capture", "first_packet_sent"),
    ("uplink", "first_packet_sent", "frame_complete"),
    ("preprocess", "frame_complete", "preprocess_done"),
    ("inference", "preprocess_done", "inference_done"),
    ("filtering", "inference_done", "filter_done"),
    ("dispatch", "filter_done", "pose_sent"),
    ("downlink", "pose_sent", "pose_received"),
    ("render", "pose_received", "render_done"),
)
# Aggregate matching the conventional "video frame transmission" figure.
_TRANSMISSION = ("transmission", "capture", "frame_complete")


def now_us() -> int:
    """Monotonic microseconds; comparable across processes on one host."""
    return time.monotonic_ns() // 1000


@dataclass(frozen=True)
class LatencyTrace:
    """Per-frame stage timestamps in microseconds."""

    frame_id: int
    stages: dict = field(default_factory=dict)

    def has(self, stage: str) -> bool:
        return stage in self.stages

    def complete(self) -> bool:
        return len(self.stages) == len(STAGES)

    def pixel_to_photon_us(self) -> int:
        if not self.has("capture") or not self.has("render_done"):
            raise InstrumentationError("trace missing capture or render_done")
        return self.stages["render_done"] - self.stages["capture"]

    def span_us(self, start_stage: str, end_stage: str) -> int:
        return self.stages[end_stage] - self.stages[start_stage]


def record_stage(trace: LatencyTrace, stage: str, timestamp_us: int) -> LatencyTrace:
    """Return a new trace with the stage recorded; enforces order consistency.

    A stage may be recorded once; its timestamp must not precede any
    earlier-ordered recorded stage nor follow any later-ordered one.
    """
    if stage not in _STAGE_ORDER:
        raise ValueError(f"unknown stage {stage!r}; expected one of {STAGES}")
    if stage in trace.stages:
        raise InstrumentationError(f"stage {stage!r} already recorded for frame {trace.frame_id}")
    order = _STAGE_ORDER[stage]
    for other, ts in trace.stages.items():
        other_order = _STAGE_ORDER[other]
        if other_order < order and ts > timestamp_us:
            raise InstrumentationError(
                f"stage {stage!r} at {timestamp_us} precedes earlier stage {other!r} at {ts}"
            )
        if other_order > order and ts < timestamp_us:
            raise InstrumentationError(
                f"stage {stage!r} at {timestamp_us} follows later stage {other!r} at {ts}"
            )
    stages = dict(trace.stages)
    stages[stage] = int(timestamp_us)
    return LatencyTrace(frame_id=trace.frame_id, stages=stages)


def merge_traces(a: LatencyTrace, b: LatencyTrace) -> LatencyTrace:
    """Combine client-side and server-side recordings of the same frame."""
    if a.frame_id != b.frame_id:
        raise InstrumentationError(f"cannot merge traces for frames {a.frame_id} and {b.frame_id}")
    merged = a
    for stage in STAGES:
        if b.has(stage):
            if merged.has(stage):
                if merged.stages[stage] != b.stages[stage]:
                    raise InstrumentationError(
                        f"conflicting timestamps for stage {stage!r} of frame {a.frame_id}"
                    )
                continue
            merged = record_stage(merged, stage, b.stages[stage])
    return merged


@dataclass(frozen=True)
class LatencyReport:
    """Mean/std per critical-path span plus pixel-to-photon and update rate."""

    spans_ms: dict                       # name -> (mean, std)
    pixel_to_photon_ms: tuple[float, float]
    fps: float
    n_traces: int
    n_incomplete: int

    def format_text(self) -> str:
        lines = [f"{'Span':<16}  Mean +/- Std (ms)"]
        for name, _, _ in SPANS + (_TRANSMISSION,):
            mean, std = self.spans_ms[name]
            lines.append(f"{name:<16}  {mean:8.2f} +/- {std:.2f}")
        mean, std = self.pixel_to_photon_ms
        lines.append(f"{'pixel_to_photon':<16}  {mean:8.2f} +/- {std:.2f}")
        lines.append(f"pose update rate  {self.fps:.2f} FPS")
        lines.append(f"n = {self.n_traces} complete traces"
                     + (f" ({self.n_incomplete} incomplete excluded)" if self.n_incomplete else ""))
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "spans_ms": {k: list(v) for k, v in self.spans_ms.items()},
            "pixel_to_photon_ms": list(self.pixel_to_photon_ms),
            "fps": self.fps,
            "n_traces": self.n_traces,
            "n_incomplete": self.n_incomplete,
        }


def latency_report(traces: list[LatencyTrace]) -> LatencyReport:
    """Aggregate complete traces into a stage breakdown (population std, ms)."""
    complete = [t for t in traces if t.complete()]
    if not complete:
        raise DomainError("latency report needs at least one complete trace")
    spans_ms = {}
    for name, start, end in SPANS + (_TRANSMISSION,):
        vals = np.array([t.span_us(start, end) for t in complete], dtype=np.float64) / 1000.0
        spans_ms[name] = (float(vals.mean()), float(vals.std()))
    p2p = np.array([t.pixel_to_photon_us() for t in complete], dtype=np.float64) / 1000.0
    mean_p2p = float(p2p.mean())
    return LatencyReport(
        spans_ms=spans_ms,
        pixel_to_photon_ms=(mean_p2p, float(p2p.std())),
        fps=1000.0 / mean_p2p if mean_p2p > 0 else float("inf"),
        n_traces=len(complete),
        n_incomplete=len(traces) - len(complete),
    )


def write_traces(traces: list[LatencyTrace], path) -> None:
    """Trace dump: JSON lines, one trace per frame."""
    with open(path, "w") as fh:
        for t in traces:
            fh.write(json.dumps({"frame_id": t.frame_id, "stages": t.stages}) + "\n")


def read_traces(path) -> list[LatencyTrace]:
    traces = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        raw = json.loads(line)
        traces.append(LatencyTrace(
            frame_id=int(raw["frame_id"]),
            stages={k: int(v) for k, v in raw["stages"].items()},
        ))
    return traces
