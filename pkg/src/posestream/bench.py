"""Loopback latency benchmark and pipeline throughput measurement.

Runs a real server and client in one process over localhost UDP, merges
their per-frame traces, and reports the stage breakdown.  Injection knobs
(transmission delay, datagram loss, inference delay, render delay) shape
the run to match a deployment's latency budget.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .client import ClientConfig, StreamClient
from .decode import decode_heads, encode_ground_truth, filter_detections
from .errors import DomainError
from .geometry import CameraIntrinsics, ModelPoints
from .latency import LatencyReport, LatencyTrace, latency_report, merge_traces, write_traces
from .metrics import add_tool
from .preprocess import NETWORK_INPUT_SIZE, preprocess
from .server import PoseServer, ServerConfig
from .synthetic import PoseScript, SyntheticFrameSource, make_default_tool_model

__all__ = [
    "BenchConfig",
    "BenchResult",
    "bench_latency",
    "default_capture_intrinsics",
    "measure_pipeline_throughput",
]


def default_capture_intrinsics(width: int = 896, height: int = 504) -> CameraIntrinsics:
    """Plausible egocentric-camera intrinsics for synthetic sessions."""
    f = 0.7 * width
    return CameraIntrinsics(fx=f, fy=f, px=width / 2.0, py=height / 2.0,
                            width=width, height=height)


@dataclass
class BenchConfig:
    frames: int = 100
    fps: float = 30.0
    width: int = 896
    height: int = 504
    seed: int = 0
    loss_rate: float = 0.0
    send_delay_ms: float = 0.0
    infer_delay_ms: float = 0.0
    render_delay_ms: float = 0.0
    tz_range: tuple[float, float] = (0.3, 1.5)
    intrinsics: CameraIntrinsics | None = None
    model: ModelPoints | None = None
    reply_transport: str = "udp"
    trace_out: str | None = None


@dataclass
class BenchResult:
    report: LatencyReport
    pose_errors_m: dict[int, float]
    frames_requested: int
    frames_completed: int
    warnings: list[str] = field(default_factory=list)

    @property
    def max_pose_error_m(self) -> float:
        return max(self.pose_errors_m.values()) if self.pose_errors_m else float("nan")


def bench_latency(config: BenchConfig) -> BenchResult:
    """Run a loopback session and report per-stage latency plus pose errors."""
    K = config.intrinsics or default_capture_intrinsics(config.width, config.height)
    model = config.model or make_default_tool_model()
    server = PoseServer(ServerConfig(
        intrinsics=K,
        backend="synthetic",
        script_seed=config.seed,
        script_tz_range=config.tz_range,
        infer_delay_ms=config.infer_delay_ms,
        reply_transport=config.reply_transport,
    ))
    server.start()
    try:
        host, port = server.address
        client = StreamClient(ClientConfig(
            server_host=host,
            server_port=port,
            intrinsics=K,
            fps=config.fps,
            frames=config.frames,
            source="synthetic",
            script_seed=config.seed,
            script_tz_range=config.tz_range,
            send_delay_ms=config.send_delay_ms,
            loss_rate=config.loss_rate,
            render_delay_ms=config.render_delay_ms,
            reply_transport=config.reply_transport,
            first_reply_timeout_s=None if config.loss_rate > 0 else 10.0,
        ))
        result = client.run()
    finally:
        server.stop()

    server_traces = {t.frame_id: t for t in server.traces}
    merged: list[LatencyTrace] = []
    for trace in result.traces:
        other = server_traces.get(trace.frame_id)
        merged.append(merge_traces(trace, other) if other is not None else trace)
    if config.trace_out:
        write_traces(merged, config.trace_out)

    complete = [t for t in merged if t.complete()]
    if not complete:
        raise DomainError("no frame completed a full round trip; nothing to report")
    report = latency_report(merged)

    pose_errors = {}
    for fid, pose in result.received.items():
        gt_pose, _ = result.ground_truth[fid]
        pose_errors[fid] = add_tool(gt_pose, pose, model)

    warnings = []
    if len(complete) < config.frames:
        warnings.append(
            f"only {len(complete)} of {config.frames} frames completed a round trip; "
            "report covers the completed subset"
        )
    return BenchResult(
        report=report,
        pose_errors_m=pose_errors,
        frames_requested=config.frames,
        frames_completed=len(complete),
        warnings=warnings,
    )


def measure_pipeline_throughput(
    n_frames: int = 60,
    width: int = 896,
    height: int = 504,
    seed: int = 0,
) -> float:
    """Frames/second through preprocess + decode + filter, inference excluded.

    The raw heads are encoded once outside the timed loop; the loop runs the
    exact per-frame compute path the server executes around the backend call.
    """
    from .anchors import generate_anchors
    from .geometry import rescale_intrinsics

    K = default_capture_intrinsics(width, height)
    grid = generate_anchors(NETWORK_INPUT_SIZE)
    k_in = rescale_intrinsics(K, NETWORK_INPUT_SIZE, NETWORK_INPUT_SIZE)
    script = PoseScript(seed, K)
    source = SyntheticFrameSource(script, model=make_default_tool_model(seed))
    frames = [source.frame(i, 0) for i in range(min(8, n_frames))]
    pose, hand = script.sample(0)
    raw = encode_ground_truth(pose, hand, grid, k_in)

    start = time.perf_counter()
    for i in range(n_frames):
        tensor, k_net = preprocess(frames[i % len(frames)], K)
        detection = filter_detections(decode_heads(raw, grid, k_net))
        assert detection is not None
    elapsed = time.perf_counter() - start
    return n_frames / elapsed
