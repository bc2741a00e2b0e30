"""Simulated HMD client: paces frames to the server, collects pose replies.

The client stamps each frame at capture, packetizes it, and streams the
datagrams; a receive loop applies returned poses to a latest-value slot the
way a render thread would consume them.  Optional injection hooks (send
delay, datagram loss, render delay) exist for latency benchmarking.
"""

from __future__ import annotations

import logging
import queue
import socket
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, ProtocolError
from .geometry import (
    CameraIntrinsics,
    ModelPoints,
    Pose6DoF,
    project_points,
    transform_points,
)
from .latency import LatencyTrace, now_us, write_traces
from .preprocess import FrameYUV420, read_frame_file, yuv420_to_rgb
from .records import PoseRecord, write_pose_records
from .synthetic import PoseScript, SyntheticFrameSource, draw_points
from .transport import (
    POSE_REPLY_LEN,
    chunk_frame,
    decode_pose_reply,
    size_datagram_socket,
)

logger = logging.getLogger(__name__)

__all__ = ["ClientConfig", "ClientResult", "StreamClient", "DatasetFrameSource", "run_client"]


@dataclass
class ClientConfig:
    server_host: str
    server_port: int
    intrinsics: CameraIntrinsics
    fps: float = 30.0
    frames: int = 100
    source: str = "synthetic"               # "synthetic" or a dataset directory
    script_seed: int = 0
    script_tz_range: tuple[float, float] = (0.3, 1.5)
    model: ModelPoints | None = None        # used for synthetic content + overlays
    overlay_dir: str | None = None
    pred_out: str | None = None
    gt_out: str | None = None
    trace_out: str | None = None
    send_delay_ms: float = 0.0
    loss_rate: float = 0.0
    loss_seed: int = 1
    render_delay_ms: float = 0.0
    reply_transport: str = "udp"
    first_reply_timeout_s: float | None = 5.0
    linger_s: float = 3.0


@dataclass
class ClientResult:
    frames_sent: int = 0
    packets_sent: int = 0
    packets_dropped: int = 0
    received: dict[int, Pose6DoF] = field(default_factory=dict)
    ground_truth: dict[int, tuple[Pose6DoF, np.ndarray]] = field(default_factory=dict)
    traces: list[LatencyTrace] = field(default_factory=list)
    elapsed_s: float = 0.0


class DatasetFrameSource:
    """Streams I420 fixture frames (blob + JSON sidecar) from a directory."""

    def __init__(self, directory):
        self.paths = sorted(Path(directory).glob("*.i420"))
        if not self.paths:
            raise ConfigError(f"no .i420 frames found in {directory}")

    def __len__(self) -> int:
        return len(self.paths)

    def frame(self, index: int, timestamp_us: int = 0) -> FrameYUV420:
        f = read_frame_file(self.paths[index % len(self.paths)])
        return FrameYUV420(
            width=f.width, height=f.height, y=f.y, u=f.u, v=f.v,
            frame_id=f.frame_id, timestamp_us=timestamp_us,
        )


class _Sender:
    """Datagram sender with optional fixed delay and i.i.d. loss injection.

    Delayed sends are scheduled per frame burst, not per datagram: one sleep
    plus a tight sendto loop keeps the release thread ahead of the pacing
    thread even at hundreds of packets per frame.
    """

    def __init__(self, sock, addr, delay_ms: float, loss_rate: float, loss_seed: int):
        self.sock = sock
        self.addr = addr
        self.delay_s = max(0.0, delay_ms / 1000.0)
        self.loss_rate = loss_rate
        self.rng = np.random.default_rng(loss_seed)
        self.sent = 0
        self.dropped = 0
        self._queue: queue.Queue | None = None
        self._thread: threading.Thread | None = None
        if self.delay_s > 0:
            self._queue = queue.Queue()
            self._thread = threading.Thread(target=self._drain, daemon=True)
            self._thread.start()

    def send_burst(self, datagrams: list[bytes]) -> None:
        if self.loss_rate > 0:
            keep = self.rng.random(len(datagrams)) >= self.loss_rate
            self.dropped += int(len(datagrams) - keep.sum())
            datagrams = [d for d, k in zip(datagrams, keep) if k]
            if not datagrams:
                return
        if self._queue is None:
            self._transmit(datagrams)
        else:
            self._queue.put((time.monotonic() + self.delay_s, datagrams))

    def _transmit(self, datagrams: list[bytes]) -> None:
        try:
            for d in datagrams:
                self.sock.sendto(d, self.addr)
            self.sent += len(datagrams)
        except OSError as e:
            logger.warning("send failed: %s", e)

    def _drain(self) -> None:
        while True:
            item = self._queue.get()
            if item is None:
                return
            due, datagrams = item
            delay = due - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            self._transmit(datagrams)

    def close(self) -> None:
        if self._queue is not None:
            self._queue.put(None)
            self._thread.join(timeout=10.0)


class StreamClient:
    """Paced frame streamer + pose receiver; run() drives a full session."""

    def __init__(self, config: ClientConfig):
        if config.fps <= 0:
            raise ConfigError(f"fps must be positive, got {config.fps}")
        if not 0.0 <= config.loss_rate < 1.0:
            raise ConfigError(f"loss rate must be in [0, 1), got {config.loss_rate}")
        if config.reply_transport not in ("udp", "tcp"):
            raise ConfigError(f"unknown reply transport {config.reply_transport!r}")
        self.config = config
        if config.source == "synthetic":
            script = PoseScript(
                config.script_seed, config.intrinsics, tz_range=config.script_tz_range
            )
            self.script: PoseScript | None = script
            self.source = SyntheticFrameSource(script, model=config.model)
        else:
            self.script = None
            self.source = DatasetFrameSource(config.source)
        self.result = ClientResult()
        self._client_stages: dict[int, dict[str, int]] = {}
        self._stages_lock = threading.Lock()
        self._first_reply = threading.Event()
        self._stop = threading.Event()

    # -- receive side ------------------------------------------------------

    def _handle_reply(self, data: bytes) -> None:
        try:
            frame_id, _server_ts, pose = decode_pose_reply(data)
        except ProtocolError as e:
            logger.warning("bad pose reply: %s", e)
            return
        ts = now_us()
        self._first_reply.set()
        if self.config.render_delay_ms > 0:
            time.sleep(self.config.render_delay_ms / 1000.0)
        done = now_us()
        with self._stages_lock:
            stages = self._client_stages.setdefault(frame_id, {})
            # Duplicate replies keep the first arrival.
            stages.setdefault("pose_received", ts)
            stages.setdefault("render_done", done)
        self.result.received.setdefault(frame_id, pose)
        if self.config.overlay_dir:
            try:
                self._write_overlay(frame_id, pose)
            except Exception as e:   # overlay is best-effort diagnostics
                logger.warning("overlay for frame %d failed: %s", frame_id, e)

    def _recv_loop_udp(self, sock) -> None:
        while not self._stop.is_set():
            try:
                data, _ = sock.recvfrom(65535)
            except socket.timeout:
                continue
            except OSError:
                break
            self._handle_reply(data)

    def _recv_loop_tcp(self, sock) -> None:
        buf = b""
        while not self._stop.is_set():
            try:
                chunk = sock.recv(4096)
            except socket.timeout:
                continue
            except OSError:
                break
            if not chunk:
                break
            buf += chunk
            while len(buf) >= POSE_REPLY_LEN:
                self._handle_reply(buf[:POSE_REPLY_LEN])
                buf = buf[POSE_REPLY_LEN:]

    # -- overlays ----------------------------------------------------------

    def _write_overlay(self, frame_id: int, pose_pred: Pose6DoF) -> None:
        if self.config.model is None:
            raise ConfigError("overlay output needs model metadata")
        from PIL import Image

        K = self.config.intrinsics
        rgb = yuv420_to_rgb(self.source.frame(frame_id, 0))
        if frame_id in self.result.ground_truth:
            gt_pose, _ = self.result.ground_truth[frame_id]
            gt_px = project_points(K, transform_points(gt_pose, self.config.model))
            draw_points(rgb, gt_px, color=(60, 60, 230), radius=2)
        pred_px = project_points(K, transform_points(pose_pred, self.config.model))
        draw_points(rgb, pred_px, color=(230, 50, 50), radius=1)
        out = Path(self.config.overlay_dir)
        out.mkdir(parents=True, exist_ok=True)
        Image.fromarray(rgb).save(out / f"frame_{frame_id:06d}.png")

    # -- session -----------------------------------------------------------

    def run(self) -> ClientResult:
        cfg = self.config
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sock.settimeout(0.2)
        size_datagram_socket(sock)
        sock.bind(("0.0.0.0", 0))
        recv_sock = sock
        if cfg.reply_transport == "tcp":
            recv_sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            try:
                recv_sock.connect((cfg.server_host, cfg.server_port))
            except OSError as e:
                sock.close()
                recv_sock.close()
                raise ConfigError(
                    f"cannot open pose return channel to "
                    f"{cfg.server_host}:{cfg.server_port}: {e}"
                ) from e
            recv_sock.settimeout(0.2)
        recv_target = self._recv_loop_udp if cfg.reply_transport == "udp" else self._recv_loop_tcp
        recv_thread = threading.Thread(target=recv_target, args=(recv_sock,), daemon=True)
        recv_thread.start()
        sender = _Sender(
            sock, (cfg.server_host, cfg.server_port),
            cfg.send_delay_ms, cfg.loss_rate, cfg.loss_seed,
        )

        # Warm the capture and packetization paths off the clock.
        chunk_frame(self.source.frame(0, 0))

        start = time.monotonic()
        try:
            for k in range(cfg.frames):
                target = start + k / cfg.fps
                delay = target - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                # Stamp capture when the frame is ready: generation simulates
                # the camera, so its cost stays off the latency path.
                frame = self.source.frame(k, 0)
                capture_ts = now_us()
                frame = replace(frame, timestamp_us=capture_ts)
                if self.script is not None:
                    self.result.ground_truth[frame.frame_id] = self.script.sample(frame.frame_id)
                datagrams = [pkt.pack() for pkt in chunk_frame(frame)]
                with self._stages_lock:
                    self._client_stages[frame.frame_id] = {
                        "capture": capture_ts,
                        "first_packet_sent": now_us(),
                    }
                sender.send_burst(datagrams)
                self.result.frames_sent += 1
                if (
                    cfg.first_reply_timeout_s is not None
                    and not self._first_reply.is_set()
                    and time.monotonic() - start > cfg.first_reply_timeout_s
                ):
                    raise RuntimeError(
                        f"no pose reply within {cfg.first_reply_timeout_s:.1f}s "
                        f"({self.result.frames_sent} frames sent); server unreachable?"
                    )
            # Allow in-flight frames and replies to land.
            deadline = time.monotonic() + cfg.linger_s + cfg.send_delay_ms / 1000.0
            while time.monotonic() < deadline:
                if len(self.result.received) >= self.result.frames_sent:
                    break
                time.sleep(0.05)
        finally:
            self._stop.set()
            sender.close()
            recv_thread.join(timeout=5.0)
            sock.close()
            if recv_sock is not sock:
                recv_sock.close()
            self.result.elapsed_s = time.monotonic() - start
            self.result.packets_sent = sender.sent
            self.result.packets_dropped = sender.dropped
            self._finalize()
        return self.result

    def _finalize(self) -> None:
        cfg = self.config
        with self._stages_lock:
            for frame_id, stages in sorted(self._client_stages.items()):
                self.result.traces.append(LatencyTrace(frame_id=frame_id, stages=dict(stages)))
        if cfg.trace_out:
            write_traces(self.result.traces, cfg.trace_out)
        if cfg.pred_out:
            write_pose_records(
                [PoseRecord(fid, pose) for fid, pose in sorted(self.result.received.items())],
                cfg.pred_out,
            )
        if cfg.gt_out and self.result.ground_truth:
            write_pose_records(
                [
                    PoseRecord(fid, pose, hand)
                    for fid, (pose, hand) in sorted(self.result.ground_truth.items())
                ],
                cfg.gt_out,
            )


def run_client(config: ClientConfig) -> ClientResult:
    """Run a full streaming session; blocking entry point used by the CLI."""
    return StreamClient(config).run()
