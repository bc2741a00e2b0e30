"""Streaming pose server: receive frames over UDP, infer, return poses.

Pipeline stages (receive/reassemble, preprocess+infer+decode, reply) are
decoupled by a bounded drop-oldest queue so a slow consumer never blocks
frame intake; stale and incomplete frames are counted and skipped.
"""

from __future__ import annotations

import logging
import socket
import threading
import time
from collections import deque
from dataclasses import dataclass, field

from .anchors import AnchorConfig, generate_anchors
from .backends import GraphBackend, SyntheticBackend
from .decode import decode_heads, filter_detections
from .errors import (
    BackendError,
    ConfigError,
    EncodeError,
    InstrumentationError,
    ProtocolError,
    StructuralError,
)
from .geometry import CameraIntrinsics, ModelPoints, rescale_intrinsics
from .latency import LatencyTrace, now_us, record_stage, write_traces
from .preprocess import (
    DEFAULT_NORM_MEAN,
    DEFAULT_NORM_STD,
    NETWORK_INPUT_SIZE,
    FrameYUV420,
    preprocess,
)
from .records import PoseRecord, write_pose_records
from .synthetic import PoseScript
from .transport import (
    Reassembler,
    deserialize_frame,
    encode_pose_reply,
    size_datagram_socket,
)

logger = logging.getLogger(__name__)

__all__ = ["ServerConfig", "ServerStats", "PoseServer", "run_server"]


@dataclass
class ServerConfig:
    intrinsics: CameraIntrinsics
    host: str = "127.0.0.1"
    port: int = 0
    backend: str = "synthetic"
    graph_file: str | None = None
    anchor_config: AnchorConfig = field(default_factory=AnchorConfig)
    script_seed: int = 0
    script_tz_range: tuple[float, float] = (0.3, 1.5)
    score_threshold: float = 0.5
    iou_threshold: float = 0.5
    full_range: bool = True
    norm_mean: tuple[float, float, float] = DEFAULT_NORM_MEAN
    norm_std: tuple[float, float, float] = DEFAULT_NORM_STD
    infer_delay_ms: float = 0.0
    queue_size: int = 8
    reply_transport: str = "udp"
    trace_out: str | None = None
    pred_out: str | None = None
    model_meta: ModelPoints | None = None   # accepted and validated; serving does not use it


@dataclass
class ServerStats:
    frames_completed: int = 0
    frames_processed: int = 0
    frame_errors: int = 0
    no_detection: int = 0
    queue_dropped: int = 0
    poses_sent: int = 0


class _DropOldestQueue:
    """Bounded FIFO that drops the oldest entry instead of blocking the producer."""

    def __init__(self, maxlen: int):
        self._items = deque()
        self._maxlen = maxlen
        self._cond = threading.Condition()
        self.dropped = 0

    def put(self, item) -> None:
        with self._cond:
            if len(self._items) >= self._maxlen:
                self._items.popleft()
                self.dropped += 1
            self._items.append(item)
            self._cond.notify()

    def get(self, timeout: float):
        with self._cond:
            if not self._items:
                self._cond.wait(timeout)
            if not self._items:
                return None
            return self._items.popleft()


class PoseServer:
    """Long-running frame-to-pose loop; start()/stop() or serve_forever()."""

    def __init__(self, config: ServerConfig):
        self.config = config
        if config.reply_transport not in ("udp", "tcp"):
            raise ConfigError(f"unknown reply transport {config.reply_transport!r}")
        self.grid = generate_anchors(NETWORK_INPUT_SIZE, config.anchor_config)
        self.input_intrinsics = rescale_intrinsics(
            config.intrinsics, NETWORK_INPUT_SIZE, NETWORK_INPUT_SIZE
        )
        if config.backend == "synthetic":
            script = PoseScript(
                config.script_seed, config.intrinsics, tz_range=config.script_tz_range
            )
            self.backend = SyntheticBackend(script, self.grid, self.input_intrinsics)
        elif config.backend == "graph":
            if not config.graph_file:
                raise ConfigError("graph backend needs a graph file")
            self.backend = GraphBackend(config.graph_file, self.grid)
        else:
            raise ConfigError(f"unknown backend {config.backend!r}")

        self.reassembler = Reassembler()
        self.stats = ServerStats()
        self.traces: list[LatencyTrace] = []
        self.predictions: list[PoseRecord] = []
        self._queue = _DropOldestQueue(config.queue_size)
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._sock: socket.socket | None = None
        self._tcp_listener: socket.socket | None = None
        self._tcp_conns: list[socket.socket] = []
        self._tcp_lock = threading.Lock()
        self.address: tuple[str, int] | None = None

    # -- lifecycle ---------------------------------------------------------

    def _warmup(self) -> None:
        # Prime the numeric paths before traffic arrives so the first frames
        # are not measurably slower than steady state.
        import numpy as np

        cfg = self.config
        gray = FrameYUV420(
            width=cfg.intrinsics.width, height=cfg.intrinsics.height,
            y=np.full((cfg.intrinsics.height, cfg.intrinsics.width), 128, np.uint8),
            u=np.full((cfg.intrinsics.height // 2, cfg.intrinsics.width // 2), 128, np.uint8),
            v=np.full((cfg.intrinsics.height // 2, cfg.intrinsics.width // 2), 128, np.uint8),
        )
        tensor, k_in = preprocess(
            gray, cfg.intrinsics, full_range=cfg.full_range,
            mean=cfg.norm_mean, std=cfg.norm_std,
        )
        try:
            raw = self.backend.infer(tensor, 0)
            filter_detections(
                decode_heads(raw, self.grid, k_in),
                score_threshold=cfg.score_threshold,
                iou_threshold=cfg.iou_threshold,
            )
        except (EncodeError, BackendError):
            pass

    def start(self) -> None:
        cfg = self.config
        self._warmup()
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        size_datagram_socket(self._sock)
        try:
            self._sock.bind((cfg.host, cfg.port))
        except OSError as e:
            self._sock.close()
            raise ConfigError(f"cannot bind {cfg.host}:{cfg.port}: {e}") from e
        self._sock.settimeout(0.2)
        self.address = self._sock.getsockname()
        if cfg.reply_transport == "tcp":
            self._tcp_listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            self._tcp_listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            self._tcp_listener.bind((cfg.host, self.address[1]))
            self._tcp_listener.listen(4)
            self._tcp_listener.settimeout(0.2)
            self._threads.append(threading.Thread(target=self._accept_loop, daemon=True))
        self._threads.append(threading.Thread(target=self._recv_loop, daemon=True))
        self._threads.append(threading.Thread(target=self._work_loop, daemon=True))
        for t in self._threads:
            t.start()

    def stop(self) -> None:
        self._stop.set()
        for t in self._threads:
            t.join(timeout=5.0)
        self._threads.clear()
        if self._sock is not None:
            self._sock.close()
            self._sock = None
        if self._tcp_listener is not None:
            self._tcp_listener.close()
            self._tcp_listener = None
        with self._tcp_lock:
            for conn in self._tcp_conns:
                conn.close()
            self._tcp_conns.clear()
        if self.config.trace_out:
            write_traces(self.traces, self.config.trace_out)
        if self.config.pred_out:
            write_pose_records(self.predictions, self.config.pred_out)

    def serve_forever(self) -> None:
        self.start()
        logger.info("serving on %s:%d", *self.address)
        try:
            while not self._stop.is_set():
                time.sleep(0.2)
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()

    # -- stage loops -------------------------------------------------------

    def _recv_loop(self) -> None:
        while not self._stop.is_set():
            try:
                data, addr = self._sock.recvfrom(65535)
            except socket.timeout:
                continue
            except OSError:
                break
            for completed in self.reassembler.feed(data):
                self.stats.frames_completed += 1
                self._queue.put((completed, addr, now_us()))
        self.stats.queue_dropped = self._queue.dropped

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._tcp_listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            with self._tcp_lock:
                self._tcp_conns.append(conn)

    def _work_loop(self) -> None:
        cfg = self.config
        while not self._stop.is_set():
            item = self._queue.get(timeout=0.2)
            if item is None:
                continue
            completed, addr, complete_ts = item
            trace = LatencyTrace(frame_id=completed.frame_id)
            trace = self._record(trace, "capture", completed.capture_timestamp_us)
            trace = self._record(trace, "frame_complete", complete_ts)
            try:
                frame = deserialize_frame(
                    completed.blob, completed.frame_id, completed.capture_timestamp_us
                )
                tensor, k_in = preprocess(
                    frame, cfg.intrinsics,
                    full_range=cfg.full_range, mean=cfg.norm_mean, std=cfg.norm_std,
                )
                trace = self._record(trace, "preprocess_done", now_us())
                if cfg.infer_delay_ms > 0:
                    time.sleep(cfg.infer_delay_ms / 1000.0)
                raw = self.backend.infer(tensor, completed.frame_id)
                trace = self._record(trace, "inference_done", now_us())
                detection = filter_detections(
                    decode_heads(raw, self.grid, k_in),
                    score_threshold=cfg.score_threshold,
                    iou_threshold=cfg.iou_threshold,
                )
                trace = self._record(trace, "filter_done", now_us())
            except (ProtocolError, ConfigError, StructuralError, EncodeError, BackendError) as e:
                logger.warning("frame %d dropped: %s", completed.frame_id, e)
                self.stats.frame_errors += 1
                continue
            self.stats.frames_processed += 1
            if detection is None:
                self.stats.no_detection += 1
                self.traces.append(trace)
                continue
            # Stamp before transmitting: the receiver's clock must never see
            # the pose earlier than the recorded send time.
            send_ts = now_us()
            reply = encode_pose_reply(completed.frame_id, send_ts, detection.pose)
            trace = self._record(trace, "pose_sent", send_ts)
            self._send_reply(reply, addr)
            self.stats.poses_sent += 1
            self.traces.append(trace)
            self.predictions.append(
                PoseRecord(completed.frame_id, detection.pose, detection.hand)
            )

    def _send_reply(self, reply: bytes, addr) -> None:
        if self.config.reply_transport == "udp":
            try:
                self._sock.sendto(reply, addr)
            except OSError as e:
                logger.warning("pose reply to %s failed: %s", addr, e)
            return
        with self._tcp_lock:
            dead = []
            for conn in self._tcp_conns:
                try:
                    conn.sendall(reply)
                except OSError:
                    dead.append(conn)
            for conn in dead:
                conn.close()
                self._tcp_conns.remove(conn)

    @staticmethod
    def _record(trace: LatencyTrace, stage: str, ts: int) -> LatencyTrace:
        # Clock skew between peers must not kill the pipeline; the trace
        # just goes without that stage.
        try:
            return record_stage(trace, stage, ts)
        except InstrumentationError as e:
            logger.warning("trace for frame %d: %s", trace.frame_id, e)
            return trace


def run_server(config: ServerConfig) -> None:
    """Blocking entry point used by the CLI."""
    PoseServer(config).serve_forever()
