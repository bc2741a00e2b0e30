"""Datagram wire protocol: frame packetization, reassembly, pose messages.

Wire layout (all little-endian):

  FramePacket   19-byte header  magic(2) version(1) frame_id(u32)
                                capture_timestamp_us(u64) chunk_index(u16)
                                chunk_count(u16)
                + payload_len(u16) + payload (<= 1200 bytes)

  PoseMessage   24 bytes: rotation xyz then translation xyz, float32 each.

  Pose reply    frame_id(u32) + server_send_timestamp_us(u64) + PoseMessage
                = 36 bytes.

Frames travel as a serialized blob: width(u16) height(u16) format(u8)
followed by the planar I420 bytes (format 0) or an opaque compressed
bitstream (format 1, carried but never interpreted here).

The reassembler tolerates loss, duplication, and reordering.  Frames are
emitted exactly once, only when complete, with strictly increasing ids;
completing a frame discards every older incomplete frame (latest wins), and
at most two partial frames are ever buffered.
"""

from __future__ import annotations

import socket as _socket
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ProtocolError, StructuralError
from .geometry import Pose6DoF
from .preprocess import FrameYUV420

__all__ = [
    "FramePacket",
    "MAX_PAYLOAD",
    "HEADER_LEN",
    "serialize_frame",
    "deserialize_frame",
    "chunk_frame",
    "chunk_blob",
    "Reassembler",
    "encode_pose_message",
    "decode_pose_message",
    "encode_pose_reply",
    "decode_pose_reply",
    "POSE_MESSAGE_LEN",
    "POSE_REPLY_LEN",
]

MAGIC = b"\xeb\x90"
VERSION = 1
_HEADER = struct.Struct("<2sBIQHH")
_PAYLOAD_LEN = struct.Struct("<H")
HEADER_LEN = _HEADER.size            # 19; payload length prefix follows it
MAX_PAYLOAD = 1200

_FRAME_BLOB_HEADER = struct.Struct("<HHB")
FRAME_FORMAT_I420 = 0
FRAME_FORMAT_OPAQUE = 1

_POSE = struct.Struct("<6f")
_REPLY_PREFIX = struct.Struct("<IQ")
POSE_MESSAGE_LEN = _POSE.size        # 24
POSE_REPLY_LEN = _REPLY_PREFIX.size + _POSE.size   # 36

SOCKET_BUFFER_BYTES = 1 << 23


def size_datagram_socket(sock) -> None:
    """Grow send/receive buffers so a full frame burst fits without drops.

    SO_RCVBUFFORCE / SO_SNDBUFFORCE bypass rmem_max when the process has
    CAP_NET_ADMIN; otherwise the kernel clamps the plain request.
    """
    for forced, plain in (
        (getattr(_socket, "SO_RCVBUFFORCE", 33), _socket.SO_RCVBUF),
        (getattr(_socket, "SO_SNDBUFFORCE", 32), _socket.SO_SNDBUF),
    ):
        try:
            sock.setsockopt(_socket.SOL_SOCKET, forced, SOCKET_BUFFER_BYTES)
        except OSError:
            sock.setsockopt(_socket.SOL_SOCKET, plain, SOCKET_BUFFER_BYTES)


@dataclass(frozen=True)
class FramePacket:
    frame_id: int
    capture_timestamp_us: int
    chunk_index: int
    chunk_count: int
    payload: bytes

    def __post_init__(self):
        if not 0 <= self.chunk_index < self.chunk_count:
            raise StructuralError(
                f"chunk index {self.chunk_index} out of range for count {self.chunk_count}"
            )
        if len(self.payload) > MAX_PAYLOAD:
            raise StructuralError(f"payload of {len(self.payload)} bytes exceeds {MAX_PAYLOAD}")

    def pack(self) -> bytes:
        return (
            _HEADER.pack(
                MAGIC, VERSION, self.frame_id, self.capture_timestamp_us,
                self.chunk_index, self.chunk_count,
            )
            + _PAYLOAD_LEN.pack(len(self.payload))
            + self.payload
        )

    @classmethod
    def unpack(cls, data: bytes) -> "FramePacket":
        if len(data) < HEADER_LEN + _PAYLOAD_LEN.size:
            raise ProtocolError(f"datagram of {len(data)} bytes is shorter than the header")
        magic, version, frame_id, ts, idx, count = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise ProtocolError(f"bad magic {magic!r}")
        if version != VERSION:
            raise ProtocolError(f"unsupported version {version}")
        (payload_len,) = _PAYLOAD_LEN.unpack_from(data, HEADER_LEN)
        payload = data[HEADER_LEN + _PAYLOAD_LEN.size:]
        if len(payload) != payload_len:
            raise ProtocolError(
                f"payload length field says {payload_len}, datagram carries {len(payload)}"
            )
        if count == 0 or idx >= count:
            raise ProtocolError(f"chunk index {idx} out of range for count {count}")
        return cls(
            frame_id=frame_id,
            capture_timestamp_us=ts,
            chunk_index=idx,
            chunk_count=count,
            payload=payload,
        )


def serialize_frame(frame: FrameYUV420) -> bytes:
    """Frame blob: 5-byte size/format header + planar I420 bytes."""
    return (
        _FRAME_BLOB_HEADER.pack(frame.width, frame.height, FRAME_FORMAT_I420)
        + frame.planes_bytes()
    )


def deserialize_frame(blob: bytes, frame_id: int = 0, timestamp_us: int = 0) -> FrameYUV420:
    if len(blob) < _FRAME_BLOB_HEADER.size:
        raise ProtocolError("frame blob shorter than its header")
    width, height, fmt = _FRAME_BLOB_HEADER.unpack_from(blob, 0)
    if fmt != FRAME_FORMAT_I420:
        raise ProtocolError(f"cannot deserialize frame format {fmt} as raw I420")
    try:
        return FrameYUV420.from_planes_bytes(
            blob[_FRAME_BLOB_HEADER.size:], width, height,
            frame_id=frame_id, timestamp_us=timestamp_us,
        )
    except StructuralError as e:
        raise ProtocolError(str(e)) from e


def chunk_blob(frame_id: int, capture_timestamp_us: int, blob: bytes) -> list[FramePacket]:
    """Split a serialized frame into MTU-safe packets (1200-byte payload cap)."""
    if len(blob) == 0:
        raise StructuralError("cannot chunk an empty frame blob")
    count = (len(blob) + MAX_PAYLOAD - 1) // MAX_PAYLOAD
    return [
        FramePacket(
            frame_id=frame_id,
            capture_timestamp_us=capture_timestamp_us,
            chunk_index=i,
            chunk_count=count,
            payload=blob[i * MAX_PAYLOAD:(i + 1) * MAX_PAYLOAD],
        )
        for i in range(count)
    ]


def chunk_frame(frame: FrameYUV420) -> list[FramePacket]:
    """Serialize and packetize one frame."""
    return chunk_blob(frame.frame_id, frame.timestamp_us, serialize_frame(frame))


@dataclass
class _PartialFrame:
    capture_timestamp_us: int
    chunk_count: int
    chunks: dict = field(default_factory=dict)

    def complete(self) -> bool:
        return len(self.chunks) == self.chunk_count


@dataclass(frozen=True)
class CompletedFrame:
    frame_id: int
    capture_timestamp_us: int
    blob: bytes


class Reassembler:
    """Single-writer frame reassembly with the latest-wins staleness rule.

    feed() accepts raw datagrams and returns the frames completed by them
    (at most one per call in practice).  Malformed datagrams are counted,
    never fatal.
    """

    MAX_PENDING = 2

    def __init__(self):
        self._pending: dict[int, _PartialFrame] = {}
        self.highest_emitted: int | None = None
        self.malformed_packets = 0
        self.duplicate_packets = 0
        self.discarded_frames = 0
        self.emitted_frames = 0

    def feed(self, datagram: bytes) -> list[CompletedFrame]:
        try:
            pkt = FramePacket.unpack(datagram)
        except ProtocolError:
            self.malformed_packets += 1
            return []
        return self.feed_packet(pkt)

    def feed_packet(self, pkt: FramePacket) -> list[CompletedFrame]:
        if self.highest_emitted is not None and pkt.frame_id <= self.highest_emitted:
            return []    # stale: a newer frame already completed
        partial = self._pending.get(pkt.frame_id)
        if partial is None:
            partial = _PartialFrame(
                capture_timestamp_us=pkt.capture_timestamp_us,
                chunk_count=pkt.chunk_count,
            )
            self._pending[pkt.frame_id] = partial
            self._evict_overflow()
            if pkt.frame_id not in self._pending:
                return []    # evicted immediately: older than everything pending
        if pkt.chunk_count != partial.chunk_count:
            self.malformed_packets += 1
            return []
        if pkt.chunk_index in partial.chunks:
            self.duplicate_packets += 1
            return []
        partial.chunks[pkt.chunk_index] = pkt.payload
        if not partial.complete():
            return []

        frame_id = pkt.frame_id
        blob = b"".join(partial.chunks[i] for i in range(partial.chunk_count))
        stale = [fid for fid in self._pending if fid <= frame_id]
        for fid in stale:
            if fid != frame_id:
                self.discarded_frames += 1
            del self._pending[fid]
        self.highest_emitted = frame_id
        self.emitted_frames += 1
        return [CompletedFrame(
            frame_id=frame_id,
            capture_timestamp_us=partial.capture_timestamp_us,
            blob=blob,
        )]

    def _evict_overflow(self) -> None:
        while len(self._pending) > self.MAX_PENDING:
            oldest = min(self._pending)
            del self._pending[oldest]
            self.discarded_frames += 1

    @property
    def pending_count(self) -> int:
        return len(self._pending)


def encode_pose_message(pose: Pose6DoF) -> bytes:
    """24 bytes: r_x r_y r_z t_x t_y t_z as little-endian float32."""
    r = pose.rotation
    t = pose.translation
    return _POSE.pack(r[0], r[1], r[2], t[0], t[1], t[2])


def decode_pose_message(data: bytes) -> Pose6DoF:
    if len(data) != POSE_MESSAGE_LEN:
        raise ProtocolError(f"pose message must be {POSE_MESSAGE_LEN} bytes, got {len(data)}")
    vals = _POSE.unpack(data)
    return Pose6DoF(rotation=np.array(vals[:3]), translation=np.array(vals[3:]))


def encode_pose_reply(frame_id: int, send_timestamp_us: int, pose: Pose6DoF) -> bytes:
    """Return-channel payload: frame id + server send time + the 24-byte core."""
    return _REPLY_PREFIX.pack(frame_id, send_timestamp_us) + encode_pose_message(pose)


def decode_pose_reply(data: bytes) -> tuple[int, int, Pose6DoF]:
    if len(data) != POSE_REPLY_LEN:
        raise ProtocolError(f"pose reply must be {POSE_REPLY_LEN} bytes, got {len(data)}")
    frame_id, ts = _REPLY_PREFIX.unpack_from(data, 0)
    return frame_id, ts, decode_pose_message(data[_REPLY_PREFIX.size:])
