"""Frame preprocessing: planar YUV420 decode, bilinear resize, normalization.

Everything here is deterministic and bit-stable: identical input bytes give
identical output tensors regardless of thread count or run.

Color conversion defaults to BT.601 full range (the common webcam/encoder
default); a studio-range flag covers the 16..235 / 16..240 convention.
Normalization constants default to the usual pretrained-backbone statistics
and can be overridden through configuration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, StructuralError
from .geometry import CameraIntrinsics, rescale_intrinsics

__all__ = [
    "FrameYUV420",
    "yuv420_to_rgb",
    "rgb_to_yuv420",
    "bilinear_resize",
    "normalize",
    "denormalize",
    "preprocess",
    "NETWORK_INPUT_SIZE",
    "DEFAULT_NORM_MEAN",
    "DEFAULT_NORM_STD",
    "write_frame_file",
    "read_frame_file",
]

NETWORK_INPUT_SIZE = 256
DEFAULT_NORM_MEAN = (0.485, 0.456, 0.406)
DEFAULT_NORM_STD = (0.229, 0.224, 0.225)

# BT.601 luma weights; the conversion matrices derive from these.
_KR = 0.299
_KB = 0.114
_KG = 1.0 - _KR - _KB


@dataclass(frozen=True, eq=False)
class FrameYUV420:
    """Planar I420 frame: full-res luma, 2x2-subsampled chroma."""

    width: int
    height: int
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    frame_id: int = 0
    timestamp_us: int = 0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.width % 2 or self.height % 2:
            raise StructuralError(
                f"frame dimensions must be positive and even, got {self.width}x{self.height}"
            )
        for name, plane, shape in (
            ("y", self.y, (self.height, self.width)),
            ("u", self.u, (self.height // 2, self.width // 2)),
            ("v", self.v, (self.height // 2, self.width // 2)),
        ):
            plane = np.asarray(plane, dtype=np.uint8)
            if plane.shape != shape:
                raise StructuralError(f"{name} plane has shape {plane.shape}, expected {shape}")
            object.__setattr__(self, name, plane)

    def planes_bytes(self) -> bytes:
        """Planar blob in I420 order: Y, then U, then V."""
        return self.y.tobytes() + self.u.tobytes() + self.v.tobytes()

    @classmethod
    def from_planes_bytes(
        cls, data: bytes, width: int, height: int, frame_id: int = 0, timestamp_us: int = 0
    ) -> "FrameYUV420":
        if width <= 0 or height <= 0 or width % 2 or height % 2:
            raise StructuralError(f"bad frame dimensions {width}x{height}")
        y_size = width * height
        c_size = (width // 2) * (height // 2)
        if len(data) != y_size + 2 * c_size:
            raise StructuralError(
                f"I420 blob for {width}x{height} must be {y_size + 2 * c_size} bytes, "
                f"got {len(data)}"
            )
        buf = np.frombuffer(data, dtype=np.uint8)
        return cls(
            width=width,
            height=height,
            y=buf[:y_size].reshape(height, width),
            u=buf[y_size:y_size + c_size].reshape(height // 2, width // 2),
            v=buf[y_size + c_size:].reshape(height // 2, width // 2),
            frame_id=frame_id,
            timestamp_us=timestamp_us,
        )


def yuv420_to_rgb(frame: FrameYUV420, full_range: bool = True) -> np.ndarray:
    """BT.601 conversion to interleaved RGB with nearest-neighbor chroma upsampling.

    Returns an (H, W, 3) uint8 array clamped to [0, 255].  float32 keeps the
    full-frame conversion inside the real-time budget; the values stay well
    within its exact integer range.
    """
    h, w = frame.height, frame.width
    y = frame.y.astype(np.float32)
    u = frame.u.astype(np.float32)
    v = frame.v.astype(np.float32)
    u -= 128.0
    v -= 128.0
    if not full_range:
        y = (y - np.float32(16.0)) * np.float32(255.0 / 219.0)
        u *= np.float32(255.0 / 224.0)
        v *= np.float32(255.0 / 224.0)
    # Chroma contributions at quarter resolution, with +0.5 pre-baked so the
    # final uint8 cast rounds half-up.  Broadcasting against the (h/2, 2,
    # w/2, 2) luma view fuses the nearest-neighbor 2x2 upsample into the add.
    cr = np.float32(2.0 * (1.0 - _KR)) * v + np.float32(0.5)
    cg = (
        np.float32(-2.0 * (1.0 - _KB) * _KB / _KG) * u
        - np.float32(2.0 * (1.0 - _KR) * _KR / _KG) * v
        + np.float32(0.5)
    )
    cb = np.float32(2.0 * (1.0 - _KB)) * u + np.float32(0.5)
    y4 = y.reshape(h // 2, 2, w // 2, 2)
    planes = []
    for chroma in (cr, cg, cb):
        p = y4 + chroma[:, None, :, None]
        np.clip(p, 0.0, 255.0, out=p)
        planes.append(p.astype(np.uint8).reshape(h, w))
    return np.stack(planes, axis=-1)


def rgb_to_yuv420(
    rgb: np.ndarray, frame_id: int = 0, timestamp_us: int = 0, full_range: bool = True
) -> FrameYUV420:
    """Inverse of yuv420_to_rgb; chroma is the mean of each 2x2 block.

    Used by synthetic frame sources and round-trip tests; 4:2:0 subsampling
    is lossy wherever chroma varies inside a block.
    """
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise StructuralError(f"expected (H, W, 3) RGB array, got {rgb.shape}")
    h, w = rgb.shape[:2]
    if h % 2 or w % 2:
        raise StructuralError(f"frame dimensions must be even, got {w}x{h}")
    r = rgb[..., 0].astype(np.float32)
    g = rgb[..., 1].astype(np.float32)
    b = rgb[..., 2].astype(np.float32)
    y = np.float32(_KR) * r + np.float32(_KG) * g + np.float32(_KB) * b
    u = (b - y) * np.float32(1.0 / (2.0 * (1.0 - _KB)))
    v = (r - y) * np.float32(1.0 / (2.0 * (1.0 - _KR)))
    if not full_range:
        y = y * np.float32(219.0 / 255.0) + np.float32(16.0)
        u = u * np.float32(224.0 / 255.0)
        v = v * np.float32(224.0 / 255.0)
    u = u.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3)) + 128.0
    v = v.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3)) + 128.0
    return FrameYUV420(
        width=w,
        height=h,
        y=np.clip(np.rint(y), 0, 255).astype(np.uint8),
        u=np.clip(np.rint(u), 0, 255).astype(np.uint8),
        v=np.clip(np.rint(v), 0, 255).astype(np.uint8),
        frame_id=frame_id,
        timestamp_us=timestamp_us,
    )


def bilinear_resize(rgb: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resample with half-pixel centers and edge clamping.

    Axes stretch independently (896x504 maps to 256x256 anisotropically).
    Same-size input is returned byte-identical.
    """
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.shape[0] == 0 or rgb.shape[1] == 0:
        raise StructuralError(f"expected non-empty (H, W, 3) array, got {rgb.shape}")
    if out_w <= 0 or out_h <= 0:
        raise DomainError(f"target size must be positive, got {out_w}x{out_h}")
    in_h, in_w = rgb.shape[:2]

    sx = (np.arange(out_w, dtype=np.float64) + 0.5) * (in_w / out_w) - 0.5
    sy = (np.arange(out_h, dtype=np.float64) + 0.5) * (in_h / out_h) - 0.5
    x0 = np.floor(sx)
    y0 = np.floor(sy)
    wx = (sx - x0).astype(np.float32)[None, :, None]
    wy = (sy - y0).astype(np.float32)[:, None, None]
    x0c = np.clip(x0, 0, in_w - 1).astype(np.intp)
    x1c = np.clip(x0 + 1, 0, in_w - 1).astype(np.intp)
    y0c = np.clip(y0, 0, in_h - 1).astype(np.intp)
    y1c = np.clip(y0 + 1, 0, in_h - 1).astype(np.intp)

    # Gather the four taps as uint8 first; only out_h x out_w pixels convert.
    p00 = rgb[np.ix_(y0c, x0c)].astype(np.float32)
    p01 = rgb[np.ix_(y0c, x1c)].astype(np.float32)
    p10 = rgb[np.ix_(y1c, x0c)].astype(np.float32)
    p11 = rgb[np.ix_(y1c, x1c)].astype(np.float32)
    top = p00 + (p01 - p00) * wx
    bot = p10 + (p11 - p10) * wx
    out = top + (bot - top) * wy
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def normalize(
    rgb: np.ndarray,
    mean: tuple[float, float, float] = DEFAULT_NORM_MEAN,
    std: tuple[float, float, float] = DEFAULT_NORM_STD,
) -> np.ndarray:
    """Scale to [0, 1], standardize per channel, emit a (1, 3, H, W) float32 tensor."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise StructuralError(f"expected (H, W, 3) array, got {rgb.shape}")
    if rgb.shape[0] != NETWORK_INPUT_SIZE or rgb.shape[1] != NETWORK_INPUT_SIZE:
        raise StructuralError(
            f"normalize expects a {NETWORK_INPUT_SIZE}x{NETWORK_INPUT_SIZE} image, "
            f"got {rgb.shape[1]}x{rgb.shape[0]}"
        )
    chw = rgb.astype(np.float32).transpose(2, 0, 1) / np.float32(255.0)
    mean_arr = np.asarray(mean, dtype=np.float32).reshape(3, 1, 1)
    std_arr = np.asarray(std, dtype=np.float32).reshape(3, 1, 1)
    return ((chw - mean_arr) / std_arr)[None, ...]


def denormalize(
    tensor: np.ndarray,
    mean: tuple[float, float, float] = DEFAULT_NORM_MEAN,
    std: tuple[float, float, float] = DEFAULT_NORM_STD,
) -> np.ndarray:
    """Inverse of normalize back to (H, W, 3) uint8."""
    t = np.asarray(tensor, dtype=np.float64)
    if t.shape[0] != 1 or t.ndim != 4 or t.shape[1] != 3:
        raise StructuralError(f"expected a (1, 3, H, W) tensor, got {t.shape}")
    mean_arr = np.asarray(mean, dtype=np.float64).reshape(3, 1, 1)
    std_arr = np.asarray(std, dtype=np.float64).reshape(3, 1, 1)
    chw = (t[0] * std_arr + mean_arr) * 255.0
    return np.clip(np.rint(chw.transpose(1, 2, 0)), 0, 255).astype(np.uint8)


def preprocess(
    frame: FrameYUV420,
    K: CameraIntrinsics,
    full_range: bool = True,
    mean: tuple[float, float, float] = DEFAULT_NORM_MEAN,
    std: tuple[float, float, float] = DEFAULT_NORM_STD,
) -> tuple[np.ndarray, CameraIntrinsics]:
    """Full path from an I420 frame to the network input tensor.

    Returns the (1, 3, 256, 256) tensor and the intrinsics rescaled to the
    network input size.
    """
    if K.width != frame.width or K.height != frame.height:
        raise ConfigError(
            f"intrinsics are for {K.width}x{K.height}, frame is {frame.width}x{frame.height}"
        )
    rgb = yuv420_to_rgb(frame, full_range=full_range)
    resized = bilinear_resize(rgb, NETWORK_INPUT_SIZE, NETWORK_INPUT_SIZE)
    tensor = normalize(resized, mean=mean, std=std)
    return tensor, rescale_intrinsics(K, NETWORK_INPUT_SIZE, NETWORK_INPUT_SIZE)


def write_frame_file(frame: FrameYUV420, blob_path) -> None:
    """Fixture format: planar I420 blob plus a JSON sidecar with the header."""
    blob_path = Path(blob_path)
    blob_path.write_bytes(frame.planes_bytes())
    sidecar = {
        "width": frame.width,
        "height": frame.height,
        "frame_id": frame.frame_id,
        "timestamp": frame.timestamp_us,
    }
    blob_path.with_suffix(".json").write_text(json.dumps(sidecar) + "\n")


def read_frame_file(blob_path) -> FrameYUV420:
    blob_path = Path(blob_path)
    sidecar_path = blob_path.with_suffix(".json")
    try:
        header = json.loads(sidecar_path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read frame sidecar {sidecar_path}: {e}") from e
    return FrameYUV420.from_planes_bytes(
        blob_path.read_bytes(),
        width=int(header["width"]),
        height=int(header["height"]),
        frame_id=int(header.get("frame_id", 0)),
        timestamp_us=int(header.get("timestamp", 0)),
    )
