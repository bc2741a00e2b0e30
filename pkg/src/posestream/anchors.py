"""Anchor grid generation for the single-shot detector head.

Default layout follows the usual 5-level feature-pyramid convention:
strides 8..128, 3 octave scales, 3 aspect ratios, base size 4x the stride.
For a 256x256 input that is (32^2 + 16^2 + 8^2 + 4^2 + 2^2) * 9 = 12,276
anchors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError

__all__ = ["AnchorConfig", "AnchorGrid", "generate_anchors", "load_anchor_config"]

DEFAULT_STRIDES = (8, 16, 32, 64, 128)
DEFAULT_SCALES = (2.0 ** 0.0, 2.0 ** (1.0 / 3.0), 2.0 ** (2.0 / 3.0))
DEFAULT_RATIOS = (0.5, 1.0, 2.0)
DEFAULT_BASE_MULTIPLIER = 4.0


@dataclass(frozen=True)
class AnchorConfig:
    strides: tuple[int, ...] = DEFAULT_STRIDES
    scales: tuple[float, ...] = DEFAULT_SCALES
    ratios: tuple[float, ...] = DEFAULT_RATIOS
    base_size_multiplier: float = DEFAULT_BASE_MULTIPLIER

    def __post_init__(self):
        if not self.strides or not self.scales or not self.ratios:
            raise ConfigError("anchor config needs at least one stride, scale, and ratio")
        if any(s <= 0 for s in self.strides) or self.base_size_multiplier <= 0:
            raise ConfigError("strides and base size multiplier must be positive")

    @property
    def levels(self) -> int:
        return len(self.strides)

    @property
    def anchors_per_cell(self) -> int:
        return len(self.scales) * len(self.ratios)

    def to_dict(self) -> dict:
        return {
            "levels": self.levels,
            "strides": list(self.strides),
            "scales": list(self.scales),
            "ratios": list(self.ratios),
            "base_size_multiplier": self.base_size_multiplier,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def load_anchor_config(path) -> AnchorConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read anchor config {path}: {e}") from e
    cfg = AnchorConfig(
        strides=tuple(int(s) for s in raw["strides"]),
        scales=tuple(float(s) for s in raw["scales"]),
        ratios=tuple(float(r) for r in raw["ratios"]),
        base_size_multiplier=float(raw.get("base_size_multiplier", DEFAULT_BASE_MULTIPLIER)),
    )
    if "levels" in raw and int(raw["levels"]) != cfg.levels:
        raise ConfigError(
            f"anchor config declares {raw['levels']} levels but lists {cfg.levels} strides"
        )
    return cfg


@dataclass(frozen=True, eq=False)
class AnchorGrid:
    """Immutable anchor tiling for one input size.

    boxes are (cx, cy, w, h) in input-image pixels, ordered level-major,
    then row, then column, then scale, then ratio.
    """

    input_width: int
    input_height: int
    config: AnchorConfig
    boxes: np.ndarray = field(repr=False)
    level_of: np.ndarray = field(repr=False)
    stride_of: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.boxes.shape[0]

    @property
    def centers(self) -> np.ndarray:
        return self.boxes[:, :2]

    def nearest_anchor(self, point) -> int:
        """Index of the anchor whose center is closest to a pixel point (ties: lowest index)."""
        p = np.asarray(point, dtype=np.float64).reshape(2)
        d2 = np.sum((self.centers - p) ** 2, axis=1)
        return int(np.argmin(d2))


def generate_anchors(input_size, config: AnchorConfig | None = None) -> AnchorGrid:
    """Tile anchors for the given input size.

    input_size is either a single int (square input) or a (width, height)
    pair; every dimension must divide evenly by the largest stride.
    """
    config = config or AnchorConfig()
    if isinstance(input_size, (int, np.integer)):
        width, height = int(input_size), int(input_size)
    else:
        width, height = (int(v) for v in input_size)
    if width <= 0 or height <= 0:
        raise ConfigError(f"input size must be positive, got {width}x{height}")
    max_stride = max(config.strides)
    if width % max_stride or height % max_stride:
        raise ConfigError(
            f"input size {width}x{height} not divisible by largest stride {max_stride}"
        )

    per_anchor = []
    levels = []
    strides = []
    for level, stride in enumerate(config.strides):
        grid_w = width // stride
        grid_h = height // stride
        base = config.base_size_multiplier * stride
        # Cell-local anchor shapes: scale-major, ratio-minor.
        shapes = np.array([
            (base * s * np.sqrt(r), base * s / np.sqrt(r))
            for s in config.scales
            for r in config.ratios
        ])
        cy, cx = np.mgrid[0:grid_h, 0:grid_w]
        centers = np.stack([(cx + 0.5) * stride, (cy + 0.5) * stride], axis=-1)
        centers = centers.reshape(-1, 1, 2)                      # (cells, 1, 2)
        tiled = np.broadcast_to(shapes, (centers.shape[0],) + shapes.shape)
        boxes = np.concatenate([
            np.broadcast_to(centers, tiled.shape[:2] + (2,)),
            tiled,
        ], axis=-1).reshape(-1, 4)
        per_anchor.append(boxes)
        levels.append(np.full(boxes.shape[0], level, dtype=np.int32))
        strides.append(np.full(boxes.shape[0], stride, dtype=np.int32))

    return AnchorGrid(
        input_width=width,
        input_height=height,
        config=config,
        boxes=np.ascontiguousarray(np.concatenate(per_anchor)),
        level_of=np.concatenate(levels),
        stride_of=np.concatenate(strides),
    )
