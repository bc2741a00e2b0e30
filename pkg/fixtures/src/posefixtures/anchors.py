"""Anchor grid layout per the pipeline's documented convention.

Ordering is level-major, then row, then column, then scale, then ratio;
centers at (i + 0.5) * stride; anchor width = base * scale * sqrt(ratio),
height = base * scale / sqrt(ratio) with base = multiplier * stride.
"""

from __future__ import annotations

import numpy as np

DEFAULT_ANCHOR_CONFIG = {
    "levels": 5,
    "strides": [8, 16, 32, 64, 128],
    "scales": [2.0 ** 0.0, 2.0 ** (1.0 / 3.0), 2.0 ** (2.0 / 3.0)],
    "ratios": [0.5, 1.0, 2.0],
    "base_size_multiplier": 4.0,
}


def anchor_boxes(input_size: int, config: dict | None = None) -> np.ndarray:
    """(A, 4) array of (cx, cy, w, h) anchors for a square input."""
    config = config or DEFAULT_ANCHOR_CONFIG
    rows = []
    for stride in config["strides"]:
        cells = input_size // stride
        base = config["base_size_multiplier"] * stride
        shapes = [
            (base * s * np.sqrt(r), base * s / np.sqrt(r))
            for s in config["scales"]
            for r in config["ratios"]
        ]
        for gy in range(cells):
            for gx in range(cells):
                cx = (gx + 0.5) * stride
                cy = (gy + 0.5) * stride
                for w, h in shapes:
                    rows.append((cx, cy, w, h))
    return np.array(rows, dtype=np.float64)


def anchor_count(input_size: int, config: dict | None = None) -> int:
    config = config or DEFAULT_ANCHOR_CONFIG
    cells = sum((input_size // s) ** 2 for s in config["strides"])
    return cells * len(config["scales"]) * len(config["ratios"])
