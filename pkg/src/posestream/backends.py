"""Inference backends: the scripted synthetic oracle and serialized-graph execution.

A backend maps the (1, 3, 256, 256) input tensor to RawHeads for a declared
anchor grid.  The synthetic backend ignores pixel content and encodes the
scripted ground truth for the frame id — an exact oracle for end-to-end
verification.  The graph backend loads a TorchScript file and treats it as
an opaque network.

Graph I/O contract: forward(x: float32 (1, 3, 256, 256)) returns the tuple
(class_logit (1, A), box_regress (1, A, 4), rotation (1, A, 3),
center_offset (1, A, 2), depth (1, A), hand (1, A, 63)) for A anchors.
Graphs are torch.export archives (.pt2); the backend treats them as opaque.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np

from .anchors import AnchorGrid
from .decode import RawHeads, encode_ground_truth
from .errors import BackendError, StructuralError
from .geometry import CameraIntrinsics
from .synthetic import PoseScript

__all__ = ["InferenceBackend", "SyntheticBackend", "GraphBackend", "HEAD_FIELDS"]

HEAD_FIELDS = (
    ("class_logit", ()),
    ("box_regress", (4,)),
    ("rotation", (3,)),
    ("center_offset", (2,)),
    ("depth", ()),
    ("hand", (63,)),
)


class InferenceBackend(Protocol):
    grid: AnchorGrid

    def infer(self, tensor: np.ndarray, frame_id: int) -> RawHeads: ...


def _check_tensor(tensor: np.ndarray, size: int) -> None:
    tensor = np.asarray(tensor)
    if tensor.shape != (1, 3, size, size):
        raise StructuralError(
            f"input tensor must be (1, 3, {size}, {size}), got {tensor.shape}"
        )


class SyntheticBackend:
    """Encodes the scripted pose for each frame id as exact head outputs."""

    def __init__(self, script: PoseScript, grid: AnchorGrid, input_intrinsics: CameraIntrinsics):
        if input_intrinsics.width != grid.input_width or input_intrinsics.height != grid.input_height:
            raise StructuralError(
                f"intrinsics {input_intrinsics.width}x{input_intrinsics.height} do not match "
                f"grid input {grid.input_width}x{grid.input_height}"
            )
        self.script = script
        self.grid = grid
        self.input_intrinsics = input_intrinsics

    def infer(self, tensor: np.ndarray, frame_id: int) -> RawHeads:
        _check_tensor(tensor, self.grid.input_width)
        pose, hand = self.script.sample(frame_id)
        return encode_ground_truth(pose, hand, self.grid, self.input_intrinsics)


class GraphBackend:
    """Runs a serialized torch.export graph (.pt2) and adapts it to RawHeads."""

    def __init__(self, graph_path, grid: AnchorGrid):
        try:
            import torch
        except ImportError as e:  # pragma: no cover - torch is an install extra
            raise BackendError(
                "graph backend needs the 'graph' extra (pip install posestream[graph])"
            ) from e
        self._torch = torch
        self.grid = grid
        try:
            exported = torch.export.load(str(graph_path))
            self.module = exported.module()
        except Exception as e:
            raise BackendError(f"cannot load graph file {graph_path}: {e}") from e
        # Shape contract is validated once, up front, on a zero tensor.
        probe = self._run(np.zeros((1, 3, grid.input_height, grid.input_width), dtype=np.float32))
        for (name, tail), arr in zip(HEAD_FIELDS, probe):
            want = (len(grid),) + tail
            if arr.shape != want:
                raise BackendError(
                    f"graph output {name!r} has shape {arr.shape}, contract wants {want}"
                )
            if not np.all(np.isfinite(arr)):
                raise BackendError(f"graph output {name!r} is not finite on the probe input")

    def _run(self, tensor: np.ndarray) -> list[np.ndarray]:
        torch = self._torch
        with torch.no_grad():
            out = self.module(torch.from_numpy(np.ascontiguousarray(tensor)))
        if not isinstance(out, (tuple, list)) or len(out) != len(HEAD_FIELDS):
            raise BackendError(
                f"graph must return {len(HEAD_FIELDS)} head tensors, got "
                f"{type(out).__name__} of {len(out) if isinstance(out, (tuple, list)) else 'n/a'}"
            )
        arrays = []
        for (name, tail), t in zip(HEAD_FIELDS, out):
            arr = t.detach().cpu().numpy().astype(np.float64)
            want_nd = 2 + len(tail)
            if arr.ndim != want_nd or arr.shape[0] != 1:
                raise BackendError(
                    f"graph output {name!r} has shape {arr.shape}, expected (1, A{', ...' if tail else ''})"
                )
            arrays.append(arr[0])
        return arrays

    def infer(self, tensor: np.ndarray, frame_id: int = 0) -> RawHeads:
        _check_tensor(tensor, self.grid.input_width)
        arrays = self._run(np.asarray(tensor, dtype=np.float32))
        heads = dict(zip((name for name, _ in HEAD_FIELDS), arrays))
        try:
            return RawHeads(**heads)
        except StructuralError as e:
            raise BackendError(f"graph outputs violate the head contract: {e}") from e
