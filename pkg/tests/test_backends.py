import numpy as np
import pytest

from posestream.anchors import AnchorConfig, generate_anchors
from posestream.backends import GraphBackend, SyntheticBackend
from posestream.decode import decode_heads, encode_ground_truth, filter_detections
from posestream.errors import BackendError, EncodeError
from posestream.geometry import CameraIntrinsics, rescale_intrinsics
from posestream.metrics import add_tool
from posestream.synthetic import PoseScript

torch = pytest.importorskip("torch")


@pytest.fixture(scope="module")
def small_grid():
    return generate_anchors(64, AnchorConfig(strides=(32,)))


@pytest.fixture(scope="module")
def capture_k():
    return CameraIntrinsics(fx=90.0, fy=88.0, px=64.0, py=64.0, width=128, height=128)


def zero_tensor(size=64):
    return np.zeros((1, 3, size, size), dtype=np.float32)


class _ConstantHeads(torch.nn.Module):
    """Test double: emits baked head tensors regardless of pixel content."""

    def __init__(self, arrays):
        super().__init__()
        self.names = list(arrays)
        for name, arr in arrays.items():
            self.register_buffer(name, torch.from_numpy(arr[None].astype(np.float32)))

    def forward(self, x):
        anchor = x.reshape(-1)[0] * 0.0
        return (
            self.class_logit + anchor,
            self.box_regress + anchor,
            self.rotation + anchor,
            self.center_offset + anchor,
            self.depth + anchor,
            self.hand + anchor,
        )


def export_constant_graph(heads, path):
    arrays = {
        "class_logit": heads.class_logit,
        "box_regress": heads.box_regress,
        "rotation": heads.rotation,
        "center_offset": heads.center_offset,
        "depth": heads.depth,
        "hand": heads.hand,
    }
    exported = torch.export.export(_ConstantHeads(arrays), (torch.zeros(1, 3, 64, 64),))
    torch.export.save(exported, str(path))


class TestSyntheticBackend:
    def _backend(self, small_grid, capture_k, seed=3):
        script = PoseScript(seed, capture_k, tz_range=(0.4, 1.0))
        k_in = rescale_intrinsics(capture_k, 64, 64)
        return SyntheticBackend(script, small_grid, k_in), script, k_in

    def test_deterministic_bitwise(self, small_grid, capture_k):
        backend, _, _ = self._backend(small_grid, capture_k)
        a = backend.infer(zero_tensor(), 11)
        b = backend.infer(zero_tensor(), 11)
        assert np.array_equal(a.class_logit, b.class_logit)
        assert np.array_equal(a.hand, b.hand)
        assert np.array_equal(a.depth, b.depth)

    def test_pipeline_recovers_script_pose(self, small_grid, capture_k):
        backend, script, k_in = self._backend(small_grid, capture_k)
        for fid in range(20):
            raw = backend.infer(zero_tensor(), fid)
            det = filter_detections(decode_heads(raw, small_grid, k_in))
            pose, hand = script.sample(fid)
            assert det is not None
            assert np.allclose(det.pose.translation, pose.translation, atol=1e-6)
            assert np.allclose(det.pose.rotation, pose.rotation, atol=1e-6)
            assert np.allclose(det.hand, hand, atol=1e-9)

    def test_behind_camera_script_error_surfaces(self, small_grid, capture_k):
        backend, script, _ = self._backend(small_grid, capture_k)
        from posestream.geometry import Pose6DoF

        script.sample = lambda fid: (  # type: ignore[method-assign]
            Pose6DoF(rotation=np.zeros(3), translation=np.array([0.0, 0.0, -1.0])),
            np.zeros((21, 3)),
        )
        with pytest.raises(EncodeError):
            backend.infer(zero_tensor(), 0)

    def test_rejects_wrong_tensor_shape(self, small_grid, capture_k):
        backend, _, _ = self._backend(small_grid, capture_k)
        from posestream.errors import StructuralError

        with pytest.raises(StructuralError):
            backend.infer(np.zeros((1, 3, 32, 32), dtype=np.float32), 0)


class TestGraphBackend:
    def test_constant_pose_graph_recovery(self, small_grid, capture_k, tmp_path, rng):
        k_in = rescale_intrinsics(capture_k, 64, 64)
        script = PoseScript(9, capture_k, tz_range=(0.4, 1.0))
        pose, hand = script.sample(0)
        heads = encode_ground_truth(pose, hand, small_grid, k_in)
        path = tmp_path / "constant.pt2"
        export_constant_graph(heads, path)

        backend = GraphBackend(path, small_grid)
        raw = backend.infer(zero_tensor(), 0)
        det = filter_detections(decode_heads(raw, small_grid, k_in))
        assert det is not None
        assert np.allclose(det.pose.translation, pose.translation, atol=1e-6)
        assert np.allclose(det.pose.rotation, pose.rotation, atol=1e-6)
        # Overall metric view of the same claim.
        assert add_tool(pose, det.pose, rng.uniform(-0.1, 0.1, (50, 3))) < 1e-6

    def test_zero_tensor_yields_finite_contract_shapes(self, small_grid, capture_k, tmp_path):
        k_in = rescale_intrinsics(capture_k, 64, 64)
        script = PoseScript(2, capture_k, tz_range=(0.4, 1.0))
        pose, hand = script.sample(5)
        path = tmp_path / "g.pt2"
        export_constant_graph(encode_ground_truth(pose, hand, small_grid, k_in), path)
        backend = GraphBackend(path, small_grid)
        raw = backend.infer(zero_tensor(), 0)
        n = len(small_grid)
        assert raw.class_logit.shape == (n,)
        assert raw.box_regress.shape == (n, 4)
        assert raw.rotation.shape == (n, 3)
        assert raw.center_offset.shape == (n, 2)
        assert raw.depth.shape == (n,)
        assert raw.hand.shape == (n, 63)

    def test_deterministic_across_calls(self, small_grid, capture_k, tmp_path):
        k_in = rescale_intrinsics(capture_k, 64, 64)
        script = PoseScript(4, capture_k, tz_range=(0.4, 1.0))
        pose, hand = script.sample(1)
        path = tmp_path / "g.pt2"
        export_constant_graph(encode_ground_truth(pose, hand, small_grid, k_in), path)
        backend = GraphBackend(path, small_grid)
        a = backend.infer(zero_tensor(), 0)
        b = backend.infer(zero_tensor(), 0)
        assert np.array_equal(a.hand, b.hand)
        assert np.array_equal(a.class_logit, b.class_logit)

    def test_wrong_anchor_count_raises_with_shapes(self, small_grid, capture_k, tmp_path):
        wrong_grid = generate_anchors(64, AnchorConfig(strides=(16, 32)))
        k_in = rescale_intrinsics(capture_k, 64, 64)
        script = PoseScript(4, capture_k, tz_range=(0.4, 1.0))
        pose, hand = script.sample(1)
        path = tmp_path / "g.pt2"
        export_constant_graph(encode_ground_truth(pose, hand, small_grid, k_in), path)
        with pytest.raises(BackendError) as exc:
            GraphBackend(path, wrong_grid)
        assert str(len(small_grid)) in str(exc.value)
        assert str(len(wrong_grid)) in str(exc.value)

    def test_missing_file_raises(self, small_grid):
        with pytest.raises(BackendError):
            GraphBackend("/nonexistent/graph.pt2", small_grid)
