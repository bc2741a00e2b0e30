import numpy as np
import pytest

from posestream.errors import ConfigError, DomainError, StructuralError
from posestream.geometry import CameraIntrinsics
from posestream.preprocess import (
    DEFAULT_NORM_MEAN,
    DEFAULT_NORM_STD,
    FrameYUV420,
    bilinear_resize,
    denormalize,
    normalize,
    preprocess,
    read_frame_file,
    rgb_to_yuv420,
    write_frame_file,
    yuv420_to_rgb,
)


def flat_frame(w, h, y, u, v, **kw):
    return FrameYUV420(
        width=w, height=h,
        y=np.full((h, w), y, np.uint8),
        u=np.full((h // 2, w // 2), u, np.uint8),
        v=np.full((h // 2, w // 2), v, np.uint8),
        **kw,
    )


def random_frame(rng, w, h):
    return FrameYUV420(
        width=w, height=h,
        y=rng.integers(0, 256, size=(h, w), dtype=np.uint8),
        u=rng.integers(0, 256, size=(h // 2, w // 2), dtype=np.uint8),
        v=rng.integers(0, 256, size=(h // 2, w // 2), dtype=np.uint8),
    )


def reference_yuv_to_rgb(frame, full_range=True):
    """Scalar reference for BT.601 conversion with nearest chroma upsampling."""
    out = np.zeros((frame.height, frame.width, 3), dtype=np.float64)
    for row in range(frame.height):
        for col in range(frame.width):
            y = float(frame.y[row, col])
            u = float(frame.u[row // 2, col // 2]) - 128.0
            v = float(frame.v[row // 2, col // 2]) - 128.0
            if not full_range:
                y = (y - 16.0) * 255.0 / 219.0
                u *= 255.0 / 224.0
                v *= 255.0 / 224.0
            out[row, col, 0] = y + 1.402 * v
            out[row, col, 1] = y - 0.344136 * u - 0.714136 * v
            out[row, col, 2] = y + 1.772 * u
    return np.clip(np.round(out), 0, 255)


def reference_bilinear(img, out_w, out_h):
    """Direct evaluation of the half-pixel bilinear formula, float64."""
    in_h, in_w = img.shape[:2]
    out = np.zeros((out_h, out_w, img.shape[2]), dtype=np.float64)
    for oy in range(out_h):
        for ox in range(out_w):
            sx = (ox + 0.5) * in_w / out_w - 0.5
            sy = (oy + 0.5) * in_h / out_h - 0.5
            x0, y0 = int(np.floor(sx)), int(np.floor(sy))
            wx, wy = sx - x0, sy - y0
            x0c, x1c = np.clip([x0, x0 + 1], 0, in_w - 1)
            y0c, y1c = np.clip([y0, y0 + 1], 0, in_h - 1)
            top = img[y0c, x0c] * (1 - wx) + img[y0c, x1c] * wx
            bot = img[y1c, x0c] * (1 - wx) + img[y1c, x1c] * wx
            out[oy, ox] = top * (1 - wy) + bot * wy
    return np.round(out)


class TestYUVToRGB:
    def test_neutral_gray(self):
        rgb = yuv420_to_rgb(flat_frame(8, 6, 128, 128, 128))
        assert np.all(rgb == 128)

    def test_peak_white(self):
        rgb = yuv420_to_rgb(flat_frame(8, 6, 255, 128, 128))
        assert np.all(rgb == 255)

    def test_black(self):
        assert np.all(yuv420_to_rgb(flat_frame(4, 4, 0, 128, 128)) == 0)

    def test_studio_range_anchors(self):
        assert np.all(yuv420_to_rgb(flat_frame(4, 4, 235, 128, 128), full_range=False) == 255)
        assert np.all(yuv420_to_rgb(flat_frame(4, 4, 16, 128, 128), full_range=False) == 0)

    def test_matches_scalar_reference(self, rng):
        for _ in range(5):
            frame = random_frame(rng, 16, 12)
            got = yuv420_to_rgb(frame).astype(np.float64)
            want = reference_yuv_to_rgb(frame)
            assert np.max(np.abs(got - want)) <= 1.0

    def test_studio_matches_scalar_reference(self, rng):
        frame = random_frame(rng, 16, 12)
        got = yuv420_to_rgb(frame, full_range=False).astype(np.float64)
        want = reference_yuv_to_rgb(frame, full_range=False)
        assert np.max(np.abs(got - want)) <= 1.0

    def test_plane_size_validation(self):
        with pytest.raises(StructuralError):
            FrameYUV420(width=8, height=6, y=np.zeros((6, 8), np.uint8),
                        u=np.zeros((3, 3), np.uint8), v=np.zeros((3, 4), np.uint8))

    def test_odd_dimensions_rejected(self):
        with pytest.raises(StructuralError):
            FrameYUV420(width=7, height=6, y=np.zeros((6, 7), np.uint8),
                        u=np.zeros((3, 3), np.uint8), v=np.zeros((3, 3), np.uint8))


class TestRGBToYUVRoundTrip:
    def test_round_trip_within_two(self, rng):
        # Chroma is constant per 2x2 block so only quantization remains.
        for _ in range(5):
            block = rng.integers(0, 256, size=(6, 8, 3))
            rgb = np.repeat(np.repeat(block, 2, axis=0), 2, axis=1).astype(np.uint8)
            back = yuv420_to_rgb(rgb_to_yuv420(rgb))
            assert np.max(np.abs(back.astype(int) - rgb.astype(int))) <= 2

    def test_luma_only_content_round_trips(self, rng):
        gray = rng.integers(0, 256, size=(12, 16), dtype=np.uint8)
        rgb = np.stack([gray] * 3, axis=-1)
        back = yuv420_to_rgb(rgb_to_yuv420(rgb))
        assert np.max(np.abs(back.astype(int) - rgb.astype(int))) <= 2

    def test_studio_range_round_trip(self, rng):
        block = rng.integers(0, 256, size=(4, 4, 3))
        rgb = np.repeat(np.repeat(block, 2, axis=0), 2, axis=1).astype(np.uint8)
        back = yuv420_to_rgb(rgb_to_yuv420(rgb, full_range=False), full_range=False)
        assert np.max(np.abs(back.astype(int) - rgb.astype(int))) <= 2


class TestBilinearResize:
    def test_identity_is_byte_exact(self, rng):
        img = rng.integers(0, 256, size=(24, 36, 3), dtype=np.uint8)
        assert np.array_equal(bilinear_resize(img, 36, 24), img)

    def test_constant_image_stays_constant(self):
        img = np.full((30, 40, 3), 77, np.uint8)
        assert np.all(bilinear_resize(img, 256, 256) == 77)

    def test_gradient_matches_hand_formula(self, rng):
        img = rng.integers(0, 256, size=(4, 4, 3), dtype=np.uint8)
        got = bilinear_resize(img, 8, 6).astype(np.float64)
        want = reference_bilinear(img.astype(np.float64), 8, 6)
        assert np.max(np.abs(got - want)) <= 1.0

    def test_downscale_matches_hand_formula(self, rng):
        img = rng.integers(0, 256, size=(10, 14, 3), dtype=np.uint8)
        got = bilinear_resize(img, 5, 3).astype(np.float64)
        want = reference_bilinear(img.astype(np.float64), 5, 3)
        assert np.max(np.abs(got - want)) <= 1.0

    def test_convex_bounds_per_channel(self, rng):
        for _ in range(100):
            h = int(rng.integers(2, 24))
            w = int(rng.integers(2, 24))
            img = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
            out = bilinear_resize(img, int(rng.integers(1, 40)), int(rng.integers(1, 40)))
            for c in range(3):
                assert out[..., c].min() >= img[..., c].min()
                assert out[..., c].max() <= img[..., c].max()

    def test_rejects_zero_target(self, rng):
        img = rng.integers(0, 256, size=(4, 4, 3), dtype=np.uint8)
        with pytest.raises(DomainError):
            bilinear_resize(img, 0, 10)

    def test_rejects_empty_source(self):
        with pytest.raises(StructuralError):
            bilinear_resize(np.zeros((0, 4, 3), np.uint8), 8, 8)


class TestNormalize:
    def test_zero_image_closed_form(self):
        tensor = normalize(np.zeros((256, 256, 3), np.uint8))
        for c in range(3):
            expected = -DEFAULT_NORM_MEAN[c] / DEFAULT_NORM_STD[c]
            assert np.allclose(tensor[0, c], expected, atol=1e-6)

    def test_shape_and_dtype(self, rng):
        tensor = normalize(rng.integers(0, 256, size=(256, 256, 3), dtype=np.uint8))
        assert tensor.shape == (1, 3, 256, 256)
        assert tensor.dtype == np.float32

    def test_mean_pixel_maps_near_zero(self):
        img = np.zeros((256, 256, 3), np.uint8)
        for c in range(3):
            img[..., c] = round(255 * DEFAULT_NORM_MEAN[c])
        tensor = normalize(img)
        for c in range(3):
            assert np.max(np.abs(tensor[0, c])) <= 1.0 / (255 * DEFAULT_NORM_STD[c]) + 1e-6

    def test_denormalize_inverts_exactly(self, rng):
        img = rng.integers(0, 256, size=(256, 256, 3), dtype=np.uint8)
        assert np.array_equal(denormalize(normalize(img)), img)

    def test_rejects_wrong_size(self, rng):
        with pytest.raises(StructuralError):
            normalize(rng.integers(0, 256, size=(128, 256, 3), dtype=np.uint8))


class TestPreprocess:
    def test_neutral_gray_constant_channels(self, intrinsics_896):
        frame = flat_frame(896, 504, 128, 128, 128)
        tensor, _ = preprocess(frame, intrinsics_896)
        for c in range(3):
            expected = (128.0 / 255.0 - DEFAULT_NORM_MEAN[c]) / DEFAULT_NORM_STD[c]
            assert np.allclose(tensor[0, c], expected, atol=1e-6)

    def test_output_intrinsics_rescaled(self, intrinsics_896):
        frame = flat_frame(896, 504, 100, 120, 140)
        _, k_out = preprocess(frame, intrinsics_896)
        assert k_out.width == 256 and k_out.height == 256
        assert np.isclose(k_out.fx, intrinsics_896.fx * 256 / 896)
        assert np.isclose(k_out.fy, intrinsics_896.fy * 256 / 504)

    def test_composition_identity(self, rng, intrinsics_896):
        frame = random_frame(rng, 896, 504)
        tensor, _ = preprocess(frame, intrinsics_896)
        staged = normalize(bilinear_resize(yuv420_to_rgb(frame), 256, 256))
        assert np.array_equal(tensor, staged)

    def test_shape_for_any_input_size(self, rng):
        for w, h in [(64, 64), (896, 504), (320, 240), (128, 256)]:
            K = CameraIntrinsics(fx=100.0, fy=100.0, px=w / 2, py=h / 2, width=w, height=h)
            tensor, _ = preprocess(random_frame(rng, w, h), K)
            assert tensor.shape == (1, 3, 256, 256)

    def test_deterministic(self, rng, intrinsics_896):
        frame = random_frame(rng, 896, 504)
        a, _ = preprocess(frame, intrinsics_896)
        b, _ = preprocess(frame, intrinsics_896)
        assert np.array_equal(a, b)

    def test_intrinsics_size_mismatch(self, rng, intrinsics_896):
        with pytest.raises(ConfigError):
            preprocess(random_frame(rng, 64, 64), intrinsics_896)


class TestFrameFiles:
    def test_round_trip(self, rng, tmp_path):
        frame = random_frame(rng, 32, 24)
        frame = FrameYUV420(width=32, height=24, y=frame.y, u=frame.u, v=frame.v,
                            frame_id=17, timestamp_us=123456)
        path = tmp_path / "frame_000017.i420"
        write_frame_file(frame, path)
        loaded = read_frame_file(path)
        assert loaded.frame_id == 17
        assert loaded.timestamp_us == 123456
        assert np.array_equal(loaded.y, frame.y)
        assert np.array_equal(loaded.u, frame.u)
        assert np.array_equal(loaded.v, frame.v)

    def test_blob_size_validation(self):
        with pytest.raises(StructuralError):
            FrameYUV420.from_planes_bytes(b"\x00" * 10, 8, 8)
