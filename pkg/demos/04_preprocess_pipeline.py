"""Frame preprocessing: YUV420 -> RGB -> 256x256 tensor, bit-stable.

The capture side hands over planar I420 frames; the server converts,
resizes anisotropically, and normalizes into the network input tensor,
rescaling the camera intrinsics to match.
"""

import numpy as np

from posestream.bench import default_capture_intrinsics
from posestream.preprocess import (
    bilinear_resize,
    denormalize,
    normalize,
    preprocess,
    rgb_to_yuv420,
    yuv420_to_rgb,
)

rng = np.random.default_rng(3)
K = default_capture_intrinsics(896, 504)

# Synthesize an RGB frame with smooth content, then take it to I420.
yy, xx = np.mgrid[0:504, 0:896]
rgb = np.stack([
    (xx * 255 / 895), (yy * 255 / 503), ((xx + yy) * 255 / (895 + 503)),
], axis=-1).astype(np.uint8)
frame = rgb_to_yuv420(rgb, frame_id=0, timestamp_us=0)
print("I420 planes:", frame.y.shape, frame.u.shape, frame.v.shape)

back = yuv420_to_rgb(frame)
print("YUV round-trip max error:", np.abs(back.astype(int) - rgb.astype(int)).max(),
      "(chroma is 2x2 subsampled)")

small = bilinear_resize(back, 256, 256)
print("resized:", small.shape, " value range preserved:",
      (small.min() >= back.min(), small.max() <= back.max()))

tensor = normalize(small)
print("network tensor:", tensor.shape, tensor.dtype,
      "channel means:", np.round(tensor.mean(axis=(0, 2, 3)), 3))
print("denormalize inverts exactly:", np.array_equal(denormalize(tensor), small))

# The one-call composition, including the intrinsics rescale.
tensor2, K_net = preprocess(frame, K)
print("\npreprocess() equals the staged pipeline:", np.array_equal(tensor, tensor2))
print("capture fx=%.1f -> network fx=%.2f (x%d/%d)" % (K.fx, K_net.fx, 256, K.width))
print("capture fy=%.1f -> network fy=%.2f (x%d/%d)" % (K.fy, K_net.fy, 256, K.height))
