import numpy as np
import pytest

from posestream.geometry import CameraIntrinsics, ModelPoints
from posestream.synthetic import make_default_tool_model


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def intrinsics_896():
    return CameraIntrinsics(fx=620.0, fy=620.0, px=448.0, py=252.0, width=896, height=504)


@pytest.fixture
def intrinsics_256():
    return CameraIntrinsics(fx=180.0, fy=175.0, px=128.0, py=126.0, width=256, height=256)


@pytest.fixture
def tool_model() -> ModelPoints:
    return make_default_tool_model(seed=7)


def random_rotation_vec(rng, min_angle=1e-3, max_angle=np.pi - 1e-3):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return axis * rng.uniform(min_angle, max_angle)


def random_pose(rng, tz_range=(0.2, 2.0)):
    from posestream.geometry import Pose6DoF

    return Pose6DoF(
        rotation=random_rotation_vec(rng),
        translation=np.array([
            rng.uniform(-0.3, 0.3),
            rng.uniform(-0.3, 0.3),
            rng.uniform(*tz_range),
        ]),
    )


def random_visible_pose(rng, K, tz_range=(0.2, 2.0), margin=0.1):
    """Pose whose center projects inside the image of intrinsics K."""
    from posestream.geometry import Pose6DoF, recover_translation

    c = np.array([
        rng.uniform(margin * K.width, (1 - margin) * K.width),
        rng.uniform(margin * K.height, (1 - margin) * K.height),
    ])
    t = recover_translation(c, rng.uniform(*tz_range), K)
    return Pose6DoF(rotation=random_rotation_vec(rng), translation=t)
