import numpy as np
import pytest

from se3filter.camera import scene_points
from se3filter.liegroup import exp_se3


def random_pose(rng, rot=0.3, trans=0.5):
    xi = np.concatenate([rng.uniform(-rot, rot, 3), rng.uniform(-trans, trans, 3)])
    return exp_se3(xi)


def random_instance(rng, n=1):
    """Pose, scene points (depths in [2, 50]), noisy observations and a direction."""
    E = random_pose(rng)
    x = rng.uniform(-0.5, 0.5, (n, 2))
    d = rng.uniform(2.0, 50.0, n)
    g = scene_points(x, d)
    y = np.column_stack([rng.uniform(-0.6, 0.6, (n, 2)), np.ones(n)])
    omega = rng.standard_normal(6)
    return E, g, y, omega


def random_spd(rng, k):
    M = rng.standard_normal((k, k))
    return M @ M.T + k * np.eye(k)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
