"""Synthetic ego-motion sequences and per-frame error metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import KAPPA_MIN, camera_coords, scene_points
from .filter import ObservationBatch
from .liegroup import exp_se3

# Twists (rad/frame, m/frame) used by successive schedule segments; the
# first has a ~6.4 degree rotation so the identity start is clearly wrong.
DEFAULT_TWISTS = (
    (0.05, -0.08, 0.06, 0.10, -0.05, 1.00),
    (-0.06, 0.07, -0.05, -0.20, 0.05, 0.80),
    (0.04, 0.09, -0.03, 0.15, 0.10, 1.20),
)
DEFAULT_FOV = (-0.5, 0.5)


@dataclass
class TwistSchedule:
    """Piecewise-constant twist: segment i is active from its start frame on."""

    segments: list = field(default_factory=list)

    def __post_init__(self):
        if not self.segments:
            raise ValueError("schedule needs at least one segment")
        starts = [int(s) for s, _ in self.segments]
        if starts[0] != 1:
            raise ValueError(f"first segment must start at frame 1, got {starts[0]}")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError(f"segment start frames must increase strictly: {starts}")
        self.segments = [(int(s), np.asarray(tw, dtype=float)) for s, tw in self.segments]

    def twist(self, frame: int) -> np.ndarray:
        active = self.segments[0][1]
        for start, tw in self.segments:
            if start > frame:
                break
            active = tw
        return active

    @classmethod
    def with_jumps(cls, discontinuity_frames=(), twists=DEFAULT_TWISTS) -> "TwistSchedule":
        starts = [1] + sorted(int(f) for f in discontinuity_frames)
        return cls([(s, twists[i % len(twists)]) for i, s in enumerate(starts)])


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


def gen_scene(n: int, depth_range=(2.0, 50.0), fov=DEFAULT_FOV, seed: int = 0):
    """``n`` image points uniform in the square ``fov`` box with uniform depths.

    Returns ``(x, d)`` with ``x`` of shape (n, 2) and ``d`` of shape (n,).
    """
    lo_d, hi_d = depth_range
    lo_x, hi_x = fov
    if n < 6:
        raise ValueError(f"need at least 6 points, got {n}")
    if not 0 < lo_d < hi_d:
        raise ValueError(f"bad depth range {depth_range}")
    if not lo_x < hi_x:
        raise ValueError(f"bad field of view {fov}")
    rng = np.random.default_rng(seed)
    x = rng.uniform(lo_x, hi_x, size=(n, 2))
    d = rng.uniform(lo_d, hi_d, size=n)
    return x, d


def gen_observations(schedule: TwistSchedule, scene, frames: int, noise: NoiseSpec = NoiseSpec()):
    """Observation batches for frames ``1..frames`` and the true increments.

    Points that are not in front of the camera after a frame's motion are
    dropped for that frame.  Noise multiplies the first two coordinates of
    each observed position by ``1 + sigma N(0, 1)``.
    """
    x, d = scene
    g = scene_points(x, d)
    rng = np.random.default_rng(noise.seed)
    batches, truth = [], []
    for f in range(1, frames + 1):
        E_gt = exp_se3(schedule.twist(f))
        p = camera_coords(E_gt, g)
        visible = p[:, 2] > KAPPA_MIN
        if not visible.any():
            raise ValueError(f"frame {f}: no scene point is visible")
        xv, dv, gv, pv = x[visible], d[visible], g[visible], p[visible]
        y = pv / pv[:, 2:3]
        y[:, 2] = 1.0
        factor = 1.0 + noise.sigma * rng.standard_normal((len(y), 2))
        if noise.sigma > 0:
            y[:, :2] = y[:, :2] * factor
        batches.append(ObservationBatch(gv, y, f, xv, dv))
        truth.append(E_gt)
    return batches, truth


def rot_error_deg(R_est, R_gt) -> float:
    """Geodesic angle between two rotations, in degrees.

    Equal to ``arccos((tr(R_gt^T R_est) - 1) / 2)``; evaluated through atan2
    so that angles near zero keep full relative precision.
    """
    D = np.asarray(R_gt).T @ np.asarray(R_est)
    c = np.clip((np.trace(D) - 1.0) / 2.0, -1.0, 1.0)
    s = 0.5 * np.linalg.norm([D[2, 1] - D[1, 2], D[0, 2] - D[2, 0], D[1, 0] - D[0, 1]])
    return float(np.degrees(np.arctan2(s, c)))


def trans_error_m(v_est, v_gt) -> float:
    return float(np.linalg.norm(np.asarray(v_est) - np.asarray(v_gt)))


def increment_errors(E_est, E_gt):
    """(rotation error in degrees, translation error in meters) of one increment."""
    return (
        rot_error_deg(E_est[:3, :3], E_gt[:3, :3]),
        trans_error_m(E_est[:3, 3], E_gt[:3, 3]),
    )
