"""Pinhole flow observation model on pre-normalized image coordinates.

A scene point seen at normalized image position ``x = (x1, x2, 1)`` with
depth ``d`` is stored homogeneously as ``g = (d x1, d x2, d, 1)``.  Under the
incremental camera motion ``E = (R, v)`` it reappears at
``h(E, g) = P_C(I_hat E^-1 g)``, with ``P_C`` the perspective division and
``I_hat`` dropping the homogeneous coordinate.
"""

from __future__ import annotations

import numpy as np

from .liegroup import inverse, mat_se

KAPPA_MIN = 1e-9
PROJ_MIN = 1e-12


class CheiralityError(ValueError):
    """A point lies on or too close to the camera plane.

    ``indices`` lists offending observation indices when known.
    """

    def __init__(self, message: str, indices=()):
        super().__init__(message)
        self.indices = tuple(int(i) for i in indices)


def scene_point(x, d: float) -> np.ndarray:
    """Homogeneous scene point from image point ``(x1, x2[, 1])`` and depth."""
    if not d > 0:
        raise ValueError(f"depth must be positive, got {d}")
    x = np.asarray(x, dtype=float)
    return np.array([d * x[0], d * x[1], d, 1.0])


def scene_points(x, d) -> np.ndarray:
    """Vectorized :func:`scene_point`: (n, 2) image points, (n,) depths -> (n, 4)."""
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("depths must be positive")
    return np.column_stack([d * x[:, 0], d * x[:, 1], d, np.ones_like(d)])


def project(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if abs(p[2]) <= PROJ_MIN:
        raise CheiralityError(f"cannot project point with third coordinate {p[2]:.3e}")
    out = p / p[2]
    out[2] = 1.0
    return out


def camera_coords(E, g) -> np.ndarray:
    """``I_hat E^-1 g`` for one point (4,) or a stack (n, 4)."""
    Einv = inverse(E)
    return (np.asarray(g, dtype=float) @ Einv.T)[..., :3]


def kappa(E, g):
    """Projective depth ``e3^T I_hat E^-1 g`` of the point(s) in the new frame."""
    return camera_coords(E, g)[..., 2]


def _guard(k) -> None:
    bad = np.flatnonzero(np.abs(np.atleast_1d(k)) < KAPPA_MIN)
    if bad.size:
        raise CheiralityError(
            f"{bad.size} point(s) at the camera plane: indices {bad.tolist()}", bad
        )


def observe(E, g) -> np.ndarray:
    """Predicted projective position ``h(E, g)``; stacks of g are supported."""
    p = camera_coords(E, g)
    _guard(p[..., 2])
    out = p / p[..., 2:3]
    out[..., 2] = 1.0
    return out


def dh(E, g, omega) -> np.ndarray:
    """Directional derivative of :func:`observe` along ``E exp(t Omega)`` at t = 0.

    ``omega`` is a twist 6-vector.
    """
    Einv = inverse(E)
    w = Einv @ np.asarray(g, dtype=float)
    p = w[:3]
    k = p[2]
    _guard(k)
    q = (mat_se(omega) @ w)[:3]
    out = -q / k + (q[2] / k**2) * p
    out[2] = 0.0
    return out
