"""Second-order minimum energy filter for the per-frame camera motion on SE(3).

The estimate ``E`` and the 6x6 matrix ``P`` (decayed inverse of the value
function Hessian, in vec coordinates) follow the coupled ODEs

    dE/dt = E mat(Omega_E),  Omega_E = -P vec(sum_k Pr(A_k(E)))
    dP/dt = -alpha P + S^-1 - P sum_k (Gt_{vec Pr A_k} + D_k) P
            - Gt*_{Omega_E} P + P (Gt*_{Omega_E})^T

where ``Pr(A_k)`` is the left-trivialized gradient of the k-th observation
energy and ``Gt_{vec Pr A_k} + D_k`` its left-trivialized Riemannian Hessian.
Time integration lives in :mod:`se3filter.integrate`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import CheiralityError, KAPPA_MIN, scene_points
from .liegroup import (
    GRAM,
    check_pose,
    gamma_tilde,
    gamma_tilde_star,
    inverse,
    kron_se,
    kron_se_sum,
    kron_se_t,
    kron_se_t_sum,
    mat_se,
    vec_ext,
)


def _check_spd(name: str, M: np.ndarray, size: int) -> np.ndarray:
    M = np.array(M, dtype=float)
    if M.shape != (size, size):
        raise ValueError(f"{name} must be {size}x{size}, got {M.shape}")
    if not np.allclose(M, M.T, rtol=0, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise ValueError(f"{name} must be symmetric")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise ValueError(f"{name} must be positive definite") from None
    return M


def weight_s(s1: float, s2: float, lam: float = 1.0) -> np.ndarray:
    """``lam * diag(s1, s1, s1, s2, s2, s2)``."""
    return lam * np.diag([s1, s1, s1, s2, s2, s2]).astype(float)


@dataclass
class FilterConfig:
    alpha: float = 0.0
    S: np.ndarray = field(default_factory=lambda: weight_s(1e-3, 1e-6))
    Q: np.ndarray = field(default_factory=lambda: 0.1 * np.eye(3))
    E0: np.ndarray = field(default_factory=lambda: np.eye(4))
    p0_scale: float = 1.0
    h: float = 1e-3
    substeps: int = 1000
    outlier_quantile: float = 0.8
    symmetrize_p: bool = False
    P0: np.ndarray | None = None
    # safeguards; neither is active on well-posed noise-free problems
    psd_hessian: bool = True  # clip negative curvature of the observation Hessian
    stability_limit: float = 1.0  # split substeps so that h * rho(P H) <= this

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        self.S = _check_spd("S", self.S, 6)
        self.Q = _check_spd("Q", self.Q, 3)
        self.E0 = np.array(self.E0, dtype=float)
        check_pose(self.E0)
        if not self.p0_scale > 0:
            raise ValueError(f"p0_scale must be > 0, got {self.p0_scale}")
        if self.P0 is not None:
            self.P0 = _check_spd("P0", self.P0, 6)
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValueError(f"substeps must be a positive integer, got {self.substeps}")
        self.substeps = int(self.substeps)
        if not self.h > 0 or abs(self.h * self.substeps - 1.0) > 1e-9:
            raise ValueError(
                f"h * substeps must span one frame (h={self.h}, substeps={self.substeps})"
            )
        if not self.stability_limit > 0:
            raise ValueError(f"stability_limit must be > 0, got {self.stability_limit}")
        if not 0 < self.outlier_quantile <= 1:
            raise ValueError(f"outlier_quantile must lie in (0, 1], got {self.outlier_quantile}")
        self.S_inv = np.linalg.inv(self.S)


@dataclass
class FilterState:
    E: np.ndarray
    P: np.ndarray
    t: float = 0.0


@dataclass
class ObservationBatch:
    """Scene points ``g`` (n, 4) with their observed positions ``y`` (n, 3)."""

    g: np.ndarray
    y: np.ndarray
    frame: int = 0
    x: np.ndarray | None = None  # image coordinates at frame start, if known
    d: np.ndarray | None = None  # depths, if known

    def __post_init__(self):
        self.g = np.atleast_2d(np.asarray(self.g, dtype=float))
        self.y = np.atleast_2d(np.asarray(self.y, dtype=float))
        if self.g.size == 0:
            self.g = self.g.reshape(0, 4)
            self.y = self.y.reshape(0, 3)
        if self.g.shape[1] != 4 or self.y.shape[1] != 3 or len(self.g) != len(self.y):
            raise ValueError(f"bad batch shapes g={self.g.shape}, y={self.y.shape}")
        if not np.all(self.g[:, 3] == 1.0):
            raise ValueError("scene points must have homogeneous coordinate 1")
        if not np.all(self.y[:, 2] == 1.0):
            raise ValueError("observations must have third coordinate 1")

    def __len__(self) -> int:
        return len(self.g)

    @classmethod
    def from_image(cls, x, d, y2, frame: int = 0) -> "ObservationBatch":
        """Batch from image coordinates ``x`` (n, 2), depths ``d`` and observed ``y2`` (n, 2)."""
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        d = np.asarray(d, dtype=float).reshape(-1)
        y2 = np.asarray(y2, dtype=float).reshape(-1, 2)
        y = np.column_stack([y2, np.ones(len(y2))])
        return cls(scene_points(x, d), y, frame, x, d)

    def subset(self, mask) -> "ObservationBatch":
        sub = lambda a: None if a is None else a[mask]
        return ObservationBatch(self.g[mask], self.y[mask], self.frame, sub(self.x), sub(self.d))


_SQRT_G = np.sqrt(np.diag(GRAM))


def init(cfg: FilterConfig) -> FilterState:
    P = cfg.P0.copy() if cfg.P0 is not None else cfg.p0_scale * np.eye(6)
    return FilterState(E=cfg.E0.copy(), P=P, t=0.0)


def _ordered_sum(a: np.ndarray) -> np.ndarray:
    """Sum over the leading axis in ascending index order."""
    a = np.ascontiguousarray(a)
    if a.ndim == 1:
        # 1-d sums use pairwise summation; force a sequential scan
        return np.cumsum(a)[-1] if len(a) else 0.0
    return a.sum(axis=0)


def _geometry(E, g):
    w = np.asarray(g, dtype=float) @ inverse(E).T
    p = w[:, :3]
    k = p[:, 2]
    bad = np.flatnonzero(np.abs(k) < KAPPA_MIN)
    if bad.size:
        raise CheiralityError(
            f"{bad.size} point(s) at the camera plane: indices {bad.tolist()}", bad
        )
    return w, p, k


def residuals(E, batch: ObservationBatch) -> np.ndarray:
    """``y_k - h_k(E)`` for every observation, shape (n, 3)."""
    _, p, k = _geometry(E, batch.g)
    r = batch.y - p / k[:, None]
    r[:, 2] = 0.0
    return r


def obs_energy(E, batch: ObservationBatch, Q) -> float:
    """``1/2 sum_k |y_k - h_k(E)|_Q^2``."""
    r = residuals(E, batch)
    return 0.5 * float(_ordered_sum(np.einsum("ni,ij,nj->n", r, Q, r)))


def hamiltonian(E, mu, batch: ObservationBatch, cfg: FilterConfig, t: float = 0.0) -> float:
    """Optimal left-trivialized Hamiltonian with ``t0 = 0``; diagnostic only."""
    mu = np.asarray(mu, dtype=float)
    M = mat_se(mu)
    quad = float(np.tensordot(M, mat_se(cfg.S_inv @ mu), axes=2))
    return np.exp(-cfg.alpha * t) * obs_energy(E, batch, cfg.Q) - 0.5 * np.exp(cfg.alpha * t) * quad


def _parts(E, g, y, Q):
    g = np.atleast_2d(np.asarray(g, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    w, p, k = _geometry(E, g)
    r = y - p / k[:, None]
    r[:, 2] = 0.0
    Qr = r @ Q.T
    pQr = np.einsum("ni,ni->n", p, Qr)
    # u = J^T Q r with J = dh/dp = I/k - p e3^T / k^2
    u = Qr / k[:, None]
    u[:, 2] -= pQr / k**2
    A = np.zeros((len(g), 4, 4))
    A[:, :3, :] = u[:, :, None] * w[:, None, :]
    return w, p, k, r, Qr, pQr, A


def a_matrices(E, g, y, Q) -> np.ndarray:
    """Stack of ``A_k(E)`` (n, 4, 4); ``<A_k, Omega>`` is the derivative of
    ``1/2 |y_k - h_k|_Q^2`` along ``E exp(t Omega)``."""
    return _parts(E, g, y, Q)[-1]


def a_matrix(E, g, y, Q) -> np.ndarray:
    return a_matrices(E, g, y, Q)[0]


def grad_terms(E, batch: ObservationBatch, Q) -> np.ndarray:
    """Per-observation ``vec(Pr(A_k))``, shape (n, 6)."""
    return vec_ext(a_matrices(E, batch.g, batch.y, Q))


def grad_obs(E, batch: ObservationBatch, Q) -> np.ndarray:
    """Left-trivialized gradient ``vec(sum_k Pr(A_k(E)))`` as a twist."""
    return _ordered_sum(grad_terms(E, batch, Q))


def d_terms(E, g, y, Q) -> np.ndarray:
    """The six Kronecker-form pieces of ``D_k``; shape (6, n, 6, 6).

    ``D_k vec(Omega) = vec_ext(d/dt A_k(E exp(t Omega)))``.  Writing
    ``w = E^-1 g``, ``p = I_hat w``, ``k = e3^T p``, ``r = y - p/k``,
    ``J = I/k - p e3^T/k^2`` and ``W = w w^T``, the pieces are

    1. ``k^-2 (Q r) e3^T  (x) W``            rate of 1/k in the first part of A
    2. ``-2 k^-3 (p^T Q r) e3 e3^T  (x) W``  rate of 1/k^2 in the second part
    3. ``k^-2 e3 w^T  (x)^T  (Q r) w^T``      rate of p^T in the second part
    4. ``-A  (x)^T  I``                       rate of w^T (both parts)
    5. ``-k^-2 J^T Q p e3^T  (x) W``         rate of r through 1/k
    6. ``k^-1 J^T Q  (x) W``                 rate of r through p

    where ``(x)`` is :func:`kron_se`, ``(x)^T`` is :func:`kron_se_t` and
    3-vectors / 3x3 blocks are padded into the top rows of 4x4 matrices.
    Pieces 1-4 scale with the residual; 5 and 6 do not.
    """
    X1, X2, X3, Y3, X4, X5, X6, W = _d_factors(E, g, y, Q)
    eye4 = np.broadcast_to(np.eye(4), X4.shape)
    return np.stack([
        kron_se(X1, W),
        kron_se(X2, W),
        kron_se_t(X3, Y3),
        kron_se_t(X4, eye4),
        kron_se(X5, W),
        kron_se(X6, W),
    ])


def _d_factors(E, g, y, Q, parts=None):
    Q = np.asarray(Q, dtype=float)
    w, p, k, r, Qr, pQr, A = _parts(E, g, y, Q) if parts is None else parts
    n = len(w)
    W = w[:, :, None] * w[:, None, :]
    k2 = k**2

    X1 = np.zeros((n, 4, 4))
    X1[:, :3, 2] = Qr / k2[:, None]

    X2 = np.zeros((n, 4, 4))
    X2[:, 2, 2] = -2.0 * pQr / k**3

    X3 = np.zeros((n, 4, 4))
    X3[:, 2, :] = w / k2[:, None]
    Y3 = np.zeros((n, 4, 4))
    Y3[:, :3, :] = Qr[:, :, None] * w[:, None, :]

    # J^T Q = (I/k - e3 p^T / k^2) Q
    JtQ = Q[None, :, :] / k[:, None, None]
    JtQ[:, 2, :] -= (p @ Q) / k2[:, None]
    X5 = np.zeros((n, 4, 4))
    X5[:, :3, 2] = -np.einsum("nij,nj->ni", JtQ, p) / k2[:, None]

    X6 = np.zeros((n, 4, 4))
    X6[:, :3, :3] = JtQ / k[:, None, None]

    return X1, X2, X3, Y3, -A, X5, X6, W


def d_matrix(E, g, y, Q) -> np.ndarray:
    """``D_k(E)`` for a single observation."""
    return d_terms(E, g, y, Q)[:, 0].sum(axis=0)


def grad_and_hessian(E, batch: ObservationBatch, Q):
    """``vec(sum_k Pr A_k)`` and ``sum_k (Gt_{vec Pr A_k} + D_k)`` in one pass.

    The second is the vec form of the left-trivialized Riemannian Hessian
    of the observation energy.
    """
    Q = np.asarray(Q, dtype=float)
    parts = _parts(E, batch.g, batch.y, Q)
    grad = _ordered_sum(vec_ext(parts[-1]))
    X1, X2, X3, Y3, X4, X5, X6, W = _d_factors(E, batch.g, batch.y, Q, parts)
    eye4 = np.broadcast_to(np.eye(4), X4.shape)
    # pieces sharing a right factor are merged before the Kronecker form
    D = kron_se_sum(X1 + X2 + X5 + X6, W)
    D += kron_se_t_sum(np.concatenate([X3, X4]), np.concatenate([Y3, eye4]))
    return grad, gamma_tilde(grad) + D


def hessian_obs(E, batch: ObservationBatch, Q) -> np.ndarray:
    return grad_and_hessian(E, batch, Q)[1]


def rhs_state(state: FilterState, batch: ObservationBatch, cfg: FilterConfig) -> np.ndarray:
    """Left-trivialized velocity ``Omega_E`` of the estimate (a twist)."""
    return -state.P @ grad_obs(state.E, batch, cfg.Q)


def _p_rate(P, H, cfg: FilterConfig, omega_e) -> np.ndarray:
    out = -cfg.alpha * P + cfg.S_inv
    if H is not None:
        out = out - P @ H @ P
    Gs = gamma_tilde_star(omega_e)
    return out - Gs @ P + P @ Gs.T


def rhs_p(state: FilterState, batch: ObservationBatch, cfg: FilterConfig, omega_e) -> np.ndarray:
    """Time derivative of ``P`` given the pose velocity ``omega_e``."""
    H = hessian_obs(state.E, batch, cfg.Q) if len(batch) else None
    if H is not None and cfg.psd_hessian:
        H = clip_hessian(H)
    return _p_rate(state.P, H, cfg, omega_e)


def clip_hessian(H: np.ndarray) -> np.ndarray:
    """Nearest positive semidefinite operator to ``H`` in the trace metric.

    ``H`` is self-adjoint for the metric, so ``G^1/2 H G^-1/2`` is symmetric;
    its negative eigenvalues are set to zero.  Returns ``H`` itself when it
    has no negative curvature.
    """
    M = _SQRT_G[:, None] * H / _SQRT_G[None, :]
    M = 0.5 * (M + M.T)
    lam, V = np.linalg.eigh(M)
    if lam.min() >= 0:
        return H
    M = (V * np.maximum(lam, 0.0)) @ V.T
    return M * _SQRT_G[None, :] / _SQRT_G[:, None]


def rhs_with_rate(state: FilterState, batch: ObservationBatch, cfg: FilterConfig):
    """``(Omega_E, dP/dt, rho)`` where ``rho`` is the spectral radius of ``P H``.

    ``rho`` bounds the fastest local time scale of the coupled system and
    is used to keep explicit steps inside their stability region.
    """
    if not len(batch):
        omega = np.zeros(6)
        return omega, _p_rate(state.P, None, cfg, omega), 0.0
    grad, H = grad_and_hessian(state.E, batch, cfg.Q)
    if cfg.psd_hessian:
        H = clip_hessian(H)
    omega = -state.P @ grad
    PH = state.P @ H
    rho = float(np.abs(np.linalg.eigvals(PH)).max()) if np.all(np.isfinite(PH)) else np.inf
    return omega, _p_rate(state.P, H, cfg, omega), rho


def rhs(state: FilterState, batch: ObservationBatch, cfg: FilterConfig):
    """``(Omega_E, dP/dt)`` sharing one evaluation of the observation terms."""
    return rhs_with_rate(state, batch, cfg)[:2]


def reject_outliers(E, batch: ObservationBatch, cfg: FilterConfig) -> ObservationBatch:
    """Drop the high-residual tail above the ``outlier_quantile`` quantile.

    Keeps points whose residual norm is strictly below the empirical
    quantile; a quantile of 1 keeps everything, and if the rule would keep
    nothing (ties) the batch is returned unchanged.
    """
    if cfg.outlier_quantile >= 1.0 or len(batch) == 0:
        return batch
    energy = np.linalg.norm(residuals(E, batch), axis=1)
    lam = np.quantile(energy, cfg.outlier_quantile)
    keep = energy < lam
    if not keep.any():
        return batch
    return batch.subset(keep)


def metric_hessian(H_vec: np.ndarray) -> np.ndarray:
    """Raise a Euclidean coordinate Hessian to its trace-metric operator form."""
    return np.linalg.solve(GRAM, H_vec)
