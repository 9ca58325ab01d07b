"""SE(3) / se(3) algebra in the 4x4 homogeneous representation.

Twists are 6-vectors ``(w1, w2, w3, v1, v2, v3)``: rotational part first,
translational part second.  The hat map places them as::

    [[  0, -w3,  w2, v1],
     [ w3,   0, -w1, v2],
     [-w2,  w1,   0, v3],
     [  0,   0,   0,  0]]

The Lie algebra carries the trace inner product ``<A, B> = tr(A^T B)``,
extended to a left-invariant metric on the group.  Its Gram matrix in the
basis above is ``diag(2, 2, 2, 1, 1, 1)``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

PATTERN_TOL = 1e-12
SMALL_ANGLE = 1e-8


class PatternError(ValueError):
    """A 4x4 matrix does not have the se(3) sparsity/antisymmetry pattern."""


def mat_se(z) -> np.ndarray:
    """Hat map: 6-vector (or stack of them) -> se(3) matrix."""
    z = np.asarray(z, dtype=float)
    out = np.zeros(z.shape[:-1] + (4, 4))
    out[..., 0, 1] = -z[..., 2]
    out[..., 0, 2] = z[..., 1]
    out[..., 1, 0] = z[..., 2]
    out[..., 1, 2] = -z[..., 0]
    out[..., 2, 0] = -z[..., 1]
    out[..., 2, 1] = z[..., 0]
    out[..., :3, 3] = z[..., 3:]
    return out


def _read_vec(W: np.ndarray) -> np.ndarray:
    return np.stack(
        [W[..., 2, 1], W[..., 0, 2], W[..., 1, 0],
         W[..., 0, 3], W[..., 1, 3], W[..., 2, 3]],
        axis=-1,
    )


def vec_se(W) -> np.ndarray:
    """Vee map: se(3) matrix -> 6-vector.

    Raises PatternError if ``W`` departs from the se(3) pattern by more than
    ``PATTERN_TOL`` in any entry.
    """
    W = np.asarray(W, dtype=float)
    if W.shape[-2:] != (4, 4):
        raise PatternError(f"expected (..., 4, 4) array, got shape {W.shape}")
    z = _read_vec(W)
    dev = np.max(np.abs(mat_se(z) - W)) if W.size else 0.0
    if dev > PATTERN_TOL:
        raise PatternError(f"matrix is not in se(3): pattern deviation {dev:.3e}")
    return z


def pr_se3(A) -> np.ndarray:
    """Orthogonal projection of a 4x4 matrix onto se(3) under tr(A^T B)."""
    A = np.asarray(A, dtype=float)
    out = np.zeros_like(A)
    R = A[..., :3, :3]
    out[..., :3, :3] = 0.5 * (R - np.swapaxes(R, -1, -2))
    out[..., :3, 3] = A[..., :3, 3]
    return out


def vec_ext(A) -> np.ndarray:
    """``vec_se(pr_se3(A))``, defined for any 4x4 matrix."""
    A = np.asarray(A, dtype=float)
    R = A[..., :3, :3]
    return np.stack(
        [0.5 * (R[..., 2, 1] - R[..., 1, 2]),
         0.5 * (R[..., 0, 2] - R[..., 2, 0]),
         0.5 * (R[..., 1, 0] - R[..., 0, 1]),
         A[..., 0, 3], A[..., 1, 3], A[..., 2, 3]],
        axis=-1,
    )


BASIS = mat_se(np.eye(6))
GRAM = np.einsum("iab,jab->ij", BASIS, BASIS)
BASIS_T = np.ascontiguousarray(np.swapaxes(BASIS, -1, -2))
for _a in (BASIS, BASIS_T, GRAM):
    _a.setflags(write=False)


def inner(A, B) -> float:
    """Trace inner product tr(A^T B)."""
    return float(np.tensordot(np.asarray(A), np.asarray(B), axes=2))


def skew3(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


def exp_se3(xi) -> np.ndarray:
    """Closed-form exponential se(3) -> SE(3).

    Rodrigues for the rotation and the left Jacobian ``V`` for the
    translation; below ``SMALL_ANGLE`` both use their second-order series.
    """
    xi = np.asarray(xi, dtype=float)
    w, v = xi[:3], xi[3:]
    W = skew3(w)
    W2 = W @ W
    theta = float(np.linalg.norm(w))
    if theta < SMALL_ANGLE:
        R = np.eye(3) + W + 0.5 * W2
        V = np.eye(3) + 0.5 * W + W2 / 6.0
    else:
        s, c = np.sin(theta), np.cos(theta)
        t2 = theta * theta
        R = np.eye(3) + (s / theta) * W + ((1.0 - c) / t2) * W2
        V = np.eye(3) + ((1.0 - c) / t2) * W + ((theta - s) / (t2 * theta)) * W2
    E = np.eye(4)
    E[:3, :3] = R
    E[:3, 3] = V @ v
    return E


def inverse(E) -> np.ndarray:
    """Closed-form inverse (R^T, -R^T v) of a rigid motion."""
    E = np.asarray(E, dtype=float)
    out = np.zeros_like(E)
    Rt = np.swapaxes(E[..., :3, :3], -1, -2)
    out[..., :3, :3] = Rt
    out[..., :3, 3] = -np.einsum("...ij,...j->...i", Rt, E[..., :3, 3])
    out[..., 3, 3] = 1.0
    return out


def make_pose(R, v) -> np.ndarray:
    E = np.eye(4)
    E[:3, :3] = R
    E[:3, 3] = v
    return E


def check_pose(E, tol: float = 1e-9) -> None:
    """Raise ValueError unless ``E`` is a valid homogeneous rigid motion."""
    E = np.asarray(E, dtype=float)
    if E.shape != (4, 4):
        raise ValueError(f"pose must be 4x4, got {E.shape}")
    if not np.array_equal(E[3], [0.0, 0.0, 0.0, 1.0]):
        raise ValueError("pose bottom row must be exactly (0, 0, 0, 1)")
    R = E[:3, :3]
    orth = np.linalg.norm(R.T @ R - np.eye(3))
    if orth > tol or abs(np.linalg.det(R) - 1.0) > tol:
        raise ValueError(f"rotation block is not in SO(3) (orthogonality defect {orth:.3e})")


@lru_cache(maxsize=None)
def structure_constants() -> np.ndarray:
    """``c[k, i, j]`` with ``[B_i, B_j] = sum_k c[k, i, j] B_k``."""
    comm = np.einsum("iab,jbc->ijac", BASIS, BASIS)
    comm = comm - np.swapaxes(comm, 0, 1)
    c = np.moveaxis(vec_se(comm), -1, 0)
    c.setflags(write=False)
    return c


@lru_cache(maxsize=None)
def christoffel() -> np.ndarray:
    """Levi-Civita coefficients of the left-invariant trace metric.

    Returns ``G[i, j, k]`` = coefficient of ``B_i`` in ``nabla_{B_j} B_k``,
    obtained from the Koszul formula for left-invariant fields.  With this
    layout ``vec(nabla_X Y) = sum_{jk} G[:, j, k] x^j y^k``.
    """
    c = structure_constants()
    # bracket[i, j, k] = <[B_i, B_j], B_k>
    bracket = np.einsum("lij,lk->ijk", c, GRAM)
    # low[i, j, k] = <nabla_{B_j} B_k, B_i>
    low = 0.5 * (
        np.einsum("jki->ijk", bracket)
        - np.einsum("kij->ijk", bracket)
        + bracket
    )
    table = np.einsum("il,ljk->ijk", np.linalg.inv(GRAM), low)
    table.setflags(write=False)
    return table


def connection(x, y) -> np.ndarray:
    """``vec(nabla_X Y)`` for left-invariant fields with coordinates x, y."""
    return np.einsum("ijk,j,k->i", christoffel(), x, y)


def gamma_tilde(z) -> np.ndarray:
    """``(Gt_z)[i, j] = sum_k G[i, j, k] z[k]``: maps vec(X) to vec(nabla_X Z)."""
    return np.einsum("ijk,k->ij", christoffel(), np.asarray(z, dtype=float))


def gamma_tilde_star(z) -> np.ndarray:
    """``(Gt*_z)[i, k] = sum_j G[i, j, k] z[j]``: maps vec(X) to vec(nabla_Z X).

    Its transpose is the adjoint of that map under the Euclidean pairing of
    6-vectors; use :func:`connection_adjoint` for the trace-metric adjoint.
    """
    return np.einsum("ijk,j->ik", christoffel(), np.asarray(z, dtype=float))


def connection_adjoint(z) -> np.ndarray:
    """Matrix of ``D -> w*_Z D`` with <w*_Z D, T> = <D, nabla_Z T> (trace metric)."""
    Ginv = np.linalg.inv(GRAM)
    return Ginv @ gamma_tilde_star(z).T @ GRAM


def kron_se(A, B) -> np.ndarray:
    """6x6 matrix of ``Omega -> vec_ext(A Omega B)``.

    Accepts stacks: ``A`` and ``B`` of shape (..., 4, 4) give (..., 6, 6).
    """
    A = np.asarray(A, dtype=float)[..., None, :, :]
    B = np.asarray(B, dtype=float)[..., None, :, :]
    return np.swapaxes(vec_ext(A @ BASIS @ B), -1, -2)


def kron_se_t(A, B) -> np.ndarray:
    """6x6 matrix of ``Omega -> vec_ext(A Omega^T B)``."""
    A = np.asarray(A, dtype=float)[..., None, :, :]
    B = np.asarray(B, dtype=float)[..., None, :, :]
    return np.swapaxes(vec_ext(A @ BASIS_T @ B), -1, -2)


def _vec_ext_map() -> np.ndarray:
    """Matrix L (6, 16) with vec_ext(A) = L @ A.ravel()."""
    return np.stack([vec_ext(e.reshape(4, 4)) for e in np.eye(16)], axis=1)


def _kron_tensor(basis) -> np.ndarray:
    # T[o, i, (a, b), (c, d)] with kron(A, B)[o, i] = sum T * A[a, b] * B[c, d]
    L = _vec_ext_map().reshape(6, 4, 4)
    T = np.einsum("oad,ibc->oiabcd", L, basis)
    return T.reshape(36, 256)


_KRON_SE = _kron_tensor(BASIS)
_KRON_SE_T = _kron_tensor(BASIS_T)


def _ordered_outer_sum(A, B) -> np.ndarray:
    A = np.asarray(A, dtype=float).reshape(-1, 16)
    B = np.asarray(B, dtype=float).reshape(-1, 16)
    # axis-0 reduction of a C-contiguous array accumulates rows in index order
    outer = (A[:, :, None] * B[:, None, :]).reshape(-1, 256)
    return outer.sum(axis=0)


def kron_se_sum(A, B) -> np.ndarray:
    """``sum_k kron_se(A[k], B[k])`` for stacks of shape (n, 4, 4), summed in k order."""
    return (_KRON_SE @ _ordered_outer_sum(A, B)).reshape(6, 6)


def kron_se_t_sum(A, B) -> np.ndarray:
    """``sum_k kron_se_t(A[k], B[k])``, summed in k order."""
    return (_KRON_SE_T @ _ordered_outer_sum(A, B)).reshape(6, 6)
