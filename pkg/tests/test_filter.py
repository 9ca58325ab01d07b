import numpy as np
import pytest

from conftest import random_instance, random_spd
from se3filter.filter import (
    FilterConfig,
    ObservationBatch,
    a_matrices,
    d_matrix,
    d_terms,
    grad_and_hessian,
    grad_obs,
    hamiltonian,
    metric_hessian,
    obs_energy,
    reject_outliers,
    residuals,
    rhs,
    init,
    weight_s,
)
from se3filter.liegroup import GRAM, connection, exp_se3, inner, mat_se, vec_ext

Q0 = 0.1 * np.eye(3)


def fd(f, eps=1e-6):
    return (f(eps) - f(-eps)) / (2 * eps)


def test_weight_s():
    assert np.allclose(weight_s(1e-3, 1e-6, 10), np.diag([1e-2] * 3 + [1e-5] * 3))


def test_config_validation():
    with pytest.raises(ValueError):
        FilterConfig(S=-np.eye(6))
    with pytest.raises(ValueError):
        FilterConfig(h=0.1, substeps=20)
    with pytest.raises(ValueError):
        FilterConfig(outlier_quantile=0.0)
    with pytest.raises(ValueError):
        FilterConfig(alpha=-1.0)
    P0 = random_spd(np.random.default_rng(0), 6)
    assert np.array_equal(init(FilterConfig(P0=P0)).P, P0)
    assert np.array_equal(init(FilterConfig(p0_scale=3.0)).P, 3 * np.eye(6))


def test_batch_validation():
    with pytest.raises(ValueError):
        ObservationBatch(np.ones((2, 4)), np.ones((3, 3)))
    with pytest.raises(ValueError):
        ObservationBatch(np.zeros((1, 4)), np.ones((1, 3)))


def test_gradient_pairing_matches_energy(rng):
    for _ in range(20):
        E, g, y, omega = random_instance(rng, 5)
        Q = random_spd(rng, 3)
        b = ObservationBatch(g, y)
        fdv = fd(lambda t: obs_energy(E @ exp_se3(t * omega), b, Q))
        analytic = grad_obs(E, b, Q) @ GRAM @ omega
        assert np.isclose(analytic, fdv, rtol=1e-6, atol=1e-12)


def test_a_matrix_pairs_without_projection(rng):
    E, g, y, omega = random_instance(rng, 3)
    A = a_matrices(E, g, y, Q0).sum(axis=0)
    b = ObservationBatch(g, y)
    assert np.isclose(inner(A, mat_se(omega)), grad_obs(E, b, Q0) @ GRAM @ omega)


def test_d_matches_jacobian_of_a(rng):
    for _ in range(20):
        E, g, y, omega = random_instance(rng)
        Q = random_spd(rng, 3)
        fdv = fd(lambda t: vec_ext(a_matrices(E @ exp_se3(t * omega), g, y, Q)[0]))
        assert np.allclose(d_matrix(E, g, y, Q) @ omega, fdv, rtol=1e-6, atol=1e-10)


def _pieces_oracle(E, g, y, Q, omega, eps=1e-6):
    """Rate of A_k when only one occurrence of a moving quantity is live.

    ``A = u w^T`` with ``u = Q r / k1 - e3 (pT^T Q r) / k2^2`` and
    ``r = y - p_r / k_r``; each piece differentiates exactly one of
    ``k1, k2, pT, w, k_r, p_r`` with the rest frozen at t = 0.
    """
    from se3filter.liegroup import inverse

    e3 = np.array([0.0, 0.0, 1.0])

    def geo(t):
        w = inverse(E @ exp_se3(t * omega)) @ g
        return w, w[:3], w[2]

    w0, p0, k0 = geo(0.0)

    def A_of(k1=k0, k2=k0, pT=p0, w=w0, k_r=k0, p_r=p0):
        # third component cancels between the k_r and p_r pieces; keep it
        r = y - p_r / k_r
        u = Q @ r / k1 - e3 * (pT @ Q @ r) / k2**2
        A = np.zeros((4, 4))
        A[:3] = np.outer(u, w)
        return vec_ext(A)

    live = [
        lambda w, p, k: A_of(k1=k),
        lambda w, p, k: A_of(k2=k),
        lambda w, p, k: A_of(pT=p),
        lambda w, p, k: A_of(w=w),
        lambda w, p, k: A_of(k_r=k),
        lambda w, p, k: A_of(p_r=p),
    ]
    return [fd(lambda t, fn=fn: fn(*geo(t)), eps) for fn in live]


def test_d_pieces_individually(rng):
    for _ in range(10):
        E, g, y, omega = random_instance(rng)
        Q = random_spd(rng, 3)
        terms = d_terms(E, g, y, Q)[:, 0]
        oracle = _pieces_oracle(E, g[0], y[0], Q, omega)
        for i in range(6):
            assert np.allclose(terms[i] @ omega, oracle[i], rtol=1e-6, atol=1e-10), i


def test_noise_free_d_reduces_to_pieces_5_and_6(rng):
    from se3filter.camera import observe

    E, g, _, _ = random_instance(rng)
    y = observe(E, g)
    terms = d_terms(E, g, y, Q0)[:, 0]
    assert np.abs(terms[:4]).max() < 1e-12


def test_hessian_matches_second_derivative(rng):
    # Hess(O, O) = d2/dt2 f(E exp(tO)) - <grad, nabla_O O>
    for _ in range(10):
        E, g, y, omega = random_instance(rng, 8)
        b = ObservationBatch(g, y)
        grad, H = grad_and_hessian(E, b, Q0)
        eps = 1e-4
        f = lambda t: obs_energy(E @ exp_se3(t * omega), b, Q0)
        d2 = (f(eps) - 2 * f(0.0) + f(-eps)) / eps**2
        hess = omega @ GRAM @ H @ omega
        correction = grad @ GRAM @ connection(omega, omega)
        assert np.isclose(hess + correction, d2, rtol=1e-5, atol=1e-9)


def test_hessian_is_metric_symmetric(rng):
    E, g, y, _ = random_instance(rng, 8)
    _, H = grad_and_hessian(E, ObservationBatch(g, y), Q0)
    M = GRAM @ H
    assert np.allclose(M, M.T, atol=1e-10 * np.abs(M).max())


def test_mu_hessian_of_hamiltonian(rng):
    cfg = FilterConfig(alpha=0.7)
    E, g, y, _ = random_instance(rng, 4)
    b = ObservationBatch(g, y)
    t, eps = 0.3, 1e-3
    mu0 = rng.standard_normal(6)
    H = np.zeros((6, 6))
    I = np.eye(6)
    for i in range(6):
        for j in range(6):
            f = lambda a, c: hamiltonian(E, mu0 + a * I[i] + c * I[j], b, cfg, t)
            H[i, j] = (f(eps, eps) - f(eps, -eps) - f(-eps, eps) + f(-eps, -eps)) / (4 * eps**2)
    expected = -np.exp(cfg.alpha * t) * cfg.S_inv
    assert np.allclose(metric_hessian(H), expected, rtol=1e-6, atol=1e-9 * np.abs(expected).max())


def test_residual_third_component_zero(rng):
    E, g, y, _ = random_instance(rng, 10)
    assert np.all(residuals(E, ObservationBatch(g, y))[:, 2] == 0.0)


def test_reject_outliers(rng):
    E, g, y, _ = random_instance(rng, 10)
    b = ObservationBatch(g, y)
    r = np.linalg.norm(residuals(E, b), axis=1)
    kept = reject_outliers(E, b, FilterConfig(outlier_quantile=0.8))
    assert len(kept) == 8
    assert np.linalg.norm(residuals(E, kept), axis=1).max() < np.quantile(r, 0.8)
    assert len(reject_outliers(E, b, FilterConfig(outlier_quantile=1.0))) == 10


def test_rhs_without_observations_is_riccati():
    cfg = FilterConfig(alpha=0.5)
    st = init(cfg)
    omega, dP = rhs(st, ObservationBatch(np.zeros((0, 4)), np.zeros((0, 3))), cfg)
    assert np.all(omega == 0)
    assert np.allclose(dP, -0.5 * st.P + cfg.S_inv)


def test_rhs_noise_free_fixed_point(rng):
    # at the true pose the pose velocity vanishes
    E, g, _, _ = random_instance(rng, 10)
    from se3filter.camera import observe

    b = ObservationBatch(g, observe(E, g))
    cfg = FilterConfig()
    from se3filter.filter import FilterState

    omega, _ = rhs(FilterState(E, np.eye(6)), b, cfg)
    assert np.abs(omega).max() < 1e-12


def test_clip_hessian(rng):
    from se3filter.filter import clip_hessian

    # a metric self-adjoint operator with mixed curvature
    V = np.linalg.qr(rng.standard_normal((6, 6)))[0]
    M = V @ np.diag([-3.0, -1.0, 0.5, 1.0, 2.0, 4.0]) @ V.T
    rs = np.sqrt(np.diag(GRAM))
    H = M * rs[None, :] / rs[:, None]
    C = clip_hessian(H)
    Cm = GRAM @ C
    assert np.allclose(Cm, Cm.T)
    assert np.linalg.eigvalsh(0.5 * (Cm + Cm.T)).min() > -1e-12
    assert np.allclose(np.sort(np.linalg.eigvals(C).real), [0, 0, 0.5, 1, 2, 4], atol=1e-12)
    P = M @ M + np.eye(6)
    Hp = P * rs[None, :] / rs[:, None]
    assert clip_hessian(Hp) is Hp
