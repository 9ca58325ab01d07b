import numpy as np
import pytest

from conftest import random_spd
from se3filter.filter import FilterConfig, FilterState, ObservationBatch
from se3filter.integrate import StepPlan, cg2_step, coupled_substep, rk2_step
from se3filter.liegroup import exp_se3

EMPTY = ObservationBatch(np.zeros((0, 4)), np.zeros((0, 3)))


def phi(E):
    """A smooth, pose-dependent left-trivialized velocity."""
    R, v = E[:3, :3], E[:3, 3]
    return np.array([np.sin(v[0]), 0.5 * R[0, 1], 0.3, np.cos(R[2, 0]), v[1], 0.2 * v[2] + 1.0])


def integrate_pose(h, T=1.0):
    E = exp_se3([0.1, -0.2, 0.3, 0.5, 0.0, -0.4])
    for _ in range(int(round(T / h))):
        E = cg2_step(E, phi, h)
    return E


def observed_order(errors, hs):
    return np.polyfit(np.log(hs), np.log(errors), 1)[0]


def test_cg2_order():
    ref = integrate_pose(1 / 4096)
    hs = np.array([1 / 16, 1 / 32, 1 / 64, 1 / 128])
    errs = [np.linalg.norm(integrate_pose(h) - ref) for h in hs]
    assert abs(observed_order(errs, hs) - 2.0) < 0.2


def test_rk2_order():
    A = np.array([[0.0, 1.0], [-1.0, 0.1]])
    f = lambda t, P: -P @ P + A * np.cos(t) + np.eye(2)
    P0 = np.array([[1.0, 0.2], [0.2, 0.5]])

    def run(h):
        P, t = P0, 0.0
        for _ in range(int(round(1 / h))):
            P = rk2_step(P, f, t, h)
            t += h
        return P

    ref = run(1 / 8192)
    hs = np.array([1 / 16, 1 / 32, 1 / 64, 1 / 128])
    errs = [np.linalg.norm(run(h) - ref) for h in hs]
    assert abs(observed_order(errs, hs) - 2.0) < 0.2


def test_cg2_stays_on_group():
    E = np.eye(4)
    for _ in range(10_000):
        E = cg2_step(E, phi, 0.01)
    R = E[:3, :3]
    assert np.linalg.norm(R.T @ R - np.eye(3)) < 1e-9
    assert np.array_equal(E[3], [0, 0, 0, 1])


def test_decoupled_riccati_closed_form():
    rng = np.random.default_rng(2)
    alpha, P0 = 0.2, random_spd(rng, 6)
    cfg = FilterConfig(alpha=alpha, S=np.diag(rng.uniform(0.5, 2.0, 6)), P0=P0)
    h, T = 5e-4, 5.0
    st = FilterState(np.eye(4), P0.copy())
    for _ in range(int(round(T / h))):
        st = coupled_substep(st, EMPTY, cfg, h)
    decay = np.exp(-alpha * T)
    expected = decay * P0 + (1 - decay) * cfg.S_inv / alpha
    assert np.abs(st.P - expected).max() / np.abs(expected).max() < 1e-8
    assert np.array_equal(st.E, np.eye(4))


def test_step_plan_validation():
    StepPlan(0.25, 4)
    with pytest.raises(ValueError):
        StepPlan(0.1, 5)
    with pytest.raises(ValueError):
        StepPlan(0.0, 1)


def test_step_frame_rejects_empty():
    from se3filter.filter import init
    from se3filter.integrate import step_frame

    cfg = FilterConfig()
    with pytest.raises(ValueError):
        step_frame(init(cfg), EMPTY, cfg)


def test_split_rule():
    from se3filter.integrate import MAX_SPLIT, _split

    assert _split(0.3, 1) == 1
    assert _split(2.5, 1) == 3
    with pytest.raises(FloatingPointError):
        _split(np.inf, 1)
    with pytest.raises(FloatingPointError):
        _split(MAX_SPLIT + 1.5, 1)
