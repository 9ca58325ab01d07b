import numpy as np
import pytest
from hypothesis import given, strategies as st

from se3filter.camera import observe
from se3filter.liegroup import exp_se3
from se3filter.synth import (
    NoiseSpec,
    TwistSchedule,
    gen_observations,
    gen_scene,
    increment_errors,
    rot_error_deg,
    trans_error_m,
)


def test_schedule_segments():
    s = TwistSchedule.with_jumps((21, 31))
    assert np.array_equal(s.twist(1), s.twist(20))
    assert not np.array_equal(s.twist(20), s.twist(21))
    assert np.array_equal(s.twist(21), s.twist(30))
    assert not np.array_equal(s.twist(30), s.twist(31))


def test_schedule_validation():
    with pytest.raises(ValueError):
        TwistSchedule([])
    with pytest.raises(ValueError):
        TwistSchedule([(2, np.zeros(6))])
    with pytest.raises(ValueError):
        TwistSchedule([(1, np.zeros(6)), (1, np.ones(6))])


def test_scene_ranges():
    x, d = gen_scene(200, (2.0, 50.0), seed=3)
    assert x.shape == (200, 2) and d.shape == (200,)
    assert np.all((x >= -0.5) & (x <= 0.5))
    assert np.all((d >= 2.0) & (d <= 50.0))
    with pytest.raises(ValueError):
        gen_scene(5)


def test_noise_free_observations_are_exact():
    sched = TwistSchedule.with_jumps((3,))
    batches, truth = gen_observations(sched, gen_scene(30, seed=1), 5)
    for b, E in zip(batches, truth):
        assert np.array_equal(E, exp_se3(sched.twist(b.frame)))
        assert np.allclose(b.y, observe(E, b.g), atol=1e-15)
        assert np.array_equal(b.g[:, :3], np.column_stack([b.d * b.x[:, 0], b.d * b.x[:, 1], b.d]))


def test_noise_is_reproducible_and_multiplicative():
    sched = TwistSchedule.with_jumps(())
    scene = gen_scene(30, seed=1)
    clean, _ = gen_observations(sched, scene, 3)
    a, _ = gen_observations(sched, scene, 3, NoiseSpec(0.1, 9))
    b, _ = gen_observations(sched, scene, 3, NoiseSpec(0.1, 9))
    for ca, aa, bb in zip(clean, a, b):
        assert np.array_equal(aa.y, bb.y)
        assert np.all(aa.y[:, 2] == 1.0)
        ratio = aa.y[:, :2] / ca.y[:, :2]
        assert 0.02 < np.std(ratio - 1) < 0.3


@given(st.floats(0.0, 179.0))
def test_rotation_error_recovers_angle(deg):
    axis = np.array([0.3, -0.5, 0.8]) / np.linalg.norm([0.3, -0.5, 0.8])
    R0 = exp_se3([0.2, 0.1, -0.4, 0, 0, 0])[:3, :3]
    R1 = R0 @ exp_se3(np.concatenate([np.radians(deg) * axis, np.zeros(3)]))[:3, :3]
    assert abs(rot_error_deg(R1, R0) - deg) < 1e-9


def test_increment_errors():
    E = exp_se3([0.1, 0.2, 0.3, 1.0, 2.0, 3.0])
    F = E.copy()
    F[:3, 3] += [0.0, 3.0, 4.0]
    assert increment_errors(E, E) == (0.0, 0.0)
    assert np.isclose(increment_errors(F, E)[1], 5.0)
    assert trans_error_m([0, 0, 0], [1, 0, 0]) == 1.0
