import math

import numpy as np
import pytest

from craterloc.motion import (
    MotionConfig, OdometryStep, ground_truth_advance, make_rng, particle_streams, propagate,
    propagate_sample, random_walk_sigma, steps_from_waypoints,
)
from craterloc.world import Pose


def test_zero_delta_leaves_position():
    rng = make_rng(1)
    out = propagate_sample((3.0, 4.0), OdometryStep(0, 0, 0.3), MotionConfig(0.5), rng)
    np.testing.assert_array_equal(out, [3.0, 4.0])


def test_noiseless_step_is_exact():
    out = propagate_sample((1.0, 1.0), OdometryStep(1, 0, 0.0), MotionConfig(0.0), make_rng(0))
    np.testing.assert_array_equal(out, [2.0, 1.0])


def test_propagate_sample_draws_two_values():
    a, b = make_rng(5), make_rng(5)
    propagate_sample((0, 0), OdometryStep(1, 0, 0), MotionConfig(), a)
    b.standard_normal(2)
    assert a.random() == b.random()


def test_vectorized_matches_sequential():
    step = OdometryStep(0.8, 0.1, 1.2)
    pts = np.arange(10.0).reshape(5, 2)
    cfg = MotionConfig(0.05)
    seq_rng, vec_rng = make_rng(3), make_rng(3)
    seq = np.array([propagate_sample(p, step, cfg, seq_rng) for p in pts])
    np.testing.assert_array_equal(propagate(pts, step, cfg, vec_rng), seq)


def test_random_walk_rms_over_seeds():
    # 1000 independent 500-step walks; RMS terminal error against drift * sqrt(500)
    cfg = MotionConfig(0.02)
    step = OdometryStep(1, 0, 0.0)
    finals = []
    for seed in range(1000):
        rng = make_rng(seed)
        p = np.zeros(2)
        for _ in range(500):
            p = propagate_sample(p, step, cfg, rng)
        finals.append(p - (500, 0))
    rms = np.sqrt(np.mean(np.square(finals), axis=0))
    expected = 0.02 * math.sqrt(500)
    assert expected == pytest.approx(0.447, abs=1e-3)
    np.testing.assert_allclose(rms, expected, rtol=0.07)
    assert random_walk_sigma([step] * 500, 0.02) == pytest.approx(expected)


@pytest.mark.parametrize("length", [0.25, 0.5, 1.0])
def test_noise_scales_with_step_length(length):
    n = 100_000
    pts = np.zeros((n, 2))
    out = propagate(pts, OdometryStep(length, 0, 0.0), MotionConfig(0.02), make_rng(11))
    sd = (out - (length, 0)).std(axis=0)
    np.testing.assert_allclose(sd, 0.02 * length, rtol=0.05)


def test_drift_zero_matches_ground_truth():
    steps = steps_from_waypoints(np.array([[0, 0], [10, 0], [10, 7.5], [3, 2]]))
    pose = Pose(0, 0, 0)
    p = pose.position
    rng = make_rng(0)
    for s in steps:
        pose = ground_truth_advance(pose, s)
        p = propagate_sample(p, s, MotionConfig(0.0), rng)
        np.testing.assert_array_equal(p, pose.position)


def test_reproducible_streams():
    steps = [OdometryStep(1, 0, 0.1 * k) for k in range(20)]

    def walk(seed):
        rng = make_rng(seed)
        pts = np.zeros((4, 2))
        for s in steps:
            pts = propagate(pts, s, MotionConfig(), rng)
        return pts

    np.testing.assert_array_equal(walk(42), walk(42))
    assert not np.array_equal(walk(42), walk(43))


def test_particle_streams_split_by_index():
    a = [g.random() for g in particle_streams(9, 4)]
    b = [g.random() for g in particle_streams(9, 6)[:4]]
    assert a == b
    assert len(set(a)) == 4


def test_ground_truth_advance_identity_and_unit():
    p = Pose(1, 2, 0.0)
    assert ground_truth_advance(p, OdometryStep(0, 0, 0.0)) == p
    q = ground_truth_advance(p, OdometryStep(1, 0, 0.0))
    assert (q.x, q.y) == (2, 2)


def test_square_loop_closes():
    pose = Pose(0, 0, 0)
    for h in (0, math.pi / 2, math.pi, -math.pi / 2):
        pose = ground_truth_advance(pose, OdometryStep(1, 0, h))
    assert pose.x == pytest.approx(0, abs=1e-12) and pose.y == pytest.approx(0, abs=1e-12)


def test_steps_from_waypoints_spacing():
    steps = steps_from_waypoints(np.array([[0, 0], [3, 4], [3, 6.5]]))
    lengths = [s.length for s in steps]
    assert len(steps) == 8
    assert all(l == pytest.approx(1.0) for l in lengths[:-1])
    assert lengths[-1] == pytest.approx(0.5)
    for s in steps:
        s.check()
    with pytest.raises(ValueError):
        OdometryStep(1.5, 0, 0).check()


def test_motion_config_validation():
    with pytest.raises(ValueError):
        MotionConfig(drift_fraction=-0.1)
