import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from craterloc.qscore import (NoObservations, QScoreConfig, log_q_score, log_q_scores, q_score)
from craterloc.world import Crater, OrbitalMap, Pose, rover_to_world
from oracles import brute_q_score, sampled_rims

UNIT = OrbitalMap((Crater(1, 0.0, 0.0, 10.0, 1.0),))


def test_on_rim_clamps_to_one():
    obs = [(5.0, 0.0), (0.0, 5.0), (-5.0, 0.0)]
    assert q_score((0, 0), 0.0, obs, UNIT) == 1.0
    assert log_q_score((0, 0), 0.0, obs, UNIT) == 0.0


def test_mean_distance_four_gives_quarter():
    # rim distances 3 and 5
    s = q_score((0, 0), 0.0, [(8.0, 0.0), (10.0, 0.0)], UNIT)
    assert s == pytest.approx(0.25, abs=1e-6)
    assert log_q_score((0, 0), 0.0, [(8.0, 0.0), (10.0, 0.0)], UNIT) == pytest.approx(-1.3863, abs=1e-4)


def test_sub_metre_distance_clamped():
    assert q_score((0, 0), 0.0, [(5.5, 0.0)], UNIT) == 1.0


def test_log_half():
    assert log_q_score((0, 0), 0.0, [(7.0, 0.0)], UNIT) == pytest.approx(-0.6931, abs=1e-4)


def test_no_observations_signal():
    with pytest.raises(NoObservations):
        q_score((0, 0), 0.0, [], UNIT)
    with pytest.raises(NoObservations):
        log_q_scores(np.zeros((3, 2)), 0.0, np.empty((0, 2)), UNIT)


def test_epsilon_validation():
    with pytest.raises(ValueError):
        QScoreConfig(epsilon=0.0)


def test_vectorized_matches_scalar():
    rng = np.random.default_rng(2)
    beliefs = rng.uniform(-20, 20, (30, 2))
    obs = rng.uniform(1, 15, (7, 2))
    vec = log_q_scores(beliefs, 0.4, obs, UNIT)
    for b, v in zip(beliefs, vec):
        assert v == pytest.approx(log_q_score(b, 0.4, obs, UNIT), abs=1e-12)


def _instance(rng, k_max=5, m_max=20):
    k = int(rng.integers(1, k_max + 1))
    m = OrbitalMap(tuple(Crater(i, *rng.uniform(0, 100, 2), rng.uniform(2, 12), 0.5) for i in range(k)))
    n_obs = int(rng.integers(1, m_max + 1))
    obs = rng.uniform(-20, 20, (n_obs, 2))
    return m, rng.uniform(0, 100, 2), rng.uniform(-math.pi, math.pi), obs


def test_matches_brute_force_sample():
    rng = np.random.default_rng(99)
    for _ in range(100):
        m, b, h, obs = _instance(rng)
        cloud = sampled_rims(m.centers, m.radii)
        assert q_score(b, h, obs, m) == pytest.approx(brute_q_score(b, h, obs, cloud), abs=1e-3)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_translation_invariance(seed, dx, dy):
    m, b, h, obs = _instance(np.random.default_rng(seed))
    moved = m.translated(dx, dy)
    s0 = q_score(b, h, obs, m)
    s1 = q_score(b + (dx, dy), h, obs, moved)
    assert s1 == pytest.approx(s0, abs=1e-12, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bounds(seed):
    m, b, h, obs = _instance(np.random.default_rng(seed))
    s = q_score(b, h, obs, m)
    assert 0 < s <= 1
    assert log_q_score(b, h, obs, m) <= 0


def test_monotone_along_ray():
    # perfect front-arc observations, then slide the belief away from the truth
    c = UNIT.craters[0]
    pose = Pose(0, -12, math.pi / 2)
    angles = np.linspace(-np.pi / 2 - 1.2, -np.pi / 2 + 1.2, 25)
    world = np.column_stack([c.radius * np.cos(angles), c.radius * np.sin(angles)])
    obs = (world - pose.position) @ np.array([[0, -1], [1, 0]])  # rotate by -heading
    np.testing.assert_allclose(rover_to_world(pose, obs), world, atol=1e-12)
    direction = np.array([0.6, -0.8])
    scores = [q_score(pose.position + t * direction, pose.heading, obs, UNIT)
              for t in np.linspace(0, 4.5, 46)]
    assert scores[0] == 1.0
    assert all(b <= a + 1e-12 for a, b in zip(scores, scores[1:]))
    assert scores[-1] < 1.0
