import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from craterloc.motion import MotionConfig, OdometryStep, ground_truth_advance, make_rng
from craterloc.particle_filter import (
    RESAMPLE_FUNCS, FilterConfig, WeightCollapse, init_filter, n_eff, normalized_weights,
    resample_residual, resample_stratified, resample_multinomial, resample_systematic, step,
    systematic_indices,
)
from craterloc.sensing import SensorConfig, observe
from craterloc.world import Crater, OrbitalMap, Pose

UNIT = OrbitalMap((Crater(1, 0.0, 0.0, 10.0, 1.0),))


def counts(idx, n):
    return np.bincount(idx, minlength=n)


# --- initialization -------------------------------------------------------

def test_init_zero_sigma_collapses_to_mean():
    st_ = init_filter(FilterConfig(n_particles=20, n_eff_threshold=10, init_mean=(3, -4), init_sigma=0))
    np.testing.assert_array_equal(st_.positions, np.tile([3.0, -4.0], (20, 1)))


def test_init_sample_spread():
    st_ = init_filter(FilterConfig(n_particles=10_000, n_eff_threshold=5000, init_sigma=3.0, seed=1))
    np.testing.assert_allclose(st_.positions.std(axis=0), 3.0, atol=0.1)


def test_init_uniform_weights():
    st_ = init_filter(FilterConfig())
    np.testing.assert_array_equal(st_.log_weights, 0.0)
    np.testing.assert_allclose(normalized_weights(st_.log_weights), 1 / 100)
    assert st_.n_eff == 100


def test_config_validation():
    with pytest.raises(ValueError):
        FilterConfig(n_particles=10, n_eff_threshold=11)
    with pytest.raises(ValueError):
        FilterConfig(init_sigma=-1)
    with pytest.raises(ValueError):
        FilterConfig(resampler="bogus")


# --- effective sample size --------------------------------------------------

def test_n_eff_examples():
    assert n_eff(np.zeros(7)) == pytest.approx(7)
    assert n_eff([0.0, -1e6, -1e6, -1e6]) == pytest.approx(1.0)
    assert n_eff(np.log([0.5, 0.25, 0.25])) == pytest.approx(2.6666666667, abs=1e-9)


def test_n_eff_stable_for_large_logs():
    assert n_eff([1e5, 1e5]) == pytest.approx(2.0)


def test_collapse_raises():
    with pytest.raises(WeightCollapse):
        normalized_weights([-np.inf, -np.inf])
    with pytest.raises(WeightCollapse):
        resample_systematic(np.array([-np.inf, -np.inf]), make_rng(0))


# --- resamplers ---------------------------------------------------------------

@pytest.mark.parametrize("name", list(RESAMPLE_FUNCS))
def test_uniform_and_degenerate(name):
    fn = RESAMPLE_FUNCS[name]
    assert len(fn(np.zeros(9), make_rng(0))) == 9
    np.testing.assert_array_equal(fn(np.array([0.0, -np.inf]), make_rng(0)), [0, 0])


def test_systematic_uniform_copies_each_once():
    for u0 in np.linspace(1e-6, 1 / 8 - 1e-6, 50):
        np.testing.assert_array_equal(systematic_indices(np.full(8, 1 / 8), u0), np.arange(8))


def test_systematic_u0_sweep_three_particles():
    w = np.array([0.5, 0.25, 0.25])
    grid = (np.arange(1, 10_001) - 0.5) / 10_000 / 3
    seen = set()
    for u0 in grid:
        c = counts(systematic_indices(w, u0), 3)
        assert c.sum() == 3
        assert c[0] in (1, 2) and c[1] in (0, 1) and c[2] in (0, 1)
        seen.add(tuple(c))
    assert seen == {(2, 1, 0), (2, 0, 1), (1, 1, 1)}


def test_systematic_matches_interval_oracle():
    from oracles import comb_counts

    rng = np.random.default_rng(5)
    for _ in range(200):
        w = rng.dirichlet(np.ones(int(rng.integers(2, 30))))
        u0 = rng.uniform(0, 1 / len(w))
        np.testing.assert_array_equal(counts(systematic_indices(w, u0), len(w)), comb_counts(w, u0))


def test_residual_exhausts_integer_parts():
    np.testing.assert_array_equal(np.sort(resample_residual(np.log([0.5, 0.5]), make_rng(0))), [0, 1])


def test_stratified_uniform_counts():
    n, trials = 10, 10_000
    rng = make_rng(1)
    total = sum(counts(resample_stratified(np.zeros(n), rng), n) for _ in range(trials))
    np.testing.assert_allclose(total / trials, 1.0, rtol=0.05)


def test_multinomial_degenerate():
    np.testing.assert_array_equal(resample_multinomial(np.array([0.0, -np.inf, -np.inf]), make_rng(3)),
                                  [0, 0, 0])


@pytest.mark.parametrize("name", list(RESAMPLE_FUNCS))
def test_unbiased_counts(name):
    fn = RESAMPLE_FUNCS[name]
    rng = make_rng(2024)
    w = np.random.default_rng(0).dirichlet(np.ones(8))
    trials = 10_000
    c = np.array([counts(fn(np.log(w), rng), 8) for _ in range(trials)])
    se = c.std(axis=0, ddof=1) / math.sqrt(trials)
    assert np.all(np.abs(c.mean(axis=0) - 8 * w) <= 3 * se + 1e-12)


def test_systematic_variance_below_multinomial():
    gen = np.random.default_rng(11)
    for _ in range(10):
        w = gen.dirichlet(np.ones(12) * 0.7)
        var = {}
        for name in ("systematic", "multinomial"):
            rng = make_rng(17)
            c = np.array([counts(RESAMPLE_FUNCS[name](np.log(w), rng), 12) for _ in range(2000)])
            var[name] = c.var(axis=0).sum()
        assert var["systematic"] <= var["multinomial"]


# --- filter step ------------------------------------------------------------------

def _state(positions, **cfg):
    positions = np.asarray(positions, dtype=float)
    base = FilterConfig(n_particles=len(positions), n_eff_threshold=cfg.pop("thr", 0.5), **cfg)
    return replace(init_filter(base), positions=positions)


def test_single_particle_weight_stays_zero():
    s = _state([[0.0, -12.0]], thr=1.0)
    for _ in range(3):
        s = step(s, OdometryStep(1, 0, math.pi / 2), [(6.0, 0.0), (7.0, 1.0)], UNIT, MotionConfig(0.0))
        assert s.n_eff == 1.0
        np.testing.assert_array_equal(s.log_weights, 0.0)


def test_two_particle_update_weights():
    # particle 0 sees its observation on the rim (log q = 0), particle 1 at rim distance e^2
    s = _state([[0.0, 0.0], [math.exp(2.0), 0.0]])
    s = step(s, OdometryStep(0, 0, 0.0), [(5.0, 0.0)], UNIT, MotionConfig(0.0))
    np.testing.assert_allclose(s.log_weights, [2.0, 0.0], atol=1e-6)
    np.testing.assert_allclose(normalized_weights(s.log_weights), [0.881, 0.119], atol=5e-4)
    assert not s.resampled


def test_threshold_at_n_resamples_every_step():
    s = _state(np.random.default_rng(0).normal(0, 3, (20, 2)) + (0, -12), thr=20)
    for _ in range(5):
        s = step(s, OdometryStep(0.5, 0, math.pi / 2), [(6.0, 0.0)], UNIT)
        assert s.resampled
        np.testing.assert_array_equal(s.log_weights, 0.0)
        assert len(s.positions) == 20


def test_empty_observations_keep_weights():
    s = _state([[0.0, 0.0], [1.0, 0.0]])
    s = replace(s, log_weights=np.array([0.3, 0.0]))
    out = step(s, OdometryStep(1, 0, 0.0), np.empty((0, 2)), UNIT)
    np.testing.assert_array_equal(out.log_weights, [0.3, 0.0])
    assert not out.resampled
    assert out.step == 1


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-50, 0), min_size=2, max_size=20), st.floats(-1e3, 1e3))
def test_weight_update_shift_invariance(q, shift):
    # w + q - min(q) normalizes identically to w + (q + c) - min(q + c)
    q = np.array(q)
    prior = np.linspace(-1, 1, len(q))
    a = normalized_weights(prior + q - q.min())
    b = normalized_weights(prior + (q + shift) - (q + shift).min())
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_concentrates_on_true_particle():
    m = OrbitalMap((Crater(1, 0.0, 0.0, 9.2, 1.0), Crater(2, 30.0, 10.0, 11.3, 1.0)))
    truth = Pose(0.0, -20.0, math.pi / 2)
    gen = np.random.default_rng(3)
    others = truth.position + gen.uniform(3, 8, (19, 1)) * np.array(
        [[math.cos(a), math.sin(a)] for a in gen.uniform(0, 2 * math.pi, 19)])
    s = _state(np.vstack([truth.position, others]), thr=10)
    sensor = SensorConfig(perfect=True)
    odo = OdometryStep(1.0, 0.0, math.pi / 2)
    rng = make_rng(0)
    for _ in range(5):
        truth = ground_truth_advance(truth, odo)
        s = step(s, odo, observe(truth, m, sensor, rng), m, MotionConfig(0.0))
    w = normalized_weights(s.log_weights)
    at_truth = np.all(np.abs(s.positions - truth.position) < 1e-9, axis=1)
    share = {}
    for p, wi in zip(map(tuple, np.round(s.positions, 9)), w):
        share[p] = share.get(p, 0.0) + wi
    assert w[at_truth].sum() == pytest.approx(max(share.values()))
    assert w[at_truth].sum() > 0.5


def test_snapshot_schema():
    s = init_filter(FilterConfig(n_particles=3, n_eff_threshold=1))
    snap = s.snapshot()
    assert set(snap) == {"step", "particles", "n_eff", "resampled"}
    assert set(snap["particles"][0]) == {"x", "y", "log_w"}
    assert len(s.particles()) == 3
