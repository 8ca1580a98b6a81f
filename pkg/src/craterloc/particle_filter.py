"""Log-weight particle filter with effective-sample-size triggered resampling."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np

from .motion import MotionConfig, OdometryStep, make_rng, propagate
from .qscore import QScoreConfig, log_q_scores
from .world import OrbitalMap

RESAMPLERS = ("systematic", "multinomial", "residual", "stratified")


class WeightCollapse(RuntimeError):
    """All particle weights are zero (log-weights -inf or non-finite)."""


class Particle(NamedTuple):
    x: float
    y: float
    log_weight: float


@dataclass(frozen=True)
class FilterConfig:
    n_particles: int = 100
    n_eff_threshold: float = 50.0
    init_mean: tuple[float, float] | None = None
    init_sigma: float = 3.0
    resampler: str = "systematic"
    seed: int = 0

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if not 0 < self.n_eff_threshold <= self.n_particles:
            raise ValueError("need 0 < n_eff_threshold <= n_particles")
        if self.init_sigma < 0:
            raise ValueError("init_sigma must be >= 0")
        if self.resampler not in RESAMPLERS:
            raise ValueError(f"resampler must be one of {RESAMPLERS}, got {self.resampler!r}")


@dataclass
class FilterState:
    positions: np.ndarray
    log_weights: np.ndarray
    config: FilterConfig
    rng: np.random.Generator = field(repr=False)
    resample_rng: np.random.Generator = field(repr=False)
    step: int = 0
    n_eff: float = 0.0
    resampled: bool = False

    def particles(self) -> list[Particle]:
        return [Particle(float(x), float(y), float(w))
                for (x, y), w in zip(self.positions, self.log_weights)]

    def snapshot(self) -> dict:
        return {
            "step": self.step,
            "particles": [{"x": float(x), "y": float(y), "log_w": float(w)}
                          for (x, y), w in zip(self.positions, self.log_weights)],
            "n_eff": float(self.n_eff),
            "resampled": bool(self.resampled),
        }


def normalized_weights(log_weights) -> np.ndarray:
    """Linear weights summing to one, via a max-shifted log-sum-exp."""
    lw = np.asarray(log_weights, dtype=float)
    if lw.size == 0 or np.any(np.isnan(lw)) or np.any(lw == np.inf):
        raise WeightCollapse("log-weights contain NaN or +inf")
    top = lw.max()
    if not np.isfinite(top):
        raise WeightCollapse("every weight is zero")
    w = np.exp(lw - top)
    return w / w.sum()


def n_eff(log_weights) -> float:
    w = normalized_weights(log_weights)
    return float(1.0 / np.sum(w * w))


def systematic_indices(weights: np.ndarray, u0) -> np.ndarray:
    """Comb selection at ``u0 + n/N`` for n = 0..N-1 over normalized ``weights``.

    An array of offsets gives one row of indices per offset.
    """
    n = len(weights)
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    comb = np.asarray(u0, dtype=float)[..., None] + np.arange(n) / n
    return np.minimum(np.searchsorted(cum, comb, side="right"), n - 1)


def resample_systematic(log_weights, rng: np.random.Generator) -> np.ndarray:
    w = normalized_weights(log_weights)
    return systematic_indices(w, rng.uniform(0.0, 1.0 / len(w)))


def resample_stratified(log_weights, rng: np.random.Generator) -> np.ndarray:
    w = normalized_weights(log_weights)
    n = len(w)
    cum = np.cumsum(w)
    cum[-1] = 1.0
    u = (np.arange(n) + rng.random(n)) / n
    return np.minimum(np.searchsorted(cum, u, side="right"), n - 1)


def resample_multinomial(log_weights, rng: np.random.Generator) -> np.ndarray:
    w = normalized_weights(log_weights)
    n = len(w)
    cum = np.cumsum(w)
    cum[-1] = 1.0
    return np.minimum(np.searchsorted(cum, rng.random(n), side="right"), n - 1)


def resample_residual(log_weights, rng: np.random.Generator) -> np.ndarray:
    w = normalized_weights(log_weights)
    n = len(w)
    copies = np.floor(n * w).astype(int)
    rest = n - copies.sum()
    if rest > 0:
        residue = n * w - copies
        residue /= residue.sum()
        copies += rng.multinomial(rest, residue)
    return np.repeat(np.arange(n), copies)


RESAMPLE_FUNCS: dict[str, Callable[[np.ndarray, np.random.Generator], np.ndarray]] = {
    "systematic": resample_systematic,
    "multinomial": resample_multinomial,
    "residual": resample_residual,
    "stratified": resample_stratified,
}


def init_filter(cfg: FilterConfig) -> FilterState:
    init_ss, prop_ss, res_ss = np.random.SeedSequence(cfg.seed).spawn(3)
    mean = np.zeros(2) if cfg.init_mean is None else np.asarray(cfg.init_mean, dtype=float)
    positions = mean + cfg.init_sigma * make_rng(init_ss).standard_normal((cfg.n_particles, 2))
    return FilterState(
        positions=positions,
        log_weights=np.zeros(cfg.n_particles),
        config=cfg,
        rng=make_rng(prop_ss),
        resample_rng=make_rng(res_ss),
        n_eff=float(cfg.n_particles),
    )


def step(state: FilterState, odo: OdometryStep, observations, orbital_map: OrbitalMap,
         motion: MotionConfig = MotionConfig(), qcfg: QScoreConfig = QScoreConfig(),
         heading: float | None = None) -> FilterState:
    """Advance one predict / weight / resample cycle.

    ``heading`` defaults to ``odo.heading_after``. An empty observation set
    propagates the particles and leaves their weights untouched.
    """
    h = odo.heading_after if heading is None else heading
    positions = propagate(state.positions, odo, motion, state.rng, heading=h)
    log_weights = state.log_weights
    obs = np.asarray(observations, dtype=float).reshape(-1, 2)
    resampled = False
    if len(obs) == 0:
        ess = n_eff(log_weights)
    else:
        q = log_q_scores(positions, h, obs, orbital_map, qcfg)
        log_weights = log_weights + (q - q.min())
        ess = n_eff(log_weights)
        if ess <= state.config.n_eff_threshold:
            idx = RESAMPLE_FUNCS[state.config.resampler](log_weights, state.resample_rng)
            positions = positions[idx]
            log_weights = np.zeros(len(idx))
            resampled = True
    return replace(state, positions=positions, log_weights=log_weights, step=state.step + 1,
                   n_eff=ess, resampled=resampled)
