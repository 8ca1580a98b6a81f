"""Q-Score: clamped reciprocal of the mean observation-to-rim distance."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .world import OrbitalMap, rim_distances, rotation


class NoObservations(ValueError):
    """Raised when a score is requested for an empty observation set.

    Callers skip the weight update rather than inventing a neutral score.
    """


@dataclass(frozen=True)
class QScoreConfig:
    epsilon: float = 1e-6

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")


def _as_observations(observations) -> np.ndarray:
    obs = np.asarray(observations, dtype=float).reshape(-1, 2)
    if len(obs) == 0:
        raise NoObservations("Q-Score needs at least one observation")
    return obs


def mean_rim_distances(beliefs: np.ndarray, heading: float, observations,
                       orbital_map: OrbitalMap, cfg: QScoreConfig = QScoreConfig()) -> np.ndarray:
    """(epsilon + sum of rim distances) / m for each belief in an (N, 2) array."""
    obs = _as_observations(observations)
    world_offsets = obs @ rotation(heading).T
    pts = np.asarray(beliefs, dtype=float).reshape(-1, 1, 2) + world_offsets
    total = cfg.epsilon + rim_distances(pts, orbital_map).sum(axis=1)
    return total / len(obs)


def log_q_scores(beliefs: np.ndarray, heading: float, observations,
                 orbital_map: OrbitalMap, cfg: QScoreConfig = QScoreConfig()) -> np.ndarray:
    """Vectorized log Q-Score over particles; every entry is <= 0."""
    mean = mean_rim_distances(beliefs, heading, observations, orbital_map, cfg)
    return np.minimum(0.0, -np.log(mean))


def q_score(belief, heading: float, observations, orbital_map: OrbitalMap,
            cfg: QScoreConfig = QScoreConfig()) -> float:
    mean = float(mean_rim_distances(np.asarray(belief, dtype=float).reshape(1, 2),
                                    heading, observations, orbital_map, cfg)[0])
    return min(1.0, 1.0 / mean)


def log_q_score(belief, heading: float, observations, orbital_map: OrbitalMap,
                cfg: QScoreConfig = QScoreConfig()) -> float:
    s = q_score(belief, heading, observations, orbital_map, cfg)
    return 0.0 if s == 1.0 else math.log(s)
