"""Odometry steps, ground-truth advance, and drift-noise propagation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .world import Pose, rotation, wrap_angle

MAX_STEP = 1.0


@dataclass(frozen=True)
class OdometryStep:
    """Commanded displacement in the rover frame after turning to ``heading_after``."""

    dx: float
    dy: float
    heading_after: float

    @property
    def delta(self) -> np.ndarray:
        return np.array([self.dx, self.dy])

    @property
    def length(self) -> float:
        return math.hypot(self.dx, self.dy)

    def check(self, max_step: float = MAX_STEP) -> None:
        if self.length > max_step + 1e-9:
            raise ValueError(f"step length {self.length:.6g} m exceeds max step {max_step} m")

    def world_delta(self, heading: float | None = None) -> np.ndarray:
        h = self.heading_after if heading is None else heading
        return rotation(h) @ self.delta


@dataclass(frozen=True)
class MotionConfig:
    drift_fraction: float = 0.02
    heading_noise: float = 0.0  # rad, std of heading handed to the filter
    seed: int = 0

    def __post_init__(self):
        if self.drift_fraction < 0:
            raise ValueError("drift_fraction must be >= 0")
        if self.heading_noise < 0:
            raise ValueError("heading_noise must be >= 0")


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def particle_streams(seed: int, n: int) -> list[np.random.Generator]:
    """Independent per-particle streams, split from ``seed`` by particle index."""
    return [make_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def propagate_sample(b, step: OdometryStep, cfg: MotionConfig, rng: np.random.Generator,
                     heading: float | None = None) -> np.ndarray:
    """Move one position hypothesis by the commanded step plus drift noise.

    Draws exactly two normals from ``rng``.
    """
    noise = rng.standard_normal(2) * (cfg.drift_fraction * step.length)
    return np.asarray(b, dtype=float) + step.world_delta(heading) + noise


def propagate(positions: np.ndarray, step: OdometryStep, cfg: MotionConfig,
              rng: np.random.Generator, heading: float | None = None) -> np.ndarray:
    """Vectorized :func:`propagate_sample` over an (N, 2) particle array.

    Draws the same 2N normals, in the same order, as N sequential calls.
    """
    positions = np.asarray(positions, dtype=float)
    noise = rng.standard_normal(positions.shape) * (cfg.drift_fraction * step.length)
    return positions + step.world_delta(heading) + noise


def ground_truth_advance(pose: Pose, step: OdometryStep) -> Pose:
    x, y = pose.position + step.world_delta()
    return Pose(float(x), float(y), step.heading_after)


def random_walk_sigma(steps, drift_fraction: float) -> float:
    """Per-axis standard deviation of the accumulated drift over ``steps``."""
    return drift_fraction * math.sqrt(sum(s.length ** 2 for s in steps))


def steps_from_waypoints(waypoints: np.ndarray, max_step: float = MAX_STEP) -> list[OdometryStep]:
    """Resample a polyline into straight steps of ``max_step`` metres.

    The last step of the route may be shorter. Each step drives straight ahead
    along the local tangent, which becomes the rover heading.
    """
    pts = np.asarray(waypoints, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValueError("need at least two (x, y) waypoints")
    seg = np.diff(pts, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    keep = seg_len > 0
    pts = np.vstack([pts[:1], pts[1:][keep]])
    cum = np.concatenate([[0.0], np.cumsum(seg_len[keep])])
    total = cum[-1]
    if total == 0:
        raise ValueError("trajectory has zero length")
    n_full = int(math.floor(total / max_step + 1e-9))
    stations = np.arange(n_full + 1) * max_step
    if total - stations[-1] > 1e-9:
        stations = np.append(stations, total)
    xy = np.column_stack([np.interp(stations, cum, pts[:, 0]), np.interp(stations, cum, pts[:, 1])])
    steps = []
    for a, b in zip(xy[:-1], xy[1:]):
        d = b - a
        steps.append(OdometryStep(float(np.hypot(*d)), 0.0, wrap_angle(math.atan2(d[1], d[0]))))
    return steps


def initial_pose(waypoints: np.ndarray) -> Pose:
    pts = np.asarray(waypoints, dtype=float)
    for b in pts[1:]:
        d = b - pts[0]
        if np.any(d != 0):
            return Pose(float(pts[0, 0]), float(pts[0, 1]), math.atan2(d[1], d[0]))
    raise ValueError("trajectory has zero length")
