"""Parametric leading-edge crater detector.

Stands in for an image pipeline: it reproduces a detection envelope (fraction
of the front rim arc recovered versus range), line-of-sight range noise and
spurious detections, and emits rover-frame edge points.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .world import OrbitalMap, Pose, back_arc, front_arc, world_to_rover


@dataclass(frozen=True)
class SensorConfig:
    max_range: float = 20.0
    full_detect_range: float = 10.0
    arc_fraction_at_full: float = 0.8
    fov_half_angle: float = math.radians(35.0)
    range_noise_sigma_fraction: float = 0.01
    false_positive_rate: float = 0.2
    arc_sample_spacing: float = 0.25
    min_range: float = 1.0
    back_rim_fraction: float = 0.0  # >0 enables far-rim detections at this relative rate
    perfect: bool = False

    def __post_init__(self):
        if self.max_range < 0:
            raise ValueError("max_range must be >= 0")
        if self.enabled and not 0 < self.full_detect_range <= self.max_range:
            raise ValueError("need 0 < full_detect_range <= max_range")
        if not 0 <= self.arc_fraction_at_full <= 1:
            raise ValueError("arc_fraction_at_full must lie in [0, 1]")
        if not self.arc_sample_spacing > 0:
            raise ValueError("arc_sample_spacing must be > 0")
        if not 0 < self.fov_half_angle < math.pi / 2:
            raise ValueError("fov_half_angle must lie in (0, pi/2)")
        if self.range_noise_sigma_fraction < 0 or self.false_positive_rate < 0:
            raise ValueError("noise and false-positive rates must be >= 0")
        if not 0 <= self.back_rim_fraction <= 1:
            raise ValueError("back_rim_fraction must lie in [0, 1]")
        if self.min_range < 0:
            raise ValueError("min_range must be >= 0")

    @property
    def enabled(self) -> bool:
        """A zero ``max_range`` switches the sensor off."""
        return self.max_range > 0


def detection_fraction(rng_m: float, cfg: SensorConfig) -> float:
    """Expected fraction of a crater's front arc detected at range ``rng_m``."""
    if rng_m < 0:
        raise ValueError("range must be >= 0")
    if not cfg.enabled or rng_m >= cfg.max_range:
        return 0.0
    if cfg.perfect:
        return 1.0
    if rng_m <= cfg.full_detect_range:
        return cfg.arc_fraction_at_full
    span = cfg.max_range - cfg.full_detect_range
    return cfg.arc_fraction_at_full * (cfg.max_range - rng_m) / span


def in_view(offsets: np.ndarray, cfg: SensorConfig) -> np.ndarray:
    offsets = np.asarray(offsets, dtype=float).reshape(-1, 2)
    r = np.hypot(offsets[:, 0], offsets[:, 1])
    bearing = np.arctan2(offsets[:, 1], offsets[:, 0])
    return (offsets[:, 0] > 0) & (np.abs(bearing) <= cfg.fov_half_angle) & (r <= cfg.max_range)


def _crater_in_view(pose: Pose, center: np.ndarray, radius: float, cfg: SensorConfig) -> bool:
    # visible if the rim disc intersects the field-of-view wedge
    rel = world_to_rover(pose, center)
    dist = math.hypot(*rel)
    if dist <= radius:
        return True
    bearing = math.atan2(rel[1], rel[0])
    return abs(bearing) <= cfg.fov_half_angle + math.asin(radius / dist)


def _noisy(offsets: np.ndarray, cfg: SensorConfig, rng: np.random.Generator) -> np.ndarray:
    """Perturb points along the line of sight; noise truncated at 3 sigma."""
    if cfg.perfect or cfg.range_noise_sigma_fraction == 0 or len(offsets) == 0:
        return offsets
    z = np.clip(rng.standard_normal(len(offsets)), -3.0, 3.0)
    return offsets * (1.0 + cfg.range_noise_sigma_fraction * z)[:, None]


def _false_positives(cfg: SensorConfig, rng: np.random.Generator) -> np.ndarray:
    lo = min(cfg.min_range, cfg.max_range)
    k = rng.poisson(cfg.false_positive_rate)
    if k == 0:
        return np.empty((0, 2))
    # uniform by area over the annular sector
    r = np.sqrt(rng.uniform(lo ** 2, cfg.max_range ** 2, size=k))
    th = rng.uniform(-cfg.fov_half_angle, cfg.fov_half_angle, size=k)
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


def observe(true_pose: Pose, orbital_map: OrbitalMap, cfg: SensorConfig,
            rng: np.random.Generator) -> np.ndarray:
    """Simulate one frame of edge detections.

    Returns an (m, 2) array of rover-frame (forward, left) offsets; m may be 0.
    Each visible crater contributes front-arc samples kept independently with
    probability ``detection_fraction`` of its nearest-rim range.
    """
    if not cfg.enabled:
        return np.empty((0, 2))
    chunks = []
    for crater, center, radius in zip(orbital_map.craters, orbital_map.centers, orbital_map.radii):
        dist = math.hypot(*(center - true_pose.position))
        rim_range = abs(dist - radius)
        if rim_range >= cfg.max_range or dist == 0.0:
            continue
        if not _crater_in_view(true_pose, center, radius, cfg):
            continue
        arcs = [(front_arc(true_pose, crater), detection_fraction(rim_range, cfg))]
        if cfg.back_rim_fraction > 0 and not cfg.perfect:
            back_range = dist + radius
            if back_range < cfg.max_range:
                arcs.append((back_arc(true_pose, crater),
                             cfg.back_rim_fraction * detection_fraction(back_range, cfg)))
        for arc, p_keep in arcs:
            offsets = world_to_rover(true_pose, arc.sample(cfg.arc_sample_spacing))
            offsets = offsets[in_view(offsets, cfg)]
            if p_keep < 1.0:
                offsets = offsets[rng.random(len(offsets)) < p_keep]
            chunks.append(_noisy(offsets, cfg, rng))
    if not cfg.perfect and cfg.false_positive_rate > 0:
        chunks.append(_false_positives(cfg, rng))
    if not chunks:
        return np.empty((0, 2))
    return np.vstack(chunks)


def front_arc_fraction(true_pose: Pose, orbital_map: OrbitalMap, crater_id: int,
                       cfg: SensorConfig, rng: np.random.Generator) -> float:
    """Detected share of one crater's in-view front-arc samples (noise-free bookkeeping)."""
    crater = orbital_map.crater(crater_id)
    samples = world_to_rover(true_pose, front_arc(true_pose, crater).sample(cfg.arc_sample_spacing))
    n_visible = int(in_view(samples, cfg).sum())
    if n_visible == 0:
        return 0.0
    single = OrbitalMap((crater,))
    quiet = replace(cfg, false_positive_rate=0.0, range_noise_sigma_fraction=0.0,
                    back_rim_fraction=0.0)
    return len(observe(true_pose, single, quiet, rng)) / n_visible


def read_observation_log(path: str | Path) -> dict[int, np.ndarray]:
    """Load a ``step,forward_m,left_m`` CSV into per-step (m, 2) arrays."""
    out: dict[int, list[tuple[float, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"step", "forward_m", "left_m"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            out.setdefault(int(row["step"]), []).append((float(row["forward_m"]), float(row["left_m"])))
    return {k: np.array(v, dtype=float).reshape(-1, 2) for k, v in out.items()}


def write_observation_log(path: str | Path, frames: dict[int, np.ndarray]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "forward_m", "left_m"])
        for step in sorted(frames):
            for fwd, left in frames[step]:
                w.writerow([step, repr(float(fwd)), repr(float(left))])
