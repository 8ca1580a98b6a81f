"""Orbital crater map, planar frames, and rim geometry."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np


class MapError(ValueError):
    """Raised when a crater map is malformed or unusable."""


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    wrapped = math.atan2(math.sin(theta), math.cos(theta))
    if wrapped == -math.pi:
        wrapped = math.pi
    return wrapped


def rotation(heading: float) -> np.ndarray:
    c, s = math.cos(heading), math.sin(heading)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Crater:
    id: int
    x: float
    y: float
    diameter: float
    depth: float

    def __post_init__(self):
        if not self.diameter > 0:
            raise MapError(f"crater {self.id}: diameter must be > 0, got {self.diameter}")
        if not self.depth > 0:
            raise MapError(f"crater {self.id}: depth must be > 0, got {self.depth}")

    @property
    def center(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def radius(self) -> float:
        return self.diameter / 2.0


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


class EdgeObservation(NamedTuple):
    """A detected leading-edge point in the rover frame (forward, left)."""

    forward: float
    left: float


@dataclass(frozen=True)
class Bounds:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def contains(self, x: float, y: float) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax


@dataclass(frozen=True)
class OrbitalMap:
    """An ordered set of craters with precomputed arrays for vectorized queries.

    ``bounds`` defaults to the tight box around every rim.
    """

    craters: tuple[Crater, ...]
    bounds: Bounds | None = None
    centers: np.ndarray = field(init=False, repr=False, compare=False)
    radii: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        craters = tuple(sorted(self.craters, key=lambda c: c.id))
        ids = [c.id for c in craters]
        if len(set(ids)) != len(ids):
            raise MapError(f"duplicate crater ids in {ids}")
        object.__setattr__(self, "craters", craters)
        object.__setattr__(self, "centers", np.array([[c.x, c.y] for c in craters]).reshape(-1, 2))
        object.__setattr__(self, "radii", np.array([c.radius for c in craters]))
        rim_box = self._rim_box()
        if self.bounds is None:
            object.__setattr__(self, "bounds", rim_box)
        elif rim_box is not None:
            b = self.bounds
            if (rim_box.xmin < b.xmin or rim_box.ymin < b.ymin
                    or rim_box.xmax > b.xmax or rim_box.ymax > b.ymax):
                raise MapError("crater rims extend outside map bounds")

    def _rim_box(self) -> Bounds | None:
        if not self.craters:
            return None
        lo = (self.centers - self.radii[:, None]).min(axis=0)
        hi = (self.centers + self.radii[:, None]).max(axis=0)
        return Bounds(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))

    def __len__(self) -> int:
        return len(self.craters)

    def crater(self, crater_id: int) -> Crater:
        for c in self.craters:
            if c.id == crater_id:
                return c
        raise KeyError(crater_id)

    def translated(self, dx: float, dy: float) -> OrbitalMap:
        return OrbitalMap(tuple(Crater(c.id, c.x + dx, c.y + dy, c.diameter, c.depth)
                                for c in self.craters))


def load_map(path: str | Path) -> OrbitalMap:
    """Read a JSON array of ``{id, x_m, y_m, diameter_m, depth_m}`` records."""
    path = Path(path)
    try:
        records = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MapError(f"cannot read map {path}: {exc}") from exc
    if not isinstance(records, list):
        raise MapError(f"{path}: expected a JSON array of craters")
    craters = []
    for i, rec in enumerate(records):
        try:
            craters.append(Crater(int(rec["id"]), float(rec["x_m"]), float(rec["y_m"]),
                                  float(rec["diameter_m"]), float(rec["depth_m"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise MapError(f"{path}: bad crater record #{i}: {exc}") from exc
    return OrbitalMap(tuple(craters))


def dump_map(orbital_map: OrbitalMap, path: str | Path) -> None:
    records = [{"id": c.id, "x_m": c.x, "y_m": c.y, "diameter_m": c.diameter, "depth_m": c.depth}
               for c in orbital_map.craters]
    Path(path).write_text(json.dumps(records, indent=2) + "\n")


def rover_to_world(pose: Pose, obs: Sequence[float] | np.ndarray) -> np.ndarray:
    """Map rover-frame offsets (forward, left) to world points.

    Accepts a single offset of shape (2,) or a stack of shape (m, 2).
    """
    offsets = np.asarray(obs, dtype=float)
    return pose.position + offsets @ rotation(pose.heading).T


def world_to_rover(pose: Pose, points: np.ndarray) -> np.ndarray:
    return (np.asarray(points, dtype=float) - pose.position) @ rotation(pose.heading)


def rim_distances(points: np.ndarray, orbital_map: OrbitalMap) -> np.ndarray:
    """Distance from each point to the nearest crater rim.

    ``points`` has shape (..., 2); the result has shape (...).
    """
    if len(orbital_map) == 0:
        raise MapError("nearest rim distance is undefined for an empty map")
    pts = np.asarray(points, dtype=float)
    d = np.linalg.norm(pts[..., None, :] - orbital_map.centers, axis=-1)
    return np.abs(d - orbital_map.radii).min(axis=-1)


def nearest_rim_distance(p: Sequence[float] | np.ndarray, orbital_map: OrbitalMap) -> float:
    return float(rim_distances(np.asarray(p, dtype=float), orbital_map))


@dataclass(frozen=True)
class Arc:
    """Closed rim arc centred on ``center_angle`` (radians from the crater centre)."""

    crater: Crater
    center_angle: float
    half_width: float = math.pi / 2

    @property
    def length(self) -> float:
        return 2.0 * self.half_width * self.crater.radius

    def contains(self, angle: float) -> bool:
        return abs(wrap_angle(angle - self.center_angle)) <= self.half_width + 1e-12

    def angles(self, spacing: float) -> np.ndarray:
        """Sample angles at midpoints of equal sub-arcs no longer than ``spacing``."""
        n = max(1, math.ceil(self.length / spacing - 1e-9))
        k = np.arange(n)
        return self.center_angle - self.half_width + (k + 0.5) * (2 * self.half_width / n)

    def sample(self, spacing: float) -> np.ndarray:
        a = self.angles(spacing)
        return self.crater.center + self.crater.radius * np.column_stack([np.cos(a), np.sin(a)])


def front_arc(pose: Pose, crater: Crater) -> Arc:
    """Half of the rim facing the rover."""
    dx, dy = pose.x - crater.x, pose.y - crater.y
    if dx == 0.0 and dy == 0.0:
        raise ValueError(f"front arc undefined: rover at centre of crater {crater.id}")
    return Arc(crater, math.atan2(dy, dx))


def back_arc(pose: Pose, crater: Crater) -> Arc:
    front = front_arc(pose, crater)
    return Arc(crater, wrap_angle(front.center_angle + math.pi))
