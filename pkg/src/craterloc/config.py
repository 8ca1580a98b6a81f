"""Experiment configuration: JSON documents plus dotted command-line overrides."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .motion import MotionConfig
from .particle_filter import FilterConfig
from .qscore import QScoreConfig
from .sensing import SensorConfig

SECTIONS = {
    "filter": FilterConfig,
    "motion": MotionConfig,
    "sensor": SensorConfig,
    "qscore": QScoreConfig,
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    map_path: Path
    trajectory_path: Path
    n_seeds: int = 25
    seed: int = 0
    output_dir: Path = Path("runs")
    observation_log: Path | None = None
    perfect: bool = False
    filter: FilterConfig = field(default_factory=FilterConfig)
    motion: MotionConfig = field(default_factory=MotionConfig)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    qscore: QScoreConfig = field(default_factory=QScoreConfig)

    def __post_init__(self):
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be >= 1")

    def check_files(self) -> None:
        for p in (self.map_path, self.trajectory_path, self.observation_log):
            if p is not None and not Path(p).is_file():
                raise ConfigError(f"referenced file does not exist: {p}")

    @property
    def effective_sensor(self) -> SensorConfig:
        return replace(self.sensor, perfect=True) if self.perfect else self.sensor

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in SECTIONS:
                v = {g.name: _jsonable(getattr(v, g.name)) for g in fields(v)}
            out[f.name] = _jsonable(v)
        return out


def _jsonable(v):
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, tuple):
        return list(v)
    return v


def _coerce(section: str, name: str, raw: Any, default: Any) -> Any:
    if name == "init_mean":
        if raw is None or (isinstance(raw, str) and raw.lower() in ("", "none", "null")):
            return None
        if isinstance(raw, str):
            raw = [s for s in raw.replace(";", ",").split(",")]
        try:
            x, y = (float(v) for v in raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{section}.{name}: expected two numbers, got {raw!r}") from exc
        return (x, y)
    try:
        if isinstance(default, bool):
            if isinstance(raw, str):
                if raw.lower() in ("1", "true", "yes", "on"):
                    return True
                if raw.lower() in ("0", "false", "no", "off"):
                    return False
                raise ValueError(raw)
            return bool(raw)
        if isinstance(default, int):
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}.{name}: cannot interpret {raw!r}") from exc
    return raw


def _build_section(name: str, values: dict[str, Any]):
    cls = SECTIONS[name]
    defaults = cls()
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown {name} settings: {sorted(unknown)}")
    kwargs = {k: _coerce(name, k, v, getattr(defaults, k)) for k, v in values.items()}
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def from_dict(doc: dict[str, Any], base_dir: Path | None = None) -> ExperimentConfig:
    """Build a config; relative paths resolve against ``base_dir``."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    top = {f.name for f in fields(ExperimentConfig)}
    unknown = set(doc) - top
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("map_path", "trajectory_path"):
        if key not in doc:
            raise ConfigError(f"missing required key {key!r}")

    def path(v):
        if v is None:
            return None
        p = Path(v)
        return p if p.is_absolute() else base / p

    kwargs: dict[str, Any] = {
        "map_path": path(doc["map_path"]),
        "trajectory_path": path(doc["trajectory_path"]),
        "observation_log": path(doc.get("observation_log")),
        "output_dir": path(doc.get("output_dir", "runs")),
    }
    for key in ("n_seeds", "seed"):
        if key in doc:
            kwargs[key] = _coerce("config", key, doc[key], 0)
    if "perfect" in doc:
        kwargs["perfect"] = _coerce("config", "perfect", doc["perfect"], False)
    for name in SECTIONS:
        section = doc.get(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"{name} must be an object")
        kwargs[name] = _build_section(name, section)
    return ExperimentConfig(**kwargs)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return from_dict(doc, path.parent)


def parse_overrides(tokens: list[str]) -> dict[str, dict[str, str]]:
    """Turn ``--section.field-name value`` (or ``=value``) tokens into a nested dict."""
    out: dict[str, dict[str, str]] = {}
    it = iter(tokens)
    for tok in it:
        if not tok.startswith("--") or "." not in tok:
            raise ConfigError(f"unrecognized argument {tok!r}")
        key, eq, value = tok[2:].partition("=")
        if not eq:
            try:
                value = next(it)
            except StopIteration:
                raise ConfigError(f"{tok} needs a value") from None
        section, _, name = key.partition(".")
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section in {tok!r}")
        out.setdefault(section, {})[name.replace("-", "_")] = value
    return out


def apply_overrides(cfg: ExperimentConfig, overrides: dict[str, dict[str, Any]]) -> ExperimentConfig:
    updates = {}
    for section, values in overrides.items():
        current = {f.name: getattr(getattr(cfg, section), f.name) for f in fields(SECTIONS[section])}
        unknown = set(values) - set(current)
        if unknown:
            raise ConfigError(f"unknown {section} settings: {sorted(unknown)}")
        current.update(values)
        updates[section] = _build_section(section, current)
    return replace(cfg, **updates)
