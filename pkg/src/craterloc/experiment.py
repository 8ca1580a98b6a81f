"""Single trials, Monte Carlo batches, and resampler sweeps."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig
from .metrics import step_metrics, weighted_mean
from .motion import OdometryStep, ground_truth_advance, initial_pose, make_rng, steps_from_waypoints
from .particle_filter import RESAMPLERS, FilterState, WeightCollapse, init_filter, step
from .sensing import observe, read_observation_log, write_observation_log
from .world import MapError, OrbitalMap, Pose, load_map, wrap_angle

log = logging.getLogger(__name__)


class SchemaError(ValueError):
    """A metrics file is empty or lacks required columns."""

METRIC_COLUMNS = ["step", "gt_x", "gt_y", "mu_x", "mu_y", "gt_error_m", "sqrt_lambda_max_m",
                  "mahalanobis", "n_eff", "resampled"]
SUMMARY_COLUMNS = ["seed", "status", "initial_gt_error_m", "final_gt_error_m",
                   "final_sqrt_lambda_max_m", "final_mahalanobis"]


def load_trajectory(path: str | Path) -> np.ndarray:
    """Read an ``x_m,y_m`` waypoint CSV."""
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if not {"x_m", "y_m"} <= set(reader.fieldnames or ()):
                raise ConfigError(f"{path}: trajectory needs columns x_m,y_m")
            pts = [(float(r["x_m"]), float(r["y_m"])) for r in reader]
    except OSError as exc:
        raise ConfigError(f"cannot read trajectory {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{path}: bad trajectory row: {exc}") from exc
    if len(pts) < 2:
        raise ConfigError(f"{path}: trajectory needs at least two waypoints")
    return np.array(pts)


@dataclass
class Scenario:
    """Everything a trial needs that does not depend on the seed."""

    orbital_map: OrbitalMap
    start: Pose
    steps: list[OdometryStep]
    replay: dict[int, np.ndarray] | None = None

    @classmethod
    def from_config(cls, cfg: ExperimentConfig) -> Scenario:
        cfg.check_files()
        try:
            orbital_map = load_map(cfg.map_path)
        except MapError as exc:
            raise ConfigError(str(exc)) from exc
        if len(orbital_map) == 0:
            raise ConfigError(f"{cfg.map_path}: map has no craters")
        waypoints = load_trajectory(cfg.trajectory_path)
        try:
            steps = steps_from_waypoints(waypoints)
            start = initial_pose(waypoints)
        except ValueError as exc:
            raise ConfigError(f"{cfg.trajectory_path}: {exc}") from exc
        replay = None
        if cfg.observation_log is not None:
            try:
                replay = read_observation_log(cfg.observation_log)
            except (OSError, ValueError) as exc:
                raise ConfigError(str(exc)) from exc
        return cls(orbital_map, start, steps, replay)


@dataclass
class TrialResult:
    seed: int
    rows: list[dict]
    failed: bool = False
    error: str = ""
    observations: dict[int, np.ndarray] = field(default_factory=dict, repr=False)
    states: list[dict] = field(default_factory=list, repr=False)
    truth: np.ndarray | None = field(default=None, repr=False)
    estimate: np.ndarray | None = field(default=None, repr=False)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def summary_row(self) -> dict:
        nan = math.nan
        first = self.rows[0] if self.rows else {}
        last = self.rows[-1] if self.rows and not self.failed else {}
        return {
            "seed": self.seed,
            "status": "failed" if self.failed else "ok",
            "initial_gt_error_m": first.get("gt_error_m", nan),
            "final_gt_error_m": last.get("gt_error_m", nan),
            "final_sqrt_lambda_max_m": last.get("sqrt_lambda_max_m", nan),
            "final_mahalanobis": last.get("mahalanobis", nan),
        }


def trial_streams(seed: int) -> dict:
    """Seed-indexed sub-streams. The sensor stream is independent of the filter's,
    so different filter settings see identical observations for a given seed."""
    offset_ss, filter_ss, sensor_ss, heading_ss = np.random.SeedSequence(seed).spawn(4)
    return {
        "offset": make_rng(offset_ss),
        "filter_seed": int(filter_ss.generate_state(1, np.uint64)[0]),
        "sensor": make_rng(sensor_ss),
        "heading": make_rng(heading_ss),
    }


def _row(step_idx: int, truth: np.ndarray, state: FilterState) -> dict:
    m = step_metrics(state.positions, state.log_weights, truth, state.n_eff, state.resampled)
    mu = weighted_mean(state.positions, state.log_weights)
    return {
        "step": step_idx,
        "gt_x": float(truth[0]), "gt_y": float(truth[1]),
        "mu_x": float(mu[0]), "mu_y": float(mu[1]),
        "gt_error_m": m.gt_error,
        "sqrt_lambda_max_m": m.sqrt_lambda_max,
        "mahalanobis": m.mahalanobis,
        "n_eff": m.n_eff,
        "resampled": int(m.resampled),
    }


def run_trial(cfg: ExperimentConfig, seed: int, *, scenario: Scenario | None = None,
              keep_states: bool = False) -> TrialResult:
    """Drive the truth along the trajectory, sense, and filter; deterministic in (cfg, seed).

    Unless ``filter.init_mean`` is set, the initial belief is centred on the true
    start displaced by a draw from N(0, init_sigma^2 I).
    """
    scenario = scenario or Scenario.from_config(cfg)
    streams = trial_streams(seed)
    pose = scenario.start
    fcfg = cfg.filter
    init_mean = fcfg.init_mean
    if init_mean is None:
        init_mean = tuple(pose.position + fcfg.init_sigma * streams["offset"].standard_normal(2))
    state = init_filter(replace(fcfg, init_mean=init_mean, seed=streams["filter_seed"]))
    sensor = cfg.effective_sensor

    result = TrialResult(seed=seed, rows=[])
    truth = [pose.position]
    result.rows.append(_row(0, pose.position, state))
    if keep_states:
        result.states.append(state.snapshot())
    for t, odo in enumerate(scenario.steps, start=1):
        pose = ground_truth_advance(pose, odo)
        truth.append(pose.position)
        if scenario.replay is not None:
            obs = scenario.replay.get(t, np.empty((0, 2)))
        else:
            obs = observe(pose, scenario.orbital_map, sensor, streams["sensor"])
        result.observations[t] = obs
        heading = pose.heading
        if cfg.motion.heading_noise > 0:
            heading = wrap_angle(heading + cfg.motion.heading_noise * streams["heading"].standard_normal())
        try:
            state = step(state, odo, obs, scenario.orbital_map, cfg.motion, cfg.qscore, heading=heading)
            result.rows.append(_row(t, pose.position, state))
        except WeightCollapse as exc:
            log.warning("seed %d: filter collapsed at step %d: %s", seed, t, exc)
            result.failed, result.error = True, f"step {t}: {exc}"
            break
        if keep_states:
            result.states.append(state.snapshot())
    result.truth = np.array(truth)
    result.estimate = np.array([[r["mu_x"], r["mu_y"]] for r in result.rows])
    return result


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v)) if isinstance(v, float) else str(v)


def rows_to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def write_metrics_csv(path: str | Path, rows: list[dict]) -> None:
    Path(path).write_text(rows_to_csv(rows, METRIC_COLUMNS))


def read_metrics_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Load a per-step metrics CSV, validating its columns."""
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            cols = reader.fieldnames
            if not cols:
                raise SchemaError(f"{path}: empty metrics file")
            missing = [c for c in METRIC_COLUMNS if c not in cols]
            if missing:
                raise SchemaError(f"{path}: missing columns {missing}")
            rows = list(reader)
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise SchemaError(f"{path}: no metric rows")
    try:
        return {c: np.array([float(r[c]) for r in rows]) for c in METRIC_COLUMNS}
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric value: {exc}") from exc


@dataclass
class RunSummary:
    rows: list[dict]

    @property
    def n_seeds(self) -> int:
        return len(self.rows)

    @property
    def n_failed(self) -> int:
        return sum(r["status"] == "failed" for r in self.rows)

    def values(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows if r["status"] == "ok"], dtype=float)

    def mean(self, name: str) -> float:
        v = self.values(name)
        return float(v.mean()) if v.size else math.nan

    def std(self, name: str) -> float:
        v = self.values(name)
        return float(v.std()) if v.size else math.nan

    def aggregate_rows(self) -> list[dict]:
        return [{"metric": name, "mean": self.mean(name), "std": self.std(name),
                 "n_ok": self.n_seeds - self.n_failed, "n_failed": self.n_failed}
                for name in SUMMARY_COLUMNS[2:]]


@dataclass
class BatchResult:
    summary: RunSummary
    trials: list[TrialResult]

    @property
    def final_errors(self) -> np.ndarray:
        return self.summary.values("final_gt_error_m")

    def traces(self, column: str) -> np.ndarray:
        """(n_ok_seeds, n_steps) array of one metric over successful trials."""
        return np.array([t.column(column) for t in self.trials if not t.failed])


def _trial_job(args):
    cfg, seed, scenario = args
    return run_trial(cfg, seed, scenario=scenario)


def run_batch(cfg: ExperimentConfig, *, seeds: list[int] | None = None, jobs: int = 1,
              scenario: Scenario | None = None) -> BatchResult:
    """Run ``cfg.n_seeds`` trials with seeds ``cfg.seed .. cfg.seed + n - 1``.

    ``jobs > 1`` fans seeds out over processes; results are identical to a
    sequential run.
    """
    scenario = scenario or Scenario.from_config(cfg)
    seeds = list(range(cfg.seed, cfg.seed + cfg.n_seeds)) if seeds is None else list(seeds)
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            trials = list(pool.map(_trial_job, [(cfg, s, scenario) for s in seeds]))
    else:
        trials = [run_trial(cfg, s, scenario=scenario) for s in seeds]
    return BatchResult(RunSummary([t.summary_row() for t in trials]), trials)


def run_sweep(cfg: ExperimentConfig, *, jobs: int = 1,
              resamplers=RESAMPLERS) -> dict[str, BatchResult]:
    """Same seeds and observation streams under each resampling scheme."""
    scenario = Scenario.from_config(cfg)
    return {name: run_batch(replace(cfg, filter=replace(cfg.filter, resampler=name)),
                            jobs=jobs, scenario=scenario)
            for name in resamplers}


def trace_variance(batch: BatchResult, column: str = "sqrt_lambda_max_m") -> float:
    """Across-seed variance of a metric trace, averaged over steps."""
    traces = batch.traces(column)
    if len(traces) == 0:
        return math.nan
    return float(traces.var(axis=0).mean())


# --- output writers ---------------------------------------------------------

def write_meta(out_dir: Path, cfg: ExperimentConfig, command: str, **extra) -> None:
    """Timestamps live only here so every other output is reproducible byte for byte."""
    meta = {
        "command": command,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "craterloc_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": cfg.to_dict(),
        **extra,
    }
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def write_trial(out_dir: Path, trial: TrialResult, *, dump_state: bool = False) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(out_dir / "metrics.csv", trial.rows)
    write_observation_log(out_dir / "observations.csv", trial.observations)
    if dump_state:
        with open(out_dir / "states.jsonl", "w") as fh:
            for s in trial.states:
                fh.write(json.dumps(s) + "\n")


def write_batch(out_dir: Path, batch: BatchResult) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "summary.csv").write_text(rows_to_csv(batch.summary.rows, SUMMARY_COLUMNS))
    (out_dir / "aggregate.csv").write_text(
        rows_to_csv(batch.summary.aggregate_rows(), ["metric", "mean", "std", "n_ok", "n_failed"]))
    seeds_dir = out_dir / "seeds"
    seeds_dir.mkdir(exist_ok=True)
    for t in batch.trials:
        write_metrics_csv(seeds_dir / f"seed_{t.seed:06d}.csv", t.rows)


def sweep_rows(results: dict[str, BatchResult]) -> list[dict]:
    return [{
        "resampler": name,
        "mean_final_gt_error_m": b.summary.mean("final_gt_error_m"),
        "std_final_gt_error_m": b.summary.std("final_gt_error_m"),
        "mean_final_sqrt_lambda_max_m": b.summary.mean("final_sqrt_lambda_max_m"),
        "uncertainty_trace_variance": trace_variance(b),
        "n_failed": b.summary.n_failed,
    } for name, b in results.items()]


SWEEP_COLUMNS = ["resampler", "mean_final_gt_error_m", "std_final_gt_error_m",
                 "mean_final_sqrt_lambda_max_m", "uncertainty_trace_variance", "n_failed"]
