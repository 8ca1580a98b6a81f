"""``crater-loc`` command line entry point."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, apply_overrides, load_config, parse_overrides
from .experiment import (
    SWEEP_COLUMNS, SchemaError, Scenario, rows_to_csv, run_batch, run_sweep, run_trial,
    sweep_rows, write_batch, write_meta, write_trial,
)
from .plots import (comparison_figure, histogram_figure, plot_metrics_file, save_svg,
                    trace_figure, trajectory_figure)

EXIT_OK, EXIT_CONFIG, EXIT_FAILED_TRIAL = 0, 2, 3

log = logging.getLogger("craterloc")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="crater-loc",
        description="Crater-rim particle-filter localization experiments.",
        epilog="Any config field can be overridden as --SECTION.FIELD VALUE, "
               "e.g. --filter.n-particles 200 or --sensor.false-positive-rate 0.",
    )
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, type=Path, help="experiment JSON file")
        sp.add_argument("--output-dir", type=Path, help="override output_dir")
        sp.add_argument("--run-id", help="output sub-directory name")
        sp.add_argument("--perfect", action="store_true",
                        help="noise-free, loss-free, false-positive-free observations")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes across seeds")

    run = sub.add_parser("run", help="single trial")
    common(run)
    run.add_argument("--seed", type=int, help="trial seed (default: config seed)")
    run.add_argument("--dump-state", action="store_true", help="write per-step particle JSON lines")

    batch = sub.add_parser("batch", help="Monte Carlo batch over consecutive seeds")
    common(batch)
    batch.add_argument("--seeds", type=int, help="number of seeds (default: config n_seeds)")
    batch.add_argument("--seed", type=int, help="first seed")

    sweep = sub.add_parser("sweep-resamplers", help="compare resampling schemes on shared seeds")
    common(sweep)
    sweep.add_argument("--seeds", type=int)
    sweep.add_argument("--seed", type=int)

    plot = sub.add_parser("plot", help="render a metrics CSV to SVG")
    plot.add_argument("metrics", type=Path)
    plot.add_argument("--out", type=Path)
    return p


def _load(args, extra: list[str]):
    cfg = apply_overrides(load_config(args.config), parse_overrides(extra))
    top = {}
    if args.output_dir is not None:
        top["output_dir"] = args.output_dir
    if args.perfect:
        top["perfect"] = True
    if getattr(args, "seed", None) is not None:
        top["seed"] = args.seed
    if getattr(args, "seeds", None) is not None:
        if args.seeds < 1:
            raise ConfigError("--seeds must be >= 1")
        top["n_seeds"] = args.seeds
    return replace(cfg, **top) if top else cfg


def _out_dir(cfg, args, default_id: str) -> Path:
    out = Path(cfg.output_dir) / (args.run_id or default_id)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(cfg, args) -> int:
    scenario = Scenario.from_config(cfg)
    trial = run_trial(cfg, cfg.seed, scenario=scenario, keep_states=args.dump_state)
    out = _out_dir(cfg, args, f"run-seed{cfg.seed}")
    write_trial(out, trial, dump_state=args.dump_state)
    (out / "summary.csv").write_text(rows_to_csv([trial.summary_row()], list(trial.summary_row())))
    save_svg(trace_figure({k: trial.column(k) for k in ("step", "gt_error_m", "sqrt_lambda_max_m",
                                                         "resampled")}), out / "traces.svg")
    save_svg(trajectory_figure(scenario.orbital_map, trial.truth[:len(trial.estimate)], trial.estimate),
             out / "trajectory.svg")
    write_meta(out, cfg, "run", seed=cfg.seed)
    s = trial.summary_row()
    print(f"seed {cfg.seed}: {s['status']} final error {s['final_gt_error_m']:.3f} m, "
          f"uncertainty {s['final_sqrt_lambda_max_m']:.3f} m -> {out}")
    return EXIT_FAILED_TRIAL if trial.failed else EXIT_OK


def cmd_batch(cfg, args) -> int:
    batch = run_batch(cfg, jobs=args.jobs)
    out = _out_dir(cfg, args, f"batch-seed{cfg.seed}-n{cfg.n_seeds}")
    write_batch(out, batch)
    save_svg(histogram_figure(batch.final_errors), out / "final_error_hist.svg")
    write_meta(out, cfg, "batch")
    for row in batch.summary.aggregate_rows():
        print(f"{row['metric']:<26} {row['mean']:8.3f} +/- {row['std']:.3f}")
    print(f"{batch.summary.n_failed} failed of {batch.summary.n_seeds} -> {out}")
    return EXIT_FAILED_TRIAL if batch.summary.n_failed else EXIT_OK


def cmd_sweep(cfg, args) -> int:
    results = run_sweep(cfg, jobs=args.jobs)
    out = _out_dir(cfg, args, f"sweep-seed{cfg.seed}-n{cfg.n_seeds}")
    for name, batch in results.items():
        write_batch(out / name, batch)
        save_svg(histogram_figure(batch.final_errors, title=f"final error ({name})"),
                 out / name / "final_error_hist.svg")
    rows = sweep_rows(results)
    (out / "comparison.csv").write_text(rows_to_csv(rows, SWEEP_COLUMNS))
    traces = {name: {c: b.traces(c) for c in ("gt_error_m", "sqrt_lambda_max_m")}
              for name, b in results.items()}
    save_svg(comparison_figure(traces), out / "resampler_comparison.svg")
    write_meta(out, cfg, "sweep-resamplers")
    for r in rows:
        print(f"{r['resampler']:<12} final error {r['mean_final_gt_error_m']:.3f} "
              f"+/- {r['std_final_gt_error_m']:.3f} m, "
              f"uncertainty trace variance {r['uncertainty_trace_variance']:.4f}")
    failed = any(b.summary.n_failed for b in results.values())
    return EXIT_FAILED_TRIAL if failed else EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "plot":
        if extra:
            parser.error(f"unrecognized arguments: {' '.join(extra)}")
        try:
            print(plot_metrics_file(args.metrics, args.out))
        except SchemaError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        return EXIT_OK
    try:
        cfg = _load(args, extra)
        handler = {"run": cmd_run, "batch": cmd_batch, "sweep-resamplers": cmd_sweep}[args.command]
        return handler(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
