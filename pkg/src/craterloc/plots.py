"""SVG figures for trials, batches, and resampler sweeps.

Figures are built on bare ``Figure`` objects (no pyplot state, no display)
and written with a fixed hash salt and no date stamp so output is byte-stable.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import matplotlib
import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure
from matplotlib.patches import Circle

from .experiment import SchemaError, read_metrics_csv
from .world import OrbitalMap

__all__ = ["SchemaError", "trace_figure", "histogram_figure", "comparison_figure",
           "trajectory_figure", "save_svg", "plot_metrics_file"]

STYLE = {
    "svg.hashsalt": "craterloc",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
}
COLORS = {"systematic": "C0", "multinomial": "C3", "residual": "C2", "stratified": "C1"}


def save_svg(fig: Figure, path: str | Path) -> Path:
    path = Path(path)
    with matplotlib.rc_context(STYLE):
        FigureCanvasSVG(fig)
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def _figure(**kw) -> Figure:
    with matplotlib.rc_context(STYLE):
        return Figure(**kw)


def trace_figure(metrics: Mapping[str, np.ndarray], title: str = "") -> Figure:
    """Ground-truth error and filter uncertainty against step."""
    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=(6.4, 4.8))
        ax_err, ax_unc = fig.subplots(2, 1, sharex=True)
        step = metrics["step"]
        ax_err.plot(step, metrics["gt_error_m"], marker="." if len(step) == 1 else None, color="C0")
        ax_err.set_ylabel("ground truth error [m]")
        ax_unc.plot(step, metrics["sqrt_lambda_max_m"], marker="." if len(step) == 1 else None,
                    color="C1")
        ax_unc.set_ylabel(r"$\sqrt{\lambda_{max}}$ [m]")
        ax_unc.set_xlabel("step")
        resampled = step[metrics["resampled"] > 0]
        for x in resampled:
            ax_unc.axvline(x, color="0.8", lw=0.5, zorder=0)
        if title:
            ax_err.set_title(title)
        fig.tight_layout()
    return fig


def histogram_figure(final_errors, title: str = "final ground truth error") -> Figure:
    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=(5.0, 3.5))
        ax = fig.subplots()
        errs = np.asarray(final_errors, dtype=float)
        errs = errs[np.isfinite(errs)]
        top = max(1.0, float(np.ceil(errs.max()))) if errs.size else 1.0
        ax.hist(errs, bins=np.linspace(0.0, top, 2 * int(top) + 1), color="C0", edgecolor="k")
        ax.set_xlabel("final error [m]")
        ax.set_ylabel("trials")
        ax.set_title(title)
        fig.tight_layout()
    return fig


def comparison_figure(traces: Mapping[str, Mapping[str, np.ndarray]]) -> Figure:
    """Mean and one-sigma band across seeds per resampler.

    ``traces[name][column]`` is an (n_seeds, n_steps) array.
    """
    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=(6.4, 4.8))
        axes = fig.subplots(2, 1, sharex=True)
        for ax, column, label in zip(axes, ("gt_error_m", "sqrt_lambda_max_m"),
                                     ("ground truth error [m]", r"$\sqrt{\lambda_{max}}$ [m]")):
            for name, cols in traces.items():
                arr = np.asarray(cols[column], dtype=float)
                if arr.size == 0:
                    continue
                x = np.arange(arr.shape[1])
                mean, sd = arr.mean(axis=0), arr.std(axis=0)
                color = COLORS.get(name)
                ax.plot(x, mean, label=name, color=color)
                ax.fill_between(x, mean - sd, mean + sd, color=color, alpha=0.15, lw=0)
            ax.set_ylabel(label)
        axes[0].legend(loc="upper right")
        axes[1].set_xlabel("step")
        fig.tight_layout()
    return fig


def trajectory_figure(orbital_map: OrbitalMap, truth: np.ndarray, estimate: np.ndarray) -> Figure:
    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=(5.0, 5.0))
        ax = fig.subplots()
        for c in orbital_map.craters:
            ax.add_patch(Circle((c.x, c.y), c.radius, fill=False, color="0.3"))
            ax.annotate(str(c.id), (c.x, c.y), ha="center", va="center", fontsize=7)
        ax.plot(truth[:, 0], truth[:, 1], color="C3", label="ground truth")
        ax.plot(estimate[:, 0], estimate[:, 1], color="C0", lw=0.8, label="weighted mean")
        ax.plot(*truth[0], "s", color="C3")
        ax.plot(*truth[-1], "o", color="C2")
        ax.set_aspect("equal")
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.legend(loc="best")
        fig.tight_layout()
    return fig


def plot_metrics_file(csv_path: str | Path, out: str | Path | None = None) -> Path:
    """Render the trace figure for a per-step metrics CSV next to it."""
    csv_path = Path(csv_path)
    metrics = read_metrics_csv(csv_path)
    out = Path(out) if out is not None else csv_path.with_suffix(".svg")
    return save_svg(trace_figure(metrics, title=csv_path.stem), out)
