"""Renderers for the three figure kinds.

Rendering is deterministic: the Agg backend, fixed figure geometry, colormap
normalization taken from the data (or flags), and no timestamps in the
output, so re-rendering identical inputs produces identical pixels.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("trajectory-band", "heatmap-panel", "comparison-series")

SERIES_COLORS = ("#0b7285", "#c2255c", "#5f3dc4", "#e8590c", "#2b8a3e", "#495057")
BAND_COLOR = "#66c2cd"
SAFE_COLOR = "#dbe9db"


class ColumnError(ValueError):
    """A required column is missing from an input CSV."""

    def __init__(self, column: str, path: str, available):
        self.column = column
        super().__init__(
            f"column {column!r} not found in {path}; available: {sorted(available)}"
        )


@dataclass(frozen=True)
class PlotJob:
    kind: str
    inputs: tuple[str, ...]
    out: str
    x: str = "time_s"
    y: str = ""
    band_lo: str = ""
    band_hi: str = ""
    labels: tuple[str, ...] = ()
    safe_lo: float | None = None
    safe_hi: float | None = None
    markers: tuple[tuple[float, float], ...] = ()
    title: str = ""
    log_scale: bool = False
    reference: str = ""  # optional reference column for comparison panels

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected {KINDS}")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    """Read a trajectory CSV: optional '#' comment line, then a header row."""
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("#"):
            fh.seek(0)
        reader = csv.reader(fh)
        header = next(reader)
        cols: dict[str, list] = {h: [] for h in header}
        for rowvals in reader:
            if not rowvals:
                continue
            for h, cell in zip(header, rowvals):
                cols[h].append(cell)
    out = {}
    for h, cells in cols.items():
        try:
            out[h] = np.array([float(c) for c in cells])
        except ValueError:
            out[h] = np.array(cells)
    return out


def read_field_csv(path):
    """Read a (px, py, value) field CSV into axis vectors and a value grid."""
    data = read_trajectory_csv(path)
    for needed in ("px", "py", "value"):
        if needed not in data:
            raise ColumnError(needed, str(path), data.keys())
    xs = np.unique(data["px"])
    ys = np.unique(data["py"])
    grid = np.full((len(xs), len(ys)), np.nan)
    xi = np.searchsorted(xs, data["px"])
    yi = np.searchsorted(ys, data["py"])
    grid[xi, yi] = data["value"]
    return xs, ys, grid


def _column(data: dict, name: str, path: str) -> np.ndarray:
    if name not in data:
        raise ColumnError(name, path, data.keys())
    return data[name]


def _new_figure():
    return plt.subplots(figsize=(6.4, 4.0), dpi=120)


def _finish(fig, ax, job: PlotJob):
    if job.title:
        ax.set_title(job.title)
    fig.tight_layout()
    fig.savefig(job.out, metadata={"Software": "trajplots"})
    plt.close(fig)


def _render_trajectory_band(job: PlotJob):
    path = job.inputs[0]
    data = read_trajectory_csv(path)
    x = _column(data, job.x, path)
    y = _column(data, job.y, path)
    fig, ax = _new_figure()
    if job.safe_lo is not None and job.safe_hi is not None:
        ax.axhspan(job.safe_lo, job.safe_hi, color=SAFE_COLOR, zorder=0, label="safe range")
    if job.band_lo and job.band_hi:
        lo = _column(data, job.band_lo, path)
        hi = _column(data, job.band_hi, path)
        ax.fill_between(
            x, lo, hi, color=BAND_COLOR, alpha=0.5, zorder=1, label="uncertainty set"
        )
    ax.plot(x, y, color=SERIES_COLORS[0], lw=1.8, zorder=2, label=job.y)
    ax.set_xlabel(job.x)
    ax.set_ylabel(job.y)
    ax.legend(loc="best", fontsize=8)
    _finish(fig, ax, job)


def _render_heatmap_panel(job: PlotJob):
    xs, ys, grid = read_field_csv(job.inputs[0])
    vals = np.ma.masked_invalid(grid.T)
    if job.log_scale:
        vals = np.ma.log10(np.ma.masked_less_equal(vals, 0.0))
    fig, ax = _new_figure()
    mesh = ax.pcolormesh(
        xs,
        ys,
        vals,
        shading="nearest",
        cmap="viridis",
        vmin=float(vals.min()),
        vmax=float(vals.max()),
    )
    fig.colorbar(mesh, ax=ax, label=("log10 value" if job.log_scale else "value"))
    for mx, my in job.markers:
        ax.plot(mx, my, marker="*", ms=14, color="#ffffff", mec="#222222", mew=1.0)
    ax.set_xlabel("px")
    ax.set_ylabel("py")
    ax.set_aspect("equal")
    _finish(fig, ax, job)


def _render_comparison_series(job: PlotJob):
    fig, ax = _new_figure()
    if job.safe_lo is not None and job.safe_hi is not None:
        ax.axhspan(job.safe_lo, job.safe_hi, color=SAFE_COLOR, zorder=0, label="safe range")
    labels = job.labels or tuple(job.inputs)
    ref_drawn = False
    for k, path in enumerate(job.inputs):
        data = read_trajectory_csv(path)
        x = _column(data, job.x, path)
        y = _column(data, job.y, path)
        label = labels[k] if k < len(labels) else path
        ax.plot(x, y, color=SERIES_COLORS[k % len(SERIES_COLORS)], lw=1.6, label=label)
        if job.reference and not ref_drawn:
            ref = _column(data, job.reference, path)
            ax.plot(x, ref, color="#666666", lw=1.0, ls="--", label=job.reference)
            ref_drawn = True
    ax.set_xlabel(job.x)
    ax.set_ylabel(job.y)
    ax.legend(loc="best", fontsize=8)
    _finish(fig, ax, job)


def render(job: PlotJob) -> str:
    """Render the job to its output image; returns the output path."""
    if job.kind == "trajectory-band":
        _render_trajectory_band(job)
    elif job.kind == "heatmap-panel":
        _render_heatmap_panel(job)
    else:
        _render_comparison_series(job)
    return job.out
