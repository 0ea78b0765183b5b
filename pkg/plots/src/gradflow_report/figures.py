"""Figure rendering, one function per figure kind.

All rendering is headless (Agg) and file-to-file: inputs are trace CSVs,
convergence CSVs, or GFZF1 snapshots; the output is an image per job.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .formats import SchemaError, read_convergence, read_snapshot, read_trace

FIGURE_KINDS = (
    "energy_compare",
    "energy_error",
    "factor_trace",
    "field_2d",
    "field_3d_levelset",
    "convergence_loglog",
)

# strip volatile metadata so re-rendering is byte-identical
_PNG_METADATA = {"Software": "gradflow-report"}


@dataclass(frozen=True)
class FigureJob:
    kind: str
    inputs: list[str] = field(default_factory=list)
    output: str = "figure.png"

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise ValueError("a figure job needs at least one input file")


def _save(fig, output: str) -> None:
    Path(output).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output, dpi=150, metadata=_PNG_METADATA)
    plt.close(fig)


def render_energy_compare(job: FigureJob) -> dict:
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for path in job.inputs:
        trace = read_trace(path)
        ax.plot(trace["t"], trace["E_orig"], label=f"{trace.label}: original")
        ax.plot(trace["t"], trace["E_mod"], "--", label=f"{trace.label}: modified")
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.legend(fontsize=8)
    _save(fig, job.output)
    return {}


def render_energy_error(job: FigureJob) -> dict:
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for path in job.inputs:
        trace = read_trace(path)
        ax.plot(trace["t"], trace["E_mod"] - trace["E_orig"], label=trace.label)
    ax.set_xlabel("t")
    ax.set_ylabel("modified minus original energy")
    ax.legend(fontsize=8)
    _save(fig, job.output)
    return {}


def render_factor_trace(job: FigureJob) -> dict:
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for path in job.inputs:
        trace = read_trace(path)
        ax.plot(trace["t"], trace["p_value"], label=f"{trace.label}: p")
        if np.any(trace["s_value"] != 0.0):
            ax.plot(trace["t"], trace["s_value"], "--", label=f"{trace.label}: s")
    ax.set_xlabel("t")
    ax.set_ylabel("correction factor")
    ax.legend(fontsize=8)
    _save(fig, job.output)
    return {}


def render_field_2d(job: FigureJob) -> dict:
    snap = read_snapshot(job.inputs[0])
    if len(snap.dims) != 2:
        raise SchemaError(f"{job.inputs[0]}: field_2d needs a 2D snapshot")
    fig, ax = plt.subplots(figsize=(5.2, 4.5))
    image = ax.imshow(
        snap.values.T,
        origin="lower",
        extent=(0.0, snap.extents[0], 0.0, snap.extents[1]),
        cmap="viridis",
    )
    fig.colorbar(image, ax=ax)
    ax.set_title(f"{snap.model}, t = {snap.time:g}")
    _save(fig, job.output)
    return {}


def render_field_3d_levelset(job: FigureJob, level: float = 0.0) -> dict:
    from skimage.measure import marching_cubes

    snap = read_snapshot(job.inputs[0])
    if len(snap.dims) != 3:
        raise SchemaError(f"{job.inputs[0]}: field_3d_levelset needs a 3D snapshot")
    lo, hi = snap.values.min(), snap.values.max()
    if not lo < level < hi:
        raise SchemaError(
            f"{job.inputs[0]}: level {level} outside field range [{lo:.3g}, {hi:.3g}]"
        )
    spacing = tuple(l / n for l, n in zip(snap.extents, snap.dims))
    verts, faces, _, _ = marching_cubes(snap.values, level=level, spacing=spacing)
    fig = plt.figure(figsize=(5.5, 5.0))
    ax = fig.add_subplot(projection="3d")
    ax.plot_trisurf(
        verts[:, 0], verts[:, 1], faces, verts[:, 2],
        color="tab:blue", lw=0.1, alpha=0.9,
    )
    ax.set_xlim(0, snap.extents[0])
    ax.set_ylim(0, snap.extents[1])
    ax.set_zlim(0, snap.extents[2])
    ax.set_title(f"{snap.model}, zero level set, t = {snap.time:g}")
    _save(fig, job.output)
    return {"vertices": int(verts.shape[0])}


def render_convergence_loglog(job: FigureJob) -> dict:
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    slopes = {}
    for path in job.inputs:
        dts, errors, _ = read_convergence(path)
        label = Path(path).stem
        ax.loglog(dts, errors, "o-", label=label)
        fit = np.polyfit(np.log(dts), np.log(errors), 1)
        slopes[label] = float(fit[0])
    # slope-2 guide anchored on the first table's coarsest point
    dts, errors, _ = read_convergence(job.inputs[0])
    guide = errors[0] * (dts / dts[0]) ** 2
    ax.loglog(dts, guide, "k:", label="slope 2")
    ax.set_xlabel("time step")
    ax.set_ylabel("final-time max error")
    ax.legend(fontsize=8)
    _save(fig, job.output)
    fitted = slopes[Path(job.inputs[0]).stem]
    return {"fitted_slope": fitted, "all_slopes": slopes}


_RENDERERS = {
    "energy_compare": render_energy_compare,
    "energy_error": render_energy_error,
    "factor_trace": render_factor_trace,
    "field_2d": render_field_2d,
    "field_3d_levelset": render_field_3d_levelset,
    "convergence_loglog": render_convergence_loglog,
}


def render_report(jobs: list[FigureJob]) -> dict:
    """Render every job; returns {output_path: info} per figure."""
    results = {}
    for job in jobs:
        for path in job.inputs:
            if not Path(path).exists():
                raise FileNotFoundError(f"figure input does not exist: {path}")
        results[str(job.output)] = _RENDERERS[job.kind](job)
    return results
