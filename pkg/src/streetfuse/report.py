"""Figure rendering for evaluation reports.

The eval path writes two PNGs next to its delimited output: a map overlay
showing cameras, ground truth and matched/unmatched predictions in local
chart meters, and a height panel comparing predicted elevations with their
per-object spread and the ground truth.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .geometry import CameraFrame, GeoPoint, LocalChart
from .pipeline import EvalReport, GroundTruthObject, ObjectInstance


def _figure_anchor(
    predictions: list[ObjectInstance],
    truths: list[GroundTruthObject],
    frames: list[CameraFrame],
) -> GeoPoint:
    points = [p.position for p in predictions] + [t.position for t in truths]
    points += [f.position for f in frames]
    if not points:
        return GeoPoint(0.0, 0.0)
    lat = sum(p.lat for p in points) / len(points)
    lon = sum(p.lon for p in points) / len(points)
    return GeoPoint(lat, lon)


def render_map_figure(
    report: EvalReport,
    predictions: list[ObjectInstance],
    truths: list[GroundTruthObject],
    frames: list[CameraFrame],
    path: str | Path,
) -> Path:
    """Scatter map of the evaluation in local chart meters."""
    chart = LocalChart(_figure_anchor(predictions, truths, frames))
    matched = {id(m.prediction) for m in report.matches}

    fig, ax = plt.subplots(figsize=(8, 6))
    if frames:
        xs, ys = zip(*(chart.to_xy(f.position) for f in frames))
        ax.scatter(xs, ys, s=8, c="tab:orange", label="cameras", zorder=2)
    if truths:
        xs, ys = zip(*(chart.to_xy(t.position) for t in truths))
        ax.scatter(xs, ys, marker="s", s=60, facecolors="none", edgecolors="tab:blue",
                   label="ground truth", zorder=3)
    tp = [p for p in predictions if id(p) in matched]
    fp = [p for p in predictions if id(p) not in matched]
    if tp:
        xs, ys = zip(*(chart.to_xy(p.position) for p in tp))
        ax.scatter(xs, ys, marker="*", s=90, c="tab:green", label="true positives", zorder=4)
    if fp:
        xs, ys = zip(*(chart.to_xy(p.position) for p in fp))
        ax.scatter(xs, ys, marker="*", s=90, c="tab:red", label="false positives", zorder=4)
    ax.set_xlabel("east (m)")
    ax.set_ylabel("north (m)")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    ax.set_title(
        f"precision {report.precision:.3f}  recall {report.recall:.3f}  "
        f"f-score {report.f_score:.3f}"
    )
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_height_figure(report: EvalReport, path: str | Path) -> Path:
    """Predicted vs true elevations for matched objects, with std bars."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    with_elev = [m for m in report.matches if m.truth.elevation is not None]
    if with_elev:
        idx = range(len(with_elev))
        pred = [m.prediction.height.mean for m in with_elev]
        stds = [m.prediction.height.std for m in with_elev]
        true = [m.truth.elevation for m in with_elev]
        ax1.errorbar(idx, pred, yerr=stds, fmt="o", ms=4, capsize=3,
                     color="tab:green", label="predicted (mean ± std)")
        ax1.scatter(idx, true, marker="_", s=160, c="tab:blue", label="ground truth")
        ax1.set_xlabel("matched object")
        ax1.set_ylabel("elevation (m)")
        ax1.legend(fontsize=8)
        ax1.grid(True, alpha=0.3)
    else:
        ax1.text(0.5, 0.5, "no matched objects with elevation", ha="center", va="center")
        ax1.set_axis_off()
    if report.matches:
        ax2.hist([m.distance for m in report.matches], bins=20, color="tab:gray")
        ax2.set_xlabel("position error (m)")
        ax2.set_ylabel("matches")
        ax2.grid(True, alpha=0.3)
    else:
        ax2.text(0.5, 0.5, "no matches", ha="center", va="center")
        ax2.set_axis_off()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_eval_figures(
    report: EvalReport,
    predictions: list[ObjectInstance],
    truths: list[GroundTruthObject],
    frames: list[CameraFrame],
    out_dir: str | Path,
) -> list[Path]:
    """Render both report figures into a directory; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return [
        render_map_figure(report, predictions, truths, frames, out / "map.png"),
        render_height_figure(report, out / "heights.png"),
    ]
