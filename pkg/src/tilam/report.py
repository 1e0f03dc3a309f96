"""Figure rendering for run artifacts. All figures go straight to files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .pipeline import ALL_MODES, ConvergenceRecord, RunResult
from .scan import LABEL_TERRAIN, LabeledCloud

_MODE_LABELS = {"tilam": "inclination-aided", "icp_slam": "scan matching",
                "dead_reckoning": "odometry"}


def plot_trajectory(path, result: RunResult) -> None:
    """Top view and height profile of truth against the estimate."""
    fig, (ax_xy, ax_z) = plt.subplots(1, 2, figsize=(11, 4.5))
    ax_xy.plot(result.truth[:, 0], result.truth[:, 1], "k-", label="truth")
    ax_xy.plot(result.estimate[:, 0], result.estimate[:, 1], "C0--", label="estimate")
    if result.scan_ticks:
        pts = result.truth[result.scan_ticks]
        ax_xy.plot(pts[:, 0], pts[:, 1], "r^", ms=7, label="scan stops")
    ax_xy.set_xlabel("x [m]")
    ax_xy.set_ylabel("y [m]")
    ax_xy.set_aspect("equal", adjustable="datalim")
    ax_xy.legend(loc="best")
    ax_xy.set_title(f"route, {_MODE_LABELS.get(result.mode, result.mode)}")

    ax_z.plot(result.times, result.truth[:, 2], "k-", label="truth")
    ax_z.plot(result.times, result.estimate[:, 2], "C0--", label="estimate")
    ax_z.set_xlabel("t [s]")
    ax_z.set_ylabel("z [m]")
    ax_z.legend(loc="best")
    ax_z.set_title("height profile")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_errors(path, result: RunResult) -> None:
    """Per-axis and euclidean position error over time with the markers."""
    err = result.estimate[:, 0:3] - result.truth[:, 0:3]
    d = np.linalg.norm(err, axis=1)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for k, name in enumerate("xyz"):
        ax.plot(result.times, err[:, k], lw=0.9, label=f"{name} error")
    ax.plot(result.times, d, "k-", lw=1.6, label="euclidean")
    marker_d = np.interp(result.stats.marker_times, result.times, d)
    ax.plot(result.stats.marker_times, marker_d, "ko", ms=5, mfc="none",
            label="markers")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("position error [m]")
    ax.legend(loc="best", ncol=2)
    ax.set_title(f"error, {_MODE_LABELS.get(result.mode, result.mode)}")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_map(path, global_map: LabeledCloud, result: RunResult | None = None) -> None:
    """Top view of the merged map, terrain and structure separated."""
    pts = global_map.cloud.points
    terrain = global_map.labels == LABEL_TERRAIN
    fig, ax = plt.subplots(figsize=(7.5, 6.5))
    ax.scatter(pts[terrain, 0], pts[terrain, 1], s=1.2, c=pts[terrain, 2],
               cmap="terrain", label="terrain")
    ax.scatter(pts[~terrain, 0], pts[~terrain, 1], s=2.5, c="k",
               label="non-terrain")
    if result is not None:
        ax.plot(result.estimate[:, 0], result.estimate[:, 1], "C3-", lw=1.4,
                label="estimate")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(loc="best")
    ax.set_title("merged map, colored by height")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_comparison(path, results: dict) -> None:
    """Mean marker error and compute split for each mode side by side.

    Values may be single runs or lists of paired-seed runs; lists are
    averaged over seeds.
    """
    runs = {m: v if isinstance(v, (list, tuple)) else [v]
            for m, v in results.items()}
    modes = [m for m in ALL_MODES if m in runs]
    labels = [_MODE_LABELS.get(m, m) for m in modes]
    err = [float(np.mean([r.stats.mean_d for r in runs[m]])) for m in modes]
    loc = [float(np.mean([r.timing.localization_s for r in runs[m]])) for m in modes]
    match = [float(np.mean([r.timing.matching_s for r in runs[m]])) for m in modes]
    xs = np.arange(len(modes))
    fig, (ax_e, ax_t) = plt.subplots(1, 2, figsize=(10, 4.2))
    ax_e.bar(xs, err, color="C0")
    ax_e.set_xticks(xs, labels, rotation=12)
    ax_e.set_ylabel("mean marker error [m]")
    ax_e.set_title("accuracy")
    ax_t.bar(xs, loc, color="C1", label="localization")
    ax_t.bar(xs, match, bottom=loc, color="C2", label="matching")
    ax_t.set_xticks(xs, labels, rotation=12)
    ax_t.set_ylabel("compute time [s]")
    ax_t.legend(loc="best")
    ax_t.set_title("cost")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_convergence(path, records: list[ConvergenceRecord],
                     threshold: float) -> None:
    """Error decay per initial offset with the recovery instants marked."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for r in records:
        tag = ", ".join(f"{v:g}" for v in r.offset)
        line, = ax.plot(r.times, r.errors, lw=1.2, label=f"offset ({tag}) m")
        if r.converged:
            ax.axvline(r.period, color=line.get_color(), ls=":", lw=0.9)
    ax.axhline(threshold, color="k", ls="--", lw=1.0, label="threshold")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("position error [m]")
    ax.set_yscale("log")
    ax.legend(loc="best")
    ax.set_title("recovery from an initial offset")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
