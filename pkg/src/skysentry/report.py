"""Figure rendering for run reports.

Every run that produces metrics.csv can also drop a small set of PNG
figures next to it: fused-vs-raw classification timelines per track, the
precision/recall curve, and the distance-binned detection rates. The
calibration fit gets its own figure. All rendering is headless.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .fuse import CLASS_NAMES
from .geometry import CalibCurve, apparent_diag
from .metrics import MetricsDetail, RunMetrics


def save_posterior_timelines(detail: MetricsDetail, path: Path, max_tracks: int = 4) -> bool:
    """Fused kite posterior vs raw per-frame kite reports, one panel per track."""
    tracks = sorted(
        detail.posterior_series, key=lambda tid: -len(detail.posterior_series[tid][0])
    )[:max_tracks]
    if not tracks:
        return False
    fig, axes = plt.subplots(len(tracks), 1, figsize=(8, 2.2 * len(tracks)), squeeze=False)
    for ax, tid in zip(axes[:, 0], tracks):
        ts, posts = detail.posterior_series[tid]
        ax.plot(ts, posts[:, 0], lw=1.8, label="fused kite posterior")
        if tid in detail.raw_series:
            rts, raw = detail.raw_series[tid]
            ax.plot(rts, raw, lw=0.7, alpha=0.6, drawstyle="steps-post", label="raw kite report")
        truth = detail.track_truth.get(tid)
        label = CLASS_NAMES[truth] if truth is not None else "?"
        ax.set_ylim(-0.05, 1.05)
        ax.set_ylabel(f"track {tid}\n(true {label})", fontsize=8)
        ax.legend(loc="lower right", fontsize=7)
    axes[-1, 0].set_xlabel("time (s)")
    fig.suptitle("Classification stability: fused vs per-frame")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return True


def save_pr_curve(detail: MetricsDetail, metrics: RunMetrics, path: Path) -> bool:
    if detail.pr_recall is None or len(detail.pr_recall) == 0:
        return False
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(detail.pr_recall, detail.pr_precision, lw=1.5)
    ap = metrics.average_precision
    ax.set_title(f"Detector PR curve (AP={ap:.3f})" if ap is not None else "Detector PR curve")
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0, 1.0)
    ax.set_ylim(0, 1.05)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return True


def save_bin_rates(metrics: RunMetrics, path: Path) -> bool:
    items = [(name, rate) for name, rate in metrics.bin_rates.items() if rate is not None]
    if not items:
        return False
    fig, ax = plt.subplots(figsize=(5, 4))
    names = [n for n, _ in items]
    rates = [r for _, r in items]
    ax.bar(names, rates, width=0.55, color=["#2c7fb8", "#a6bddb"][: len(items)])
    for i, r in enumerate(rates):
        ax.text(i, r + 0.02, f"{r:.2f}", ha="center", fontsize=9)
    ax.set_ylim(0, 1.1)
    ax.set_ylabel("track detection rate")
    ax.set_title("Detection rate by distance bin")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return True


def save_calib_figure(
    samples: list[tuple[float, float]], curve: CalibCurve, path: Path
) -> None:
    xs = np.array([s[0] for s in samples])
    ys = np.array([s[1] for s in samples])
    grid = np.linspace(xs.min(), xs.max(), 300)
    fit = [apparent_diag(curve, float(x)) for x in grid]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.scatter(xs, ys, s=8, alpha=0.5, label="samples")
    ax.plot(grid, fit, color="crimson", lw=1.5, label="fit a/(x+b)+c")
    ax.set_xlabel("distance (m)")
    ax.set_ylabel("apparent size (px)")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def write_posterior_csvs(detail: MetricsDetail, outdir: Path) -> list[Path]:
    """One CSV per confirmed track: t plus the four class posteriors."""
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for tid, (ts, posts) in sorted(detail.posterior_series.items()):
        path = outdir / f"track_{tid}_posterior.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t_s"] + [f"p_{name.lower()}" for name in CLASS_NAMES])
            for t, row in zip(ts, posts):
                writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])
        paths.append(path)
    return paths


def save_run_figures(detail: MetricsDetail, metrics: RunMetrics, outdir: Path) -> list[Path]:
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, fn in [
        ("posterior_timelines.png", lambda p: save_posterior_timelines(detail, p)),
        ("pr_curve.png", lambda p: save_pr_curve(detail, metrics, p)),
        ("detection_rate_bins.png", lambda p: save_bin_rates(metrics, p)),
    ]:
        path = outdir / name
        if fn(path):
            written.append(path)
    return written
