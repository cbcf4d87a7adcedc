"""Figure rendering for coverage reports.

Two figures accompany each report: the empirical-coverage histogram of the
robust and epsilon=0 arms against the target level, and the calibration
nonconformity-score histogram of the first trial with both calibrated
constants marked.  Files are written next to the delimited output.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["render_report_figures", "render_score_histogram"]


def render_report_figures(report, outdir) -> dict[str, Path]:
    outdir = Path(outdir)
    paths = {}

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    lo = min(report.robust_ratios + report.vanilla_ratios) - 0.02
    bins = [lo + i * 0.005 for i in range(int((1.005 - lo) / 0.005) + 2)]
    ax.hist(report.vanilla_ratios, bins=bins, alpha=0.7,
            label=f"$\\epsilon = 0$ (mean {report.mean_vanilla:.3f})")
    ax.hist(report.robust_ratios, bins=bins, alpha=0.7,
            label=f"$\\epsilon = {report.epsilon:.3f}$ (mean {report.mean_robust:.3f})")
    ax.axvline(report.target, color="k", linestyle="--",
               label=f"target {report.target:.2f}")
    ax.set_xlabel("empirical coverage")
    ax.set_ylabel("trials")
    ax.legend(fontsize=9)
    fig.tight_layout()
    coverage_path = outdir / "coverage_hist.png"
    fig.savefig(coverage_path, dpi=150)
    plt.close(fig)
    paths["coverage_figure"] = coverage_path

    if report.histograms:
        first = report.histograms[0]
        region_robust = report.robust_regions[0]
        region_vanilla = report.vanilla_regions[0]
        score_path = outdir / "score_hist.png"
        render_score_histogram(
            first["edges"], first["counts"], score_path,
            markers={
                "$C$": region_vanilla,
                "$\\tilde{C}$": region_robust,
            },
        )
        paths["score_figure"] = score_path
    return paths


def render_score_histogram(edges, counts, path, markers: dict[str, float] | None = None):
    """Bar plot of pre-binned scores with optional vertical region markers."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    widths = [r - l for l, r in zip(edges[:-1], edges[1:])]
    ax.bar(edges[:-1], counts, width=widths, align="edge", alpha=0.8)
    for color, (label, value) in zip("grmc", (markers or {}).items()):
        if value is not None and math.isfinite(value):
            ax.axvline(value, color=color, linestyle="-", label=label)
    ax.set_xlabel("nonconformity score")
    ax.set_ylabel("count")
    if markers:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
