"""PNG figures written next to report files (matplotlib, headless backend)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .config import ExperimentReport


def _fits_axes(ax, report: ExperimentReport):
    for name, fit in report.fits.items():
        x, y = np.asarray(fit["x"]), np.asarray(fit["y"])
        pts = ax.loglog(x, y, "o", label=f"{name}: slope {fit['slope']:+.3f}")
        xs = np.geomspace(x.min(), x.max(), 50)
        ax.loglog(xs, np.exp(fit["intercept"]) * xs ** fit["slope"], "-", color=pts[0].get_color(), lw=1)
    ax.set_xlabel("gap" if report.experiment == "sharpness" else "delta")
    ax.legend(fontsize=7)


def _records_axes(ax, report: ExperimentReport):
    v = np.array([r.value for r in report.records])
    e = np.array([r.std_error for r in report.records])
    ax.errorbar(np.arange(v.size), v, yerr=e, fmt="o", ms=3)
    labels = [",".join(f"{k}={p}" for k, p in r.params.items() if k != "rule") for r in report.records]
    ax.set_xticks(np.arange(v.size))
    ax.set_xticklabels(labels, rotation=90, fontsize=5)
    ax.set_ylabel("value")


def render_figure(report: ExperimentReport, path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    if report.fits:
        _fits_axes(ax, report)
    else:
        _records_axes(ax, report)
    ax.set_title(report.summary(), fontsize=9)
    fig.tight_layout()
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(p, dpi=120)
    plt.close(fig)
    return p


def figure_path(report_path) -> Path:
    return Path(report_path).with_suffix(".png")
