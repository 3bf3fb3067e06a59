"""Figure rendering for report outputs (headless, PNG files).

Evaluation and completion commands drop these next to their CSV/JSON
outputs: a metric bar chart per method, surface heatmaps for a sample
reconstruction against its target, and the training-loss curve.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import ComparisonReport
from .surface import RATING_LABELS, TENOR_LABELS, YieldSurface

__all__ = [
    "save_surface_heatmap",
    "save_metrics_chart",
    "save_reconstruction_panel",
    "save_loss_curve",
]

_METRICS = (
    ("mae_bps", "MAE (bps)"),
    ("rmse_bps", "RMSE (bps)"),
    ("mae_pct", "MAE (%)"),
    ("rmse_pct", "RMSE (%)"),
)


def _draw_surface(ax, values: np.ndarray, title: str, vmin=None, vmax=None):
    image = ax.imshow(values, aspect="auto", cmap="viridis", vmin=vmin, vmax=vmax)
    ax.set_title(title, fontsize=10)
    ax.set_xticks(range(len(TENOR_LABELS)))
    ax.set_xticklabels(TENOR_LABELS, fontsize=6, rotation=45)
    ax.set_yticks(range(len(RATING_LABELS)))
    ax.set_yticklabels(RATING_LABELS, fontsize=6)
    return image


def save_surface_heatmap(surface: YieldSurface, title: str, path) -> Path:
    """One surface as a labeled heatmap; missing cells render blank."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    image = _draw_surface(ax, surface.values, title)
    fig.colorbar(image, ax=ax, label="yield (%)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_metrics_chart(report: ComparisonReport, path) -> Path:
    """Grouped bars of the four headline metrics, one group per metric."""
    path = Path(path)
    names = list(report.methods)
    fig, axes = plt.subplots(1, len(_METRICS), figsize=(3 * len(_METRICS), 3.2))
    for ax, (attr, label) in zip(np.atleast_1d(axes), _METRICS):
        heights = [getattr(report.methods[n], attr) for n in names]
        ax.bar(range(len(names)), heights, color="steelblue")
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels([n.upper() for n in names], fontsize=8)
        ax.set_title(label, fontsize=10)
        ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_reconstruction_panel(
    target: YieldSurface,
    predictions: dict[str, YieldSurface],
    path,
) -> Path:
    """Target surface side by side with each method's reconstruction."""
    path = Path(path)
    panels = [("target", target)] + list(predictions.items())
    vmin = min(np.nanmin(s.values) for _, s in panels)
    vmax = max(np.nanmax(s.values) for _, s in panels)
    fig, axes = plt.subplots(1, len(panels), figsize=(4.2 * len(panels), 3.6))
    image = None
    for ax, (name, surf) in zip(np.atleast_1d(axes), panels):
        image = _draw_surface(ax, surf.values, name.upper(), vmin=vmin, vmax=vmax)
    fig.colorbar(image, ax=list(np.atleast_1d(axes)), label="yield (%)", shrink=0.85)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_loss_curve(history: list[float], val_history: list[float], path) -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.semilogy(history, label="train")
    if val_history:
        ax.semilogy(val_history, label="validation")
    ax.set_xlabel("epoch")
    ax.set_ylabel("MSE (scaled units)")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
