"""Figure rendering for reports; always writes files, never shows.

Each helper mirrors one of the CSV reports so a report directory holds
the delimited data and its picture side by side.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .mesh import PointCloud
from .pipeline import ReconstructionReport

__all__ = ["save_level_figures", "save_sweep_figure", "save_field_figure"]


def save_level_figures(report: ReconstructionReport, prefix) -> list[str]:
    """Error and timing versus detail level; returns the written paths."""
    paths = []
    if report.errors is not None:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.semilogy(report.levels, report.errors, "o-")
        ax.set_xlabel("detail level j")
        ax.set_ylabel("normalized L2 error")
        ax.grid(True, which="both", alpha=0.3)
        fig.tight_layout()
        path = f"{prefix}_error.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(path)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(report.levels, report.seconds, "s-")
    ax.set_xlabel("detail level j")
    ax.set_ylabel("solve time [s]")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = f"{prefix}_time.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    paths.append(path)
    return paths


def save_sweep_figure(orders: np.ndarray, ratios: np.ndarray, errors: np.ndarray, path) -> str:
    """Error versus wavelet order, one curve per compression ratio.

    ``errors`` is indexed [ratio, order]; NaN cells are skipped.
    """
    orders = np.asarray(orders)
    ratios = np.asarray(ratios)
    errors = np.asarray(errors, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for i, ratio in enumerate(ratios):
        keep = np.isfinite(errors[i])
        ax.semilogy(orders[keep], errors[i][keep], "o-", label=f"R = {ratio:g}")
    ax.set_xlabel("wavelet order w")
    ax.set_ylabel("normalized L2 error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def save_field_figure(cloud: PointCloud, fields: dict[str, np.ndarray], path) -> str:
    """Scatter panels of 2D fields over the cloud, shared color scale."""
    if cloud.dim != 2:
        raise ValueError(f"field scatter needs a 2D cloud, got {cloud.dim}D")
    names = list(fields)
    stacked = np.concatenate([np.asarray(fields[n], dtype=np.float64) for n in names])
    vmin, vmax = stacked.min(), stacked.max()
    fig, axes = plt.subplots(1, len(names), figsize=(4 * len(names), 3.6), squeeze=False)
    for ax, name in zip(axes[0], names):
        sc = ax.scatter(cloud.coords[:, 0], cloud.coords[:, 1], c=fields[name],
                        s=2, vmin=vmin, vmax=vmax, cmap="viridis")
        ax.set_title(name)
        ax.set_aspect("equal")
        fig.colorbar(sc, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)
