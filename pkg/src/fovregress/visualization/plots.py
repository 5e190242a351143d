"""
plots.py

Matplotlib plotting of training and evaluation outputs. Every plot draws on a
caller-supplied axis; `save_figure` renders a figure to disk for the CLI.

Functions:
    plot_curves(ax, curves, metric): Data-efficiency curves, one line per run.
    plot_curve_band(ax, aggregated, metric, label): Mean line with a min/max band.
    plot_covariance(ax, covariance): Descriptor covariance heat map.
    plot_pca_sweep(ax, sweep, metric): Metric against reduced dimension.
    plot_loss_log(ax, loss_log, window): Smoothed training loss.
    new_axes(figsize): Figure with one axis.
    save_figure(fig, path): Write a figure as PNG.
"""
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from fovregress.utils.exceptions import InputError  # noqa: E402

METRIC_LABELS = {
    "r_at_1": "R@1",
    "r_at_5": "R@5",
    "r_at_10": "R@10",
    "mrr5": "MRR@5",
    "kldiv": "KL divergence (nats)",
}


def plot_curves(ax, curves, metric="r_at_5"):
    """
    Plot a metric against training iteration.

    Parameters:
        ax (matplotlib.axes.Axes): The axis on which to plot.
        curves (Mapping[str, DataFrame]): Label -> curve table with an
            `iteration` column and the metric column.
        metric (str): Column to plot.

    Returns:
        None
    """
    for label, frame in curves.items():
        if metric not in frame.columns:
            raise InputError(f"Curve '{label}' has no column '{metric}'")
        ax.plot(frame["iteration"], frame[metric], marker="o", markersize=3, label=label)
    ax.set_xlabel("Training iteration")
    ax.set_ylabel(METRIC_LABELS.get(metric, metric))
    ax.set_title(f"{METRIC_LABELS.get(metric, metric)} per snapshot")
    ax.grid(True, alpha=0.3)
    ax.legend()


def plot_curve_band(ax, aggregated, metric="r_at_5", label=None):
    """Mean curve with a shaded min/max band from `aggregate_curves` output."""
    x = aggregated["iteration"]
    line, = ax.plot(x, aggregated[f"{metric}_mean"], label=label)
    ax.fill_between(x, aggregated[f"{metric}_min"], aggregated[f"{metric}_max"],
                    color=line.get_color(), alpha=0.2)
    ax.set_xlabel("Training iteration")
    ax.set_ylabel(METRIC_LABELS.get(metric, metric))
    if label:
        ax.legend()


def plot_covariance(ax, covariance, title="Descriptor covariance"):
    """
    Heat map of a covariance matrix on a symmetric color scale.

    Returns:
        matplotlib.image.AxesImage: For attaching a colorbar.
    """
    cov = np.asarray(covariance, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise InputError(f"Covariance must be a square matrix, got shape {cov.shape}")
    limit = float(np.max(np.abs(cov))) or 1.0
    image = ax.imshow(cov, cmap="RdBu_r", vmin=-limit, vmax=limit, interpolation="nearest")
    ax.set_title(title)
    ax.set_xlabel("Dimension")
    ax.set_ylabel("Dimension")
    return image


def plot_pca_sweep(ax, sweep, metric="r_at_5"):
    """Metric against reduced dimension, one line for PCA and one for PCA + whitening."""
    for whiten, group in sweep.groupby("whiten", sort=True):
        group = group.sort_values("dim")
        ax.plot(group["dim"], group[metric], marker="s", label="PCA + whitening" if whiten else "PCA")
    ax.set_xlabel("Descriptor dimension")
    ax.set_ylabel(METRIC_LABELS.get(metric, metric))
    ax.set_title("Dimensionality reduction")
    ax.legend()


def plot_loss_log(ax, loss_log, window=100):
    """Moving average of the per-iteration training loss."""
    loss = np.asarray(loss_log["loss"], dtype=float)
    it = np.asarray(loss_log["iteration"])
    window = max(1, min(int(window), len(loss)))
    smooth = np.convolve(loss, np.ones(window) / window, mode="valid")
    ax.plot(it[window - 1:], smooth, color="black")
    ax.set_xlabel("Training iteration")
    ax.set_ylabel(f"Loss ({window}-iteration mean)")
    ax.set_yscale("log")


def new_axes(figsize=(7, 4.5)):
    """Figure with a single axis."""
    return plt.subplots(figsize=figsize)


def save_figure(fig, path, dpi=120):
    """Render a figure to PNG and close it."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    logging.info(f"Saved figure to {path}")
