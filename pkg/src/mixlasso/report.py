"""Matplotlib renderings of the diagnostic reports.

Each function writes one PNG next to the delimited output it visualizes.
Rendering is deterministic: fixed figure geometry, constant metadata.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402
from scipy.cluster.hierarchy import dendrogram  # noqa: E402

from .diagnostics import MergeTree  # noqa: E402

_META = {"Software": "mixlasso"}


def _save(fig, path: Path) -> None:
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)


def ari_histogram(values: np.ndarray, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.hist(values, bins=np.linspace(-0.5, 1.0, 31), color="#336699",
            edgecolor="white")
    ax.set_xlabel("adjusted Rand index")
    ax.set_ylabel("samples")
    ax.set_title("Clustering agreement across posterior samples")
    _save(fig, path)


def accuracy_histograms(sens: np.ndarray, spec: np.ndarray, path: Path) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    bins = np.linspace(0.0, 1.0, 21)
    for ax, vals, label in zip(axes, (sens, spec),
                               ("sensitivity", "specificity")):
        vals = vals[np.isfinite(vals)]
        ax.hist(vals, bins=bins, color="#663366", edgecolor="white")
        ax.set_xlabel(label)
    axes[0].set_ylabel("samples")
    fig.suptitle("Variable-selection accuracy across posterior samples")
    _save(fig, path)


def cocluster_heatmap(frequency: np.ndarray, path: Path,
                      labels: list[str] | None = None) -> None:
    n = frequency.shape[0]
    fig, ax = plt.subplots(figsize=(7, 6))
    image = ax.imshow(frequency, vmin=0.0, vmax=1.0, cmap="viridis")
    fig.colorbar(image, ax=ax, label="same-cluster frequency")
    if labels is not None and n <= 60:
        ax.set_xticks(range(n), labels, rotation=90, fontsize=6)
        ax.set_yticks(range(n), labels, fontsize=6)
    ax.set_title("Posterior co-clustering")
    _save(fig, path)


def dendrogram_figure(tree: MergeTree, path: Path,
                      labels: list[str] | None = None) -> None:
    fig, ax = plt.subplots(figsize=(9, 5))
    dendrogram(tree.linkage_matrix(), ax=ax, labels=labels,
               leaf_font_size=7, color_threshold=0.0,
               above_threshold_color="#333333")
    ax.set_ylabel("dissimilarity")
    ax.set_title("Hierarchical clustering of co-clustering dissimilarity")
    _save(fig, path)


def selection_frequency_figure(table: np.ndarray, path: Path,
                               names: list[str] | None = None) -> None:
    K, p = table.shape
    names = names or [f"x{j}" for j in range(1, p + 1)]
    fig, axes = plt.subplots(K, 1, figsize=(max(7, p * 0.45), 2.6 * K),
                             squeeze=False, sharex=True)
    order = np.arange(1, p)  # intercept column excluded from the picture
    for k in range(K):
        ax = axes[k, 0]
        ax.bar(np.arange(p - 1), table[k, order], color="#228855")
        ax.set_ylim(0, 1)
        ax.set_ylabel(f"cluster {k + 1}")
    axes[-1, 0].set_xticks(np.arange(p - 1), [names[j] for j in order],
                           rotation=90, fontsize=7)
    fig.suptitle("Posterior selection frequency per cluster")
    _save(fig, path)


def degeneracy_figure(iterations: np.ndarray, ess_min: np.ndarray,
                      unique_paths: np.ndarray, path: Path) -> None:
    fig, axes = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    axes[0].plot(iterations, ess_min, lw=0.8, color="#336699")
    axes[0].set_ylabel("min ESS / N")
    axes[0].set_ylim(0, 1.05)
    axes[1].plot(iterations, unique_paths, lw=0.8, color="#993333")
    axes[1].set_ylabel("distinct paths / N")
    axes[1].set_ylim(0, 1.05)
    axes[1].set_xlabel("iteration")
    fig.suptitle("Particle degeneracy over the chain")
    _save(fig, path)
