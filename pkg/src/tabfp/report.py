"""Figure rendering for the report paths.

Dendrograms, distance heatmaps, and the entropy-vs-budget chart are written
as PNG files next to the delimited outputs; the CSV/Newick/JSON files stay
the canonical machine-readable artifacts.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from scipy.cluster import hierarchy

from .cluster import Dendrogram, to_linkage
from .similarity import DistanceMatrix


def render_dendrogram(dendro: Dendrogram, path, title: str = "Ward D2") -> None:
    fig, ax = plt.subplots(figsize=(8, 0.4 * max(dendro.n_leaves, 6) + 1.5))
    hierarchy.dendrogram(to_linkage(dendro), labels=dendro.labels,
                         orientation="right", ax=ax,
                         color_threshold=0.0, above_threshold_color="tab:blue")
    ax.set_title(title)
    ax.set_xlabel("merge height (1 - mean canonical correlation scale)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_heatmap(dm: DistanceMatrix, path, title: str = "CCA distances") -> None:
    n = len(dm.labels)
    fig, ax = plt.subplots(figsize=(max(6, 0.5 * n + 2), max(5, 0.5 * n + 1.5)))
    im = ax.imshow(dm.d, cmap="viridis", vmin=0.0)
    ax.set_xticks(np.arange(n), labels=dm.labels, rotation=90, fontsize=8)
    ax.set_yticks(np.arange(n), labels=dm.labels, fontsize=8)
    ax.set_title(title)
    fig.colorbar(im, ax=ax, shrink=0.8, label="distance")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_entropy_table(epsilons: list[str], labels: list[str],
                         rows: list[list[float]], path) -> None:
    """One line per dataset across privacy budgets (left = least private)."""
    fig, ax = plt.subplots(figsize=(8, 5))
    x = np.arange(len(epsilons))
    data = np.asarray(rows, dtype=float)
    for j, label in enumerate(labels):
        ax.plot(x, data[:, j], marker="o", label=label)
    ax.set_xticks(x, labels=[str(e) for e in epsilons])
    ax.set_xlabel("privacy budget epsilon")
    ax.set_ylabel("spectral entropy (bits)")
    ax.set_title("Spectral entropy under data-level noise")
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
