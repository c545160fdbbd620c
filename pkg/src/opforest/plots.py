"""Figure rendering for the report-producing commands.

Every figure goes straight to a file (Agg backend); the CSV/JSON artifacts
stay the canonical outputs and figures are just their visual companions.
"""

from __future__ import annotations

import logging

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .clustering import ClusterModel  # noqa: E402
from .datasets import Dataset  # noqa: E402
from .evaluation import ExperimentReport, GridSearchReport  # noqa: E402

log = logging.getLogger(__name__)

_DPI = 150


def save_grid_heatmap(report: GridSearchReport, path) -> None:
    """Accuracy heatmap over the (k_max, sigma) grid."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    data = report.accuracy.T  # sigma rows, k columns
    masked = np.ma.masked_invalid(data)
    im = ax.imshow(masked, origin="lower", aspect="auto", cmap="inferno")
    ax.set_xticks(range(len(report.k_grid)))
    ax.set_xticklabels([str(k) for k in report.k_grid], fontsize=7,
                       rotation=45)
    ax.set_yticks(range(len(report.sigma_grid)))
    ax.set_yticklabels([f"{s:g}" for s in report.sigma_grid], fontsize=8)
    ax.set_xlabel("k_max")
    ax.set_ylabel("sigma")
    ax.set_title("evaluation accuracy (best: "
                 f"k_max={report.best_k_max}, sigma={report.best_sigma:g})")
    fig.colorbar(im, ax=ax, shrink=0.9)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_cluster_scatter(dataset: Dataset, model: ClusterModel, path) -> bool:
    """Scatter of 2-feature data colored by cluster; roots highlighted.

    Returns False (and renders nothing) for other dimensionalities.
    """
    if dataset.n_features != 2:
        log.info("cluster scatter skipped: %d features", dataset.n_features)
        return False
    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    xy = dataset.features
    ax.scatter(xy[:, 0], xy[:, 1], c=model.cluster_label, cmap="tab20",
               s=18, linewidths=0)
    roots = sorted(model.root)
    ax.scatter(xy[roots, 0], xy[roots, 1], marker="*", c="black", s=90,
               label="density maxima")
    ax.set_title(f"{model.n_clusters} clusters at k*={model.k_star}")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return True


def save_benchmark_boxplot(report: ExperimentReport, path) -> None:
    """Per-run test accuracies of each classifier as a box plot."""
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    series = [report.accuracies(name) for name in report.classifiers]
    ax.boxplot(series, tick_labels=list(report.classifiers))
    for i, values in enumerate(series, start=1):
        jitter = np.linspace(-0.12, 0.12, values.size)
        ax.plot(i + jitter, values, ".", color="tab:gray", ms=4, alpha=0.7)
    ax.set_ylabel("test accuracy")
    ax.set_title(f"{len(report.runs)} runs, split "
                 + "/".join(f"{f:g}" for f in report.split))
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
