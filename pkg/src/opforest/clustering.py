"""Unsupervised optimum-path forest clustering.

Nodes of a symmetrized k-NN graph carry a Gaussian-kernel density
estimated from their adjacency distances. Density maxima root the
competition: each node ends up on the path whose minimum density along it
is maximum, and the roots' labels partition the data into clusters. The
neighborhood size is selected by minimizing a normalized graph cut.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .datasets import Dataset
from .errors import ConfigError, DegenerateDataError
from .graph import CostQueue, pairwise_distances

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class KnnGraph:
    """Symmetrized k-nearest-neighbor graph in CSR form."""

    k: int
    indptr: np.ndarray     # (n+1,) int64
    neighbors: np.ndarray  # (m,) int64, ascending within each row
    weights: np.ndarray    # (m,) float64 arc distances
    d_f: float             # maximum arc weight in the graph

    def __len__(self) -> int:
        return self.indptr.shape[0] - 1

    def neighbors_of(self, u: int) -> np.ndarray:
        return self.neighbors[self.indptr[u]:self.indptr[u + 1]]

    def weights_of(self, u: int) -> np.ndarray:
        return self.weights[self.indptr[u]:self.indptr[u + 1]]

    def arcs(self) -> Iterator[tuple[int, int, float]]:
        for u in range(len(self)):
            lo, hi = self.indptr[u], self.indptr[u + 1]
            for j in range(lo, hi):
                yield u, int(self.neighbors[j]), float(self.weights[j])


@dataclass(frozen=True)
class DensityMap:
    rho: np.ndarray
    psi: float


@dataclass(frozen=True)
class ClusterModel:
    """Clustering result: labels, maximized min-density path values, and
    the density maxima that root each cluster."""

    k_star: int
    densities: DensityMap
    cluster_label: np.ndarray  # (n,) int64, 1..n_clusters
    path_value: np.ndarray     # (n,) float64
    root: frozenset[int]
    predecessor: np.ndarray    # (n,) int64, -1 for roots

    @property
    def n_clusters(self) -> int:
        return int(self.cluster_label.max())

    def __len__(self) -> int:
        return self.cluster_label.shape[0]


def _neighbor_table(dataset: Dataset, metric: str):
    """Distance matrix plus per-row neighbor ordering (ties by index)."""
    dist = pairwise_distances(metric, dataset.features)
    ranked = dist.copy()
    np.fill_diagonal(ranked, np.inf)
    order = np.argsort(ranked, axis=1, kind="stable")
    return dist, order


def _graph_from_table(dist: np.ndarray, order: np.ndarray, k: int) -> KnnGraph:
    n = dist.shape[0]
    out = np.zeros((n, n), dtype=bool)
    rows = np.repeat(np.arange(n), k)
    out[rows, order[:, :k].ravel()] = True
    sym = out | out.T
    indptr = np.zeros(n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(sym.sum(axis=1))
    neighbors = np.flatnonzero(sym.ravel()) % n
    weights = dist[sym]
    d_f = float(weights.max()) if weights.size else 0.0
    return KnnGraph(k, indptr, neighbors.astype(np.int64), weights, d_f)


def build_knn_graph(dataset: Dataset, k: int,
                    metric: str = "euclidean") -> KnnGraph:
    """Link every node to its k nearest others, then add reverse arcs.

    Distance ties are broken toward the smaller node index.
    """
    n = len(dataset)
    if not 1 <= k <= n - 1:
        raise ConfigError(f"k must satisfy 1 <= k <= {n - 1}, got {k}")
    dist, order = _neighbor_table(dataset, metric)
    return _graph_from_table(dist, order, k)


def compute_density(graph: KnnGraph, dataset: Dataset | None = None,
                    metric: str = "euclidean") -> DensityMap:
    """Gaussian-kernel density per node with bandwidth ``d_f / 3``.

    Each node averages the kernel over its own (post-symmetrization)
    adjacency list, so the estimate stays a proper local mean even where
    symmetrization changed degrees.
    """
    if graph.d_f <= 0.0:
        raise DegenerateDataError("all samples coincide (d_f = 0); "
                                  "density is undefined")
    psi = graph.d_f / 3.0
    n = len(graph)
    kernel = np.exp(-np.square(graph.weights) / (2.0 * psi * psi))
    sums = np.add.reduceat(kernel, graph.indptr[:-1])
    degrees = np.diff(graph.indptr)
    rho = sums / (np.sqrt(2.0 * np.pi) * psi * degrees)
    return DensityMap(rho, psi)


def default_delta(rho: np.ndarray) -> float:
    """Scale-relative plateau offset for the path-value initialization.

    The magnitude term keeps ``rho - delta != rho`` even on exact plateaus,
    where a spread-only offset would vanish below float resolution.
    """
    return max(1e-12, float(rho.max() - rho.min()) * 1e-6,
               float(rho.max()) * 1e-9)


def _compete_max(graph: KnnGraph, rho: np.ndarray, delta: float):
    n = len(graph)
    value = rho - delta
    label = np.zeros(n, dtype=np.int64)
    pred = np.full(n, -1, dtype=np.int64)
    popped_root = np.zeros(n, dtype=bool)
    queue = CostQueue("max")
    for u in range(n):
        queue.push(u, float(value[u]))
    next_label = 1
    while len(queue):
        q, vq = queue.pop()
        if pred[q] < 0:
            label[q] = next_label
            next_label += 1
            value[q] = rho[q]
            vq = value[q]
            popped_root[q] = True
        nbrs = graph.neighbors_of(q)
        offers = np.minimum(vq, rho[nbrs])
        for j in np.flatnonzero((value[nbrs] < vq) & (offers > value[nbrs])):
            u = int(nbrs[j])
            value[u] = offers[j]
            label[u] = label[q]
            pred[u] = q
            queue.update(u, float(value[u]))
    roots = frozenset(np.flatnonzero(popped_root).tolist())
    return value, label, pred, roots


def cluster(dataset: Dataset, k: int, metric: str = "euclidean",
            delta: float | None = None) -> ClusterModel:
    """Cluster with a fixed neighborhood size."""
    graph = build_knn_graph(dataset, k, metric)
    return cluster_on_graph(graph, k, delta=delta)


def cluster_on_graph(graph: KnnGraph, k_star: int,
                     delta: float | None = None) -> ClusterModel:
    density = compute_density(graph)
    if delta is None:
        delta = default_delta(density.rho)
    value, label, pred, roots = _compete_max(graph, density.rho, delta)
    return ClusterModel(k_star, density, label, value, roots, pred)


def normalized_cut(model: ClusterModel, graph: KnnGraph) -> float:
    """Sum over clusters of crossing similarity mass over total incident
    mass, with arc similarity ``1 / (1 + distance)``. Zero means no arc
    crosses clusters."""
    if len(model) != len(graph):
        raise ConfigError("model and graph node counts differ")
    labels = model.cluster_label
    n_clusters = model.n_clusters
    sims = 1.0 / (1.0 + graph.weights)
    tails = np.repeat(np.arange(len(graph)), np.diff(graph.indptr))
    heads = graph.neighbors
    internal = labels[tails] == labels[heads]
    w_in = np.bincount(labels[tails[internal]] - 1, weights=sims[internal],
                       minlength=n_clusters)
    w_cross = np.bincount(labels[tails[~internal]] - 1,
                          weights=sims[~internal], minlength=n_clusters)
    total = w_in + w_cross
    silent = total == 0.0
    if silent.any():
        log.info("clusters with no incident similarity mass: %s",
                 (np.flatnonzero(silent) + 1).tolist())
    safe = np.where(silent, 1.0, total)
    return float(np.where(silent, 0.0, w_cross / safe).sum())


def sweep_clusterings(dataset: Dataset, k_max: int,
                      metric: str = "euclidean"):
    """Yield ``(k, cut, model)`` for k = 1..k_max, sharing one distance
    matrix across all graph builds."""
    n = len(dataset)
    if not 1 <= k_max <= n - 1:
        raise ConfigError(f"k_max must satisfy 1 <= k_max <= {n - 1}, "
                          f"got {k_max}")
    dist, order = _neighbor_table(dataset, metric)
    for k in range(1, k_max + 1):
        graph = _graph_from_table(dist, order, k)
        model = cluster_on_graph(graph, k)
        yield k, normalized_cut(model, graph), model


def find_best_k(dataset: Dataset, k_max: int,
                metric: str = "euclidean") -> tuple[int, ClusterModel]:
    """Search k = 1..k_max for the minimum normalized cut (ties toward
    the smaller k)."""
    best = None
    for k, cut, model in sweep_clusterings(dataset, k_max, metric):
        if best is None or cut < best[0]:
            best = (cut, k, model)
    return best[1], best[2]


def assignments_csv(model: ClusterModel) -> str:
    """Cluster assignments as CSV text: id, cluster_label, rho, path_value."""
    lines = ["id,cluster_label,rho,path_value"]
    rho = model.densities.rho
    for i in range(len(model)):
        lines.append(f"{i},{int(model.cluster_label[i])},"
                     f"{repr(float(rho[i]))},{repr(float(model.path_value[i]))}")
    return "\n".join(lines) + "\n"
