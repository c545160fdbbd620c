"""Distances, minimum spanning tree, prototype selection, and the
FIFO-tie-breaking priority queue shared by every forest variant."""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .datasets import Dataset
from .errors import ConfigError, DataError

METRICS = ("euclidean", "squared-euclidean", "manhattan")


def _check_metric(metric: str) -> None:
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}; choose from {METRICS}")


def distance(metric: str, a, b) -> float:
    """Distance between two feature vectors under the named metric."""
    _check_metric(metric)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError(f"vector length mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    if metric == "euclidean":
        return float(np.sqrt(np.dot(diff, diff)))
    if metric == "squared-euclidean":
        return float(np.dot(diff, diff))
    return float(np.abs(diff).sum())


def row_distances(metric: str, feats: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Distances from one vector to every row of a feature matrix."""
    _check_metric(metric)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != feats.shape[1]:
        raise DataError(f"vector of length {x.shape} does not match "
                        f"{feats.shape[1]} features")
    diff = feats - x
    if metric == "euclidean":
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))
    if metric == "squared-euclidean":
        return np.einsum("ij,ij->i", diff, diff)
    return np.abs(diff).sum(axis=1)


class RowEngine:
    """Distances from one training row to all rows, with the squared-norm
    expansion cached so the per-call cost is a single matrix-vector
    product. Used by the O(n^2) training loops."""

    def __init__(self, metric: str, feats: np.ndarray):
        _check_metric(metric)
        self.metric = metric
        self.feats = feats
        if metric != "manhattan":
            self._sq = np.einsum("ij,ij->i", feats, feats)

    def __call__(self, q: int) -> np.ndarray:
        feats = self.feats
        if self.metric == "manhattan":
            return np.abs(feats - feats[q]).sum(axis=1)
        d2 = self._sq + self._sq[q] - 2.0 * (feats @ feats[q])
        np.maximum(d2, 0.0, out=d2)
        d2[q] = 0.0
        if self.metric == "squared-euclidean":
            return d2
        return np.sqrt(d2, out=d2)


def pairwise_distances(metric: str, feats: np.ndarray) -> np.ndarray:
    """Dense (n, n) distance matrix. Fine for the dataset sizes here."""
    _check_metric(metric)
    n = feats.shape[0]
    if metric == "manhattan":
        out = np.empty((n, n))
        step = max(1, (1 << 22) // max(1, n * feats.shape[1]))
        for lo in range(0, n, step):
            hi = min(lo + step, n)
            out[lo:hi] = np.abs(feats[lo:hi, None, :]
                                - feats[None, :, :]).sum(axis=2)
        return out
    sq = np.einsum("ij,ij->i", feats, feats)
    d2 = sq[:, None] + sq[None, :] - 2.0 * feats @ feats.T
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    if metric == "squared-euclidean":
        return d2
    return np.sqrt(d2)


@dataclass(frozen=True)
class Mst:
    """Spanning tree as parent links; ``parent[root] == -1``."""

    parent: np.ndarray       # (n,) int64
    edge_weight: np.ndarray  # (n,) float64, weight of the edge to parent
    root: int

    @property
    def total_weight(self) -> float:
        return float(self.edge_weight[self.parent >= 0].sum())

    def __len__(self) -> int:
        return self.parent.shape[0]


def compute_mst(dataset: Dataset, metric: str = "euclidean") -> Mst:
    """Prim's algorithm over the implicit complete graph, O(n^2) time.

    Weight ties are broken toward the smaller node index, which makes the
    tree deterministic even on degenerate data.
    """
    n = len(dataset)
    parent = np.full(n, -1, dtype=np.int64)
    edge_weight = np.zeros(n, dtype=np.float64)
    if n == 1:
        return Mst(parent, edge_weight, root=0)
    rows = RowEngine(metric, dataset.features)
    in_tree = np.zeros(n, dtype=bool)
    best_w = np.full(n, np.inf)
    best_p = np.full(n, -1, dtype=np.int64)
    in_tree[0] = True
    current = 0
    for _ in range(n - 1):
        dist = rows(current)
        improve = (~in_tree) & (dist < best_w)
        best_w[improve] = dist[improve]
        best_p[improve] = current
        candidates = np.where(in_tree, np.inf, best_w)
        nxt = int(np.argmin(candidates))
        in_tree[nxt] = True
        parent[nxt] = best_p[nxt]
        edge_weight[nxt] = best_w[nxt]
        current = nxt
    return Mst(parent, edge_weight, root=0)


@dataclass(frozen=True)
class PrototypeSet:
    """Training nodes seeded with zero cost."""

    members: frozenset[int]

    def as_array(self) -> np.ndarray:
        return np.asarray(sorted(self.members), dtype=np.int64)

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, node: int) -> bool:
        return node in self.members


def find_prototypes(dataset: Dataset, mst: Mst) -> PrototypeSet:
    """Endpoints of MST edges that join two classes.

    A single-class dataset degenerates to the MST root alone so training
    still has a seed.
    """
    if len(dataset) != len(mst):
        raise DataError(f"MST spans {len(mst)} nodes, dataset has "
                        f"{len(dataset)}")
    labels = dataset.labels
    members: set[int] = set()
    for u in range(len(mst)):
        p = int(mst.parent[u])
        if p >= 0 and labels[u] != labels[p]:
            members.add(u)
            members.add(p)
    if not members:
        members.add(int(mst.root))
    return PrototypeSet(frozenset(members))


class CostQueue:
    """Binary-heap priority queue with FIFO tie-breaking.

    Entries of equal priority leave in insertion order; ``update``
    re-keys a node and sends it behind existing equal-priority entries,
    mirroring a remove-then-reinsert. ``mode`` selects remove-min
    (path-cost minimisation) or remove-max (density maximisation).

    Internally a lazy heap: an update pushes a fresh entry and the
    superseded one is dropped when it surfaces, which keeps every
    operation a plain C-level heappush/heappop.
    """

    def __init__(self, mode: str = "min"):
        if mode not in ("min", "max"):
            raise ConfigError(f"queue mode must be 'min' or 'max', got {mode!r}")
        self._sign = 1.0 if mode == "min" else -1.0
        self._heap: list[tuple[float, int, int]] = []
        self._live: dict[int, int] = {}   # node -> counter of its live entry
        self._counter = 0

    def __len__(self) -> int:
        return len(self._live)

    def __contains__(self, node: int) -> bool:
        return node in self._live

    def push(self, node: int, priority: float) -> None:
        if node in self._live:
            raise ConfigError(f"node {node} already queued")
        self._live[node] = self._counter
        heapq.heappush(self._heap,
                       (self._sign * priority, self._counter, node))
        self._counter += 1

    def update(self, node: int, priority: float) -> None:
        if node not in self._live:
            raise KeyError(node)
        self._live[node] = self._counter
        heapq.heappush(self._heap,
                       (self._sign * priority, self._counter, node))
        self._counter += 1

    def pop(self) -> tuple[int, float]:
        heap = self._heap
        live = self._live
        while heap:
            key, counter, node = heapq.heappop(heap)
            if live.get(node) == counter:
                del live[node]
                return node, self._sign * key
        raise IndexError("pop from empty CostQueue")
