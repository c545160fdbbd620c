"""Supervised optimum-path forest training and classification.

Training runs the prototype competition over the complete graph under the
max-arc path cost: starting from zero-cost prototypes, nodes are conquered
in ascending cost order, each conqueror offering
``max(cost(conqueror), d(conqueror, node))``. Classification scans the
training nodes in ascending stored-cost order and stops as soon as no
remaining node can beat the best offer so far.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datasets import Dataset
from .errors import ConfigError, DataError
from .graph import (CostQueue, Mst, PrototypeSet, RowEngine, compute_mst,
                    find_prototypes, row_distances)

MODEL_MAGIC = b"OPF1"
_MODEL_VERSION = 1
_CLASSIFY_CHUNK = 64


@dataclass(frozen=True)
class SupervisedModel:
    """Trained forest: per-node cost, label, and predecessor maps plus the
    cost-ordered node index used by classification."""

    cost: np.ndarray          # (n,) float64
    label: np.ndarray         # (n,) int64
    predecessor: np.ndarray   # (n,) int64, -1 for prototypes
    prototypes: PrototypeSet
    order: np.ndarray         # node indices, ascending cost (stable)
    training: Dataset
    metric: str

    def __len__(self) -> int:
        return self.cost.shape[0]


def train(dataset: Dataset, metric: str = "euclidean", *,
          prototypes: PrototypeSet | None = None,
          fast: bool = False) -> SupervisedModel:
    """Train on a labeled dataset.

    ``prototypes`` overrides the MST-derived seed set (test harness hook).
    ``fast`` uses the spanning-tree shortcut: prune cross-class MST edges
    and propagate costs from the prototypes along tree edges only; it
    produces the same cost and label maps when all arc weights differ.
    """
    n = len(dataset)
    if n < 2:
        raise DataError(f"training needs at least 2 samples, got {n}")
    mst: Mst | None = None
    if prototypes is None:
        mst = compute_mst(dataset, metric)
        prototypes = find_prototypes(dataset, mst)
    elif fast:
        raise ConfigError("fast training derives prototypes from the MST; "
                          "an explicit prototype set cannot be combined with it")
    if fast:
        cost, label, pred = _propagate_along_tree(dataset, metric, mst,
                                                  prototypes)
    else:
        cost, label, pred = _compete(dataset, metric, prototypes)
    order = np.argsort(cost, kind="stable").astype(np.int64)
    return SupervisedModel(cost, label, pred, prototypes, order, dataset,
                           metric)


def _compete(dataset: Dataset, metric: str, prototypes: PrototypeSet,
             membership: np.ndarray | None = None):
    """Priority-queue competition; ``membership`` scales offered costs.

    A node removed from the queue is final and never re-offered. Under
    the plain max-arc cost this is implied anyway (offers never undercut
    the popping cost); under membership scaling below one it is what
    keeps the predecessor map a forest rooted at the prototypes.
    """
    n = len(dataset)
    rows = RowEngine(metric, dataset.features)
    cost = np.full(n, np.inf)
    label = np.zeros(n, dtype=np.int64)
    pred = np.full(n, -1, dtype=np.int64)
    final = np.zeros(n, dtype=bool)
    protos = prototypes.as_array()
    cost[protos] = 0.0
    label[protos] = dataset.labels[protos]
    queue = CostQueue("min")
    for p in protos:
        queue.push(int(p), 0.0)
    while len(queue):
        q, cq = queue.pop()
        final[q] = True
        offers = np.maximum(cq, rows(q))
        if membership is None:
            # offers >= cq, so "offers < cost" already implies the
            # cost > cq gate and excludes finalized nodes
            improved = np.flatnonzero(offers < cost)
        else:
            offers = membership * offers
            improved = np.flatnonzero((cost > cq) & (offers < cost) & ~final)
        for u in improved.tolist():
            cost[u] = offers[u]
            label[u] = label[q]
            pred[u] = q
            if u in queue:
                queue.update(u, cost[u])
            else:
                queue.push(u, cost[u])
    return cost, label, pred


def _propagate_along_tree(dataset: Dataset, metric: str, mst: Mst,
                          prototypes: PrototypeSet):
    """Max-arc propagation from prototypes restricted to same-class MST
    edges (the bridges between classes are exactly the pruned ones)."""
    n = len(dataset)
    labels = dataset.labels
    adjacency: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for u in range(n):
        p = int(mst.parent[u])
        if p >= 0 and labels[u] == labels[p]:
            w = float(mst.edge_weight[u])
            adjacency[u].append((p, w))
            adjacency[p].append((u, w))
    cost = np.full(n, np.inf)
    label = np.zeros(n, dtype=np.int64)
    pred = np.full(n, -1, dtype=np.int64)
    protos = prototypes.as_array()
    cost[protos] = 0.0
    label[protos] = labels[protos]
    queue = CostQueue("min")
    for p in protos:
        queue.push(int(p), 0.0)
    while len(queue):
        q, cq = queue.pop()
        for u, w in adjacency[q]:
            offered = max(cq, w)
            if cost[u] > cq and offered < cost[u]:
                cost[u] = offered
                label[u] = label[q]
                pred[u] = q
                if u in queue:
                    queue.update(u, offered)
                else:
                    queue.push(u, offered)
    return cost, label, pred


def classify_one(model: SupervisedModel, x) -> tuple[int, float, int]:
    """Classify one feature vector.

    Returns ``(label, cost, conqueror)`` where cost is
    ``min_q max(cost(q), d(q, x))``. The scan walks training nodes in
    ascending stored cost and exits once the next stored cost already
    meets the best offer, so ties resolve to the lowest stored cost and
    then the lowest node index.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.training.n_features:
        raise DataError(f"expected {model.training.n_features} features, "
                        f"got shape {x.shape}")
    feats = model.training.features
    order = model.order
    ordered_cost = model.cost[order]
    best = np.inf
    best_node = -1
    n = order.shape[0]
    start = 0
    while start < n:
        if ordered_cost[start] >= best:
            break
        stop = min(start + _CLASSIFY_CHUNK, n)
        chunk = order[start:stop]
        offers = np.maximum(ordered_cost[start:stop],
                            row_distances(model.metric, feats[chunk], x))
        i = int(np.argmin(offers))
        if offers[i] < best:
            best = float(offers[i])
            best_node = int(chunk[i])
        start = stop
    return int(model.label[best_node]), best, best_node


def classify_batch(model: SupervisedModel,
                   dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample ``(labels, costs)`` arrays, in dataset order."""
    if dataset.n_features != model.training.n_features:
        raise DataError(f"model expects {model.training.n_features} features, "
                        f"dataset has {dataset.n_features}")
    labels = np.empty(len(dataset), dtype=np.int64)
    costs = np.empty(len(dataset), dtype=np.float64)
    for i in range(len(dataset)):
        labels[i], costs[i], _ = classify_one(model, dataset.features[i])
    return labels, costs


# ---------------------------------------------------------------------------
# Persistence: versioned little-endian container, enough to reload a model
# for classification only.

_METRIC_CODES = {"euclidean": 0, "squared-euclidean": 1, "manhattan": 2}
_METRIC_NAMES = {v: k for k, v in _METRIC_CODES.items()}


def _pack_common(model: SupervisedModel) -> bytes:
    n = len(model)
    f = model.training.n_features
    head = struct.pack("<IBiii", _MODEL_VERSION,
                       _METRIC_CODES[model.metric], n, f,
                       model.training.n_classes)
    protos = model.prototypes.as_array()
    parts = [
        head,
        struct.pack("<i", protos.shape[0]),
        protos.astype("<i4").tobytes(),
        model.training.features.astype("<f8").tobytes(),
        model.cost.astype("<f8").tobytes(),
        model.label.astype("<i4").tobytes(),
        model.predecessor.astype("<i4").tobytes(),
        model.order.astype("<i4").tobytes(),
    ]
    return b"".join(parts)


class _Reader:
    def __init__(self, blob: bytes, offset: int):
        self.blob = blob
        self.offset = offset

    def unpack(self, fmt: str):
        s = struct.Struct(fmt)
        if self.offset + s.size > len(self.blob):
            raise DataError("model file truncated")
        out = s.unpack_from(self.blob, self.offset)
        self.offset += s.size
        return out

    def array(self, dtype: str, count: int) -> np.ndarray:
        nbytes = np.dtype(dtype).itemsize * count
        if self.offset + nbytes > len(self.blob):
            raise DataError("model file truncated")
        arr = np.frombuffer(self.blob, dtype=dtype, count=count,
                            offset=self.offset)
        self.offset += nbytes
        return arr


def _unpack_common(reader: _Reader):
    version, metric_code, n, f, n_classes = reader.unpack("<IBiii")
    if version != _MODEL_VERSION:
        raise DataError(f"unsupported model version {version}")
    if metric_code not in _METRIC_NAMES:
        raise DataError(f"unknown metric code {metric_code}")
    if n < 2 or f < 1 or n_classes < 1:
        raise DataError("corrupt model header")
    n_protos, = reader.unpack("<i")
    protos = reader.array("<i4", n_protos).astype(np.int64)
    feats = reader.array("<f8", n * f).astype(np.float64).reshape(n, f)
    cost = reader.array("<f8", n).astype(np.float64)
    label = reader.array("<i4", n).astype(np.int64)
    pred = reader.array("<i4", n).astype(np.int64)
    order = reader.array("<i4", n).astype(np.int64)
    training = Dataset(feats, label.copy(), n_classes=n_classes,
                       require_all_classes=False)
    return SupervisedModel(cost, label, pred,
                           PrototypeSet(frozenset(protos.tolist())), order,
                           training, _METRIC_NAMES[metric_code])


def save_model(model: SupervisedModel, path) -> None:
    Path(path).write_bytes(MODEL_MAGIC + _pack_common(model))


def load_model(path) -> SupervisedModel:
    blob = Path(path).read_bytes()
    if blob[:4] != MODEL_MAGIC:
        raise DataError(f"{path}: not an {MODEL_MAGIC.decode()} model file")
    reader = _Reader(blob, 4)
    model = _unpack_common(reader)
    if reader.offset != len(blob):
        raise DataError(f"{path}: trailing bytes after model payload")
    return model
