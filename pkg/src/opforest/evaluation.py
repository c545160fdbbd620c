"""Benchmark harness: metrics, Wilcoxon signed-rank testing, the
(k_max, sigma) grid search, and the cross-validated experiment protocol
(per run: split, tune on the evaluation part, retrain, score on test).
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .clustering import sweep_clusterings
from .datasets import Dataset, SplitSpec, stratified_split
from .errors import ConfigError, DataError
from .fuzzy import (MembershipMap, MembershipParams, membership_values,
                    train_fuzzy, train_fuzzy_with_membership)
from .graph import compute_mst, find_prototypes
from .supervised import classify_batch, train

log = logging.getLogger(__name__)

DEFAULT_K_GRID: tuple[int, ...] = (1,) + tuple(range(10, 151, 10))
DEFAULT_SIGMA_GRID: tuple[float, ...] = (0.2, 0.4, 0.6, 0.8, 1.0, 1.2)
CLASSIFIER_NAMES = ("opf", "fuzzy-opf")

METRIC_DEFINITIONS = {
    "accuracy": "proportion of test samples predicted correctly",
    "macro_f1": "unweighted mean of per-class F1 (absent classes count 0)",
    "balanced_accuracy": "1 - mean of per-class false-positive and "
                         "false-negative rates (LibOPF-style)",
}


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    macro_f1: float
    per_class_f1: np.ndarray
    confusion: np.ndarray          # rows = truth, columns = predicted
    balanced_accuracy: float

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "balanced_accuracy": self.balanced_accuracy,
            "per_class_f1": [float(v) for v in self.per_class_f1],
            "confusion": self.confusion.tolist(),
        }


def compute_metrics(truth, predicted, n_classes: int | None = None) -> Metrics:
    """Confusion-matrix metrics for 1-based labels."""
    t = np.asarray(truth, dtype=np.int64)
    p = np.asarray(predicted, dtype=np.int64)
    if t.ndim != 1 or t.shape != p.shape:
        raise DataError(f"label sequences differ in shape: {t.shape} "
                        f"vs {p.shape}")
    if t.size == 0:
        raise DataError("cannot score an empty prediction set")
    if t.min() < 1 or p.min() < 1:
        raise DataError("labels must be 1-based")
    k = int(max(t.max(), p.max())) if n_classes is None else int(n_classes)
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (t - 1, p - 1), 1)
    total = int(confusion.sum())
    accuracy = float(np.trace(confusion)) / total
    tp = np.diag(confusion).astype(np.float64)
    fp = confusion.sum(axis=0) - tp
    fn = confusion.sum(axis=1) - tp
    denom = 2.0 * tp + fp + fn
    per_class_f1 = np.where(denom > 0.0, 2.0 * tp / np.where(denom > 0, denom, 1.0), 0.0)
    macro_f1 = float(per_class_f1.mean())
    present = confusion.sum(axis=1) > 0
    n_i = confusion.sum(axis=1).astype(np.float64)
    e_fp = np.where((total - n_i) > 0, fp / np.maximum(total - n_i, 1), 0.0)
    e_fn = np.where(n_i > 0, fn / np.maximum(n_i, 1), 0.0)
    errors = (e_fp + e_fn)[present]
    balanced = 1.0 - float(errors.sum()) / (2.0 * int(present.sum()))
    return Metrics(accuracy, macro_f1, per_class_f1, confusion, balanced)


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank test.

@dataclass(frozen=True)
class WilcoxonResult:
    w_statistic: float
    p_value: float
    n_effective: int
    significant: bool
    indeterminate: bool = False

    def to_dict(self) -> dict:
        return {
            "w_statistic": None if math.isnan(self.w_statistic)
                           else self.w_statistic,
            "p_value": None if math.isnan(self.p_value) else self.p_value,
            "n_effective": self.n_effective,
            "significant": self.significant,
            "indeterminate": self.indeterminate,
        }


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.shape[0], dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < values.shape[0]:
        j = i
        while j + 1 < values.shape[0] and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * ((i + 1) + (j + 1))
        i = j + 1
    return ranks


def _exact_two_sided_p(ranks: np.ndarray, w: float) -> float:
    """P(min(W+, W-) <= w) over all sign assignments of the given ranks.

    Works on doubled ranks so average ranks stay integral; counts are
    exact in float64 for n <= 25 (2^25 < 2^53).
    """
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled.tolist():
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:counts.shape[0] - r]
        counts += shifted
    prefix = np.cumsum(counts)
    w2 = int(np.rint(2.0 * w))
    n_assignments = 2.0 ** ranks.shape[0]
    count_low = prefix[min(w2, total)]
    mirror = total - w2
    count_high = n_assignments - (prefix[mirror - 1] if mirror >= 1 else 0.0)
    if mirror > w2:
        overlap = 0.0
    else:
        overlap = prefix[w2] - (prefix[mirror - 1] if mirror >= 1 else 0.0)
    return min(1.0, (count_low + count_high - overlap) / n_assignments)


def _normal_two_sided_p(diffs: np.ndarray, ranks: np.ndarray,
                        w: float) -> float:
    n = ranks.shape[0]
    mu = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(np.abs(diffs), return_counts=True)
    var -= float((tie_counts.astype(np.float64) ** 3 - tie_counts).sum()) / 48.0
    if var <= 0.0:
        return 1.0
    z = (w - mu + 0.5) / math.sqrt(var)
    return min(1.0, math.erfc(-z / math.sqrt(2.0)))


def wilcoxon_signed_rank(a, b, alpha: float = 0.05,
                         exact_limit: int = 25) -> WilcoxonResult:
    """Two-sided paired test with W = min(W+, W-).

    Zero differences are dropped; ties in |difference| get average ranks.
    The p-value comes from the exact sign-assignment distribution up to
    ``exact_limit`` effective pairs, and from a normal approximation with
    tie and continuity corrections beyond. Fewer than 5 effective pairs
    flags the result indeterminate.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError(f"paired samples differ in shape: {a.shape} "
                        f"vs {b.shape}")
    diffs = a - b
    diffs = diffs[diffs != 0.0]
    n_eff = int(diffs.shape[0])
    if n_eff < 5:
        return WilcoxonResult(math.nan, math.nan, n_eff, False,
                              indeterminate=True)
    ranks = _average_ranks(np.abs(diffs))
    w_plus = float(ranks[diffs > 0].sum())
    w_minus = float(ranks[diffs < 0].sum())
    w = min(w_plus, w_minus)
    if n_eff <= exact_limit:
        p = _exact_two_sided_p(ranks, w)
    else:
        p = _normal_two_sided_p(diffs, ranks, w)
    return WilcoxonResult(w, p, n_eff, bool(p < alpha))


# ---------------------------------------------------------------------------
# Grid search over (k_max, sigma).

@dataclass(frozen=True)
class GridSearchReport:
    k_grid: tuple[int, ...]
    sigma_grid: tuple[float, ...]
    accuracy: np.ndarray            # (|k_grid|, |sigma_grid|), NaN = skipped
    best_k_max: int
    best_sigma: float
    best_accuracy: float
    k_star: dict[int, int] = field(default_factory=dict)  # k_max -> chosen k

    @property
    def n_cells(self) -> int:
        return self.accuracy.size

    def to_csv(self) -> str:
        lines = ["k_max,sigma,accuracy"]
        for i, k in enumerate(self.k_grid):
            for j, s in enumerate(self.sigma_grid):
                value = self.accuracy[i, j]
                if not np.isnan(value):
                    lines.append(f"{k},{repr(float(s))},{repr(float(value))}")
        return "\n".join(lines) + "\n"

    def best_to_dict(self) -> dict:
        return {
            "k_max": self.best_k_max,
            "sigma": self.best_sigma,
            "accuracy": self.best_accuracy,
            "k_star": self.k_star.get(self.best_k_max),
        }


def _grid_search_impl(train_set: Dataset, eval_set: Dataset,
                      k_grid: Sequence[int], sigma_grid: Sequence[float],
                      metric: str):
    if not k_grid or not sigma_grid:
        raise ConfigError("grids must be non-empty")
    if eval_set.n_features != train_set.n_features:
        raise ConfigError("train and eval feature sizes differ")
    k_grid = tuple(int(k) for k in k_grid)
    sigma_grid = tuple(float(s) for s in sigma_grid)
    limit = len(train_set) - 1
    usable = [k for k in k_grid if 1 <= k <= limit]
    if len(usable) < len(k_grid):
        skipped = [k for k in k_grid if k not in usable]
        log.warning("skipping k_max values beyond |train|-1 = %d: %s",
                    limit, skipped)
    if not usable:
        raise ConfigError(f"no usable k_max value for a training set of "
                          f"{len(train_set)} samples")
    k_hi = max(usable)
    cuts = np.empty(k_hi, dtype=np.float64)
    rhos: list[np.ndarray] = []
    for k, cut, model in sweep_clusterings(train_set, k_hi, metric):
        cuts[k - 1] = cut
        rhos.append(model.densities.rho)
    prototypes = find_prototypes(train_set,
                                 compute_mst(train_set, metric))
    accuracy = np.full((len(k_grid), len(sigma_grid)), np.nan)
    k_star_map: dict[int, int] = {}
    best = None  # (accuracy, i, j, model)
    for i, k_max in enumerate(k_grid):
        if k_max not in usable:
            continue
        k_star = int(np.argmin(cuts[:k_max])) + 1
        k_star_map[k_max] = k_star
        rho = rhos[k_star - 1]
        for j, sigma in enumerate(sigma_grid):
            params = MembershipParams(sigma, float(rho.min()),
                                      float(rho.max()))
            membership = MembershipMap(membership_values(rho, sigma), params,
                                       k_star)
            model = train_fuzzy_with_membership(train_set, membership, metric,
                                                prototypes=prototypes)
            predicted, _ = classify_batch(model.base, eval_set)
            acc = compute_metrics(eval_set.labels, predicted,
                                  train_set.n_classes).accuracy
            accuracy[i, j] = acc
            if best is None or acc > best[0]:
                best = (acc, i, j, model)
    report = GridSearchReport(k_grid, sigma_grid, accuracy,
                              k_grid[best[1]], sigma_grid[best[2]], best[0],
                              k_star_map)
    return report, best[3]


def grid_search(train_set: Dataset, eval_set: Dataset,
                k_grid: Sequence[int] = DEFAULT_K_GRID,
                sigma_grid: Sequence[float] = DEFAULT_SIGMA_GRID,
                metric: str = "euclidean") -> GridSearchReport:
    """Evaluation accuracy of the fuzzy forest for every (k_max, sigma)
    pair; densities are clustered once per k and shared across sigma."""
    report, _ = _grid_search_impl(train_set, eval_set, k_grid, sigma_grid,
                                  metric)
    return report


# ---------------------------------------------------------------------------
# Cross-validated experiment.

@dataclass(frozen=True)
class RunResult:
    run: int
    seed: int
    selected_k_max: int | None
    selected_sigma: float | None
    metrics: dict[str, Metrics]
    train_seconds: dict[str, float]
    classify_seconds: dict[str, float]


@dataclass(frozen=True)
class ExperimentReport:
    classifiers: tuple[str, ...]
    split: tuple[float, float, float]
    base_seed: int
    alpha: float
    runs: tuple[RunResult, ...]
    wilcoxon: dict[str, WilcoxonResult]

    def accuracies(self, classifier: str) -> np.ndarray:
        return np.asarray([r.metrics[classifier].accuracy for r in self.runs])

    def aggregate(self) -> dict:
        out = {}
        for name in self.classifiers:
            acc = self.accuracies(name)
            f1 = np.asarray([r.metrics[name].macro_f1 for r in self.runs])
            bal = np.asarray([r.metrics[name].balanced_accuracy
                              for r in self.runs])
            out[name] = {
                "mean_accuracy": float(acc.mean()),
                "std_accuracy": float(acc.std(ddof=1)) if acc.size > 1 else 0.0,
                "mean_macro_f1": float(f1.mean()),
                "mean_balanced_accuracy": float(bal.mean()),
            }
        return out

    def to_dict(self, include_timings: bool = True) -> dict:
        runs = []
        for r in self.runs:
            entry = {
                "run": r.run,
                "seed": r.seed,
                "selected_k_max": r.selected_k_max,
                "selected_sigma": r.selected_sigma,
                "classifiers": {name: m.to_dict()
                                for name, m in r.metrics.items()},
            }
            if include_timings:
                entry["train_seconds"] = dict(r.train_seconds)
                entry["classify_seconds"] = dict(r.classify_seconds)
            runs.append(entry)
        return {
            "protocol": {
                "classifiers": list(self.classifiers),
                "split": list(self.split),
                "base_seed": self.base_seed,
                "runs": len(self.runs),
                "alpha": self.alpha,
                "metric_definitions": METRIC_DEFINITIONS,
            },
            "runs": runs,
            "aggregate": self.aggregate(),
            "wilcoxon": {pair: res.to_dict()
                         for pair, res in self.wilcoxon.items()},
        }

    def to_json(self, include_timings: bool = True) -> str:
        return json.dumps(self.to_dict(include_timings), indent=2) + "\n"


def _single_run(args) -> RunResult:
    (dataset, run, base, classifiers, k_grid, sigma_grid, metric) = args
    seed = base.seed + run
    spec = SplitSpec(base.train_fraction, base.eval_fraction,
                     base.test_fraction, seed)
    train_set, eval_set, test_set = stratified_split(dataset, spec)
    metrics: dict[str, Metrics] = {}
    train_s: dict[str, float] = {}
    classify_s: dict[str, float] = {}
    selected_k = None
    selected_sigma = None
    if "opf" in classifiers:
        t0 = time.perf_counter()
        model = train(train_set, metric)
        train_s["opf"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        predicted, _ = classify_batch(model, test_set)
        classify_s["opf"] = time.perf_counter() - t0
        metrics["opf"] = compute_metrics(test_set.labels, predicted,
                                         dataset.n_classes)
    if "fuzzy-opf" in classifiers:
        report, _ = _grid_search_impl(train_set, eval_set, k_grid,
                                      sigma_grid, metric)
        selected_k = report.best_k_max
        selected_sigma = report.best_sigma
        t0 = time.perf_counter()
        fuzzy = train_fuzzy(train_set, selected_sigma, selected_k, metric)
        train_s["fuzzy-opf"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        predicted, _ = classify_batch(fuzzy.base, test_set)
        classify_s["fuzzy-opf"] = time.perf_counter() - t0
        metrics["fuzzy-opf"] = compute_metrics(test_set.labels, predicted,
                                               dataset.n_classes)
    return RunResult(run, seed, selected_k, selected_sigma, metrics,
                     train_s, classify_s)


def run_cv_experiment(dataset: Dataset, runs: int, base: SplitSpec,
                      classifiers: Sequence[str] = CLASSIFIER_NAMES,
                      k_grid: Sequence[int] = DEFAULT_K_GRID,
                      sigma_grid: Sequence[float] = DEFAULT_SIGMA_GRID,
                      metric: str = "euclidean", alpha: float = 0.05,
                      jobs: int = 1) -> ExperimentReport:
    """Paper-style protocol: for each run, split with seed base+run, tune
    the fuzzy forest on the evaluation part, retrain the winner on the
    training part, and score every classifier on the test part."""
    if runs < 1:
        raise ConfigError(f"need at least one run, got {runs}")
    classifiers = tuple(classifiers)
    unknown = set(classifiers) - set(CLASSIFIER_NAMES)
    if unknown:
        raise ConfigError(f"unknown classifiers: {sorted(unknown)}")
    tasks = [(dataset, r, base, classifiers, tuple(k_grid),
              tuple(sigma_grid), metric) for r in range(runs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_single_run, tasks))
    else:
        results = [_single_run(t) for t in tasks]
    results.sort(key=lambda r: r.run)
    wilcoxon: dict[str, WilcoxonResult] = {}
    if len(classifiers) > 1:
        for i, a in enumerate(classifiers):
            for b in classifiers[i + 1:]:
                accs_a = [r.metrics[a].accuracy for r in results]
                accs_b = [r.metrics[b].accuracy for r in results]
                wilcoxon[f"{a}_vs_{b}"] = wilcoxon_signed_rank(
                    accs_a, accs_b, alpha)
    return ExperimentReport(classifiers, base.fractions, base.seed, alpha,
                            tuple(results), wilcoxon)
