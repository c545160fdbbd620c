"""Acceptance suite: one test per shipped criterion.

Each test prints a single ``[criterion N] PASS`` line with the measured
evidence (run pytest with ``-s`` to see them inline). Criterion 7 needs
the Four-Class CSV supplied via OPF_FOURCLASS or tests/data/fourclass.csv
and is skipped otherwise; everything else is self-contained.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from opforest import (SplitSpec, classify_batch, classify_fuzzy,
                      classify_one, cluster, generate_synthetic, load_csv,
                      pairwise_distances, run_cv_experiment, save_csv,
                      save_opf_binary, load_opf_binary, stratified_split,
                      train, train_fuzzy, wilcoxon_signed_rank)
from opforest.cli import main as cli_main
from opforest.clustering import build_knn_graph

from conftest import (line_dataset, random_blobs, random_uniform,
                      single_class_line)
from oracles import (fuzzy_costs_path_dp, maxmin_path_values,
                     minimax_costs_value_iteration, wilcoxon_p_by_enumeration)


def report(num: int, text: str) -> None:
    print(f"\n[criterion {num}] PASS — {text}")


def make_mixed_dataset(rng: np.random.Generator, n: int):
    style = int(rng.integers(0, 3))
    n_classes = int(rng.integers(1, 4))
    if style == 0:
        return random_uniform(rng, n, n_classes, int(rng.integers(1, 5)))
    if style == 1:
        return random_blobs(rng, n, max(n_classes, 2))
    return random_blobs(rng, n, max(n_classes, 2), spread=2.5)


def test_criterion_1_sigma_one_reduction():
    """train_fuzzy(sigma=1) must coincide with standard training."""
    started = time.perf_counter()
    fixtures = [line_dataset(), single_class_line(),
                generate_synthetic("blobs", 60, seed=1),
                generate_synthetic("concentric-rings", 80, seed=2)]
    rng_master = np.random.default_rng(20_240_001)
    datasets = fixtures + [
        make_mixed_dataset(np.random.default_rng(20_240_100 + t),
                           int(rng_master.integers(10, 201)))
        for t in range(50)
    ]
    checked_points = 0
    for d in datasets:
        k_max = min(10, len(d) - 1)
        standard = train(d)
        fuzzy = train_fuzzy(d, 1.0, k_max)
        assert np.array_equal(fuzzy.base.label, standard.label)
        assert np.abs(fuzzy.base.cost - standard.cost).max() <= 1e-12
        rng = np.random.default_rng(len(d) * 7 + 1)
        lo = d.features.min(axis=0) - 1.0
        hi = d.features.max(axis=0) + 1.0
        for _ in range(100):
            x = rng.uniform(lo, hi)
            assert classify_fuzzy(fuzzy, x) == classify_one(standard, x)
            checked_points += 1
    elapsed = time.perf_counter() - started
    assert elapsed < 30.0, f"criterion 1 took {elapsed:.1f}s (budget 30s)"
    report(1, f"{len(datasets)} datasets (4 fixtures + 50 random, n <= 200), "
              f"label maps bitwise-equal, costs within 1e-12, classify "
              f"parity on {checked_points} points, {elapsed:.1f}s < 30s")


def test_criterion_2_minimax_cost_oracle():
    """Trained cost maps equal the exhaustive min-max path cost."""
    started = time.perf_counter()
    worst = 0.0
    for trial in range(200):
        rng = np.random.default_rng(20_242_000 + trial)
        n = int(rng.integers(3, 13))
        d = random_uniform(rng, n, int(rng.integers(1, 4)),
                           int(rng.integers(1, 5)))
        model = train(d)
        dist = pairwise_distances("euclidean", d.features)
        oracle = minimax_costs_value_iteration(
            dist, sorted(model.prototypes.members))
        worst = max(worst, float(np.abs(model.cost - oracle).max()))
    elapsed = time.perf_counter() - started
    assert worst <= 1e-9
    assert elapsed < 60.0, f"criterion 2 took {elapsed:.1f}s (budget 60s)"
    report(2, f"200 random datasets (|V| <= 12), max |cost - oracle| = "
              f"{worst:.2e} <= 1e-9, {elapsed:.1f}s < 60s")


def test_criterion_3_fuzzy_recurrence_oracle():
    """Fuzzy-trained cost maps against exhaustive enumeration of the
    membership-scaled recurrence over simple prototype paths.

    With sigma >= 1 every offer meets the offering node's cost, the
    competition is provably optimal, and equality is asserted exactly.
    With sigma < 1 the scaled path cost is non-smooth (the competition is
    order-dependent by construction, see the decisions ledger), so the
    sound guarantees are asserted instead: the trained map never beats
    the exhaustive simple-path minimum and every cost is the exact
    recurrence value of its own predecessor chain.
    """
    started = time.perf_counter()
    worst_eq = 0.0
    for trial in range(100):
        rng = np.random.default_rng(20_243_000 + trial)
        n = int(rng.integers(4, 11))
        d = make_mixed_dataset(rng, n)
        sigma = (1.0, 1.2)[trial % 2]
        k_max = int(rng.integers(1, min(4, n)))
        model = train_fuzzy(d, sigma, k_max)
        dist = pairwise_distances("euclidean", d.features)
        oracle = fuzzy_costs_path_dp(dist, model.membership.value,
                                     sorted(model.base.prototypes.members))
        worst_eq = max(worst_eq, float(np.abs(model.base.cost - oracle).max()))
    assert worst_eq <= 1e-9
    dominance_checked = 0
    for trial in range(50):
        rng = np.random.default_rng(20_243_500 + trial)
        n = int(rng.integers(4, 11))
        d = make_mixed_dataset(rng, n)
        sigma = (0.2, 0.4, 0.6, 0.8)[trial % 4]
        k_max = int(rng.integers(1, min(4, n)))
        model = train_fuzzy(d, sigma, k_max)
        dist = pairwise_distances("euclidean", d.features)
        F = model.membership.value
        oracle = fuzzy_costs_path_dp(dist, F,
                                     sorted(model.base.prototypes.members))
        assert np.all(model.base.cost >= oracle - 1e-9)
        for u in range(n):
            p = int(model.base.predecessor[u])
            if p >= 0:
                want = F[u] * max(model.base.cost[p], dist[p, u])
                assert model.base.cost[u] == pytest.approx(want, rel=1e-12)
        dominance_checked += 1
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0, f"criterion 3 took {elapsed:.1f}s (budget 60s)"
    report(3, f"100 random datasets (|V| <= 10) at sigma in {{1.0, 1.2}}: "
              f"max |cost - enumeration| = {worst_eq:.2e} <= 1e-9; "
              f"{dominance_checked} datasets at sigma < 1: dominance and "
              f"exact predecessor recurrence hold, {elapsed:.1f}s < 60s")


def test_criterion_4_clustering_path_value_oracle():
    """Every path value equals the brute-force max-min density over all
    root-originating graph paths."""
    started = time.perf_counter()
    worst = 0.0
    for trial in range(100):
        rng = np.random.default_rng(20_244_000 + trial)
        n = int(rng.integers(4, 11))
        d = random_uniform(rng, n, 1, int(rng.integers(1, 3)))
        k = min(int(rng.integers(1, 4)), n - 1)
        model = cluster(d, k)
        graph = build_knn_graph(d, k)
        neighbor_lists = [graph.neighbors_of(u).tolist() for u in range(n)]
        oracle = maxmin_path_values(neighbor_lists, model.densities.rho,
                                    sorted(model.root))
        worst = max(worst, float(np.abs(model.path_value - oracle).max()))
    elapsed = time.perf_counter() - started
    assert worst <= 1e-9
    report(4, f"100 random datasets (|V| <= 10, k <= 3), max |path_value - "
              f"oracle| = {worst:.2e} <= 1e-9, {elapsed:.1f}s")


def test_criterion_5_zero_training_error():
    """Self-classification is perfect when all arc weights differ."""
    checked = 0
    for trial in range(50):
        rng = np.random.default_rng(20_245_000 + trial)
        n = int(rng.integers(10, 61))
        d = random_uniform(rng, n, int(rng.integers(2, 5)),
                           int(rng.integers(2, 5)))
        dist = pairwise_distances("euclidean", d.features)
        iu = np.triu_indices(n, k=1)
        assert np.unique(dist[iu]).size == iu[0].size, \
            "fixture lost pairwise-distance distinctness"
        model = train(d)
        predicted, _ = classify_batch(model, d)
        accuracy = float((predicted == d.labels).mean())
        assert accuracy == 1.0
        checked += 1
    report(5, f"{checked} distinct-distance datasets, self-classification "
              f"accuracy exactly 1.0 on all of them")


def test_criterion_6_wilcoxon_exactness():
    """Exact-mode p-values equal exhaustive sign-assignment enumeration."""
    worst = 0.0
    trials = 0
    for trial in range(500):
        rng = np.random.default_rng(20_246_000 + trial)
        n = int(rng.integers(5, 11))
        if trial % 2:
            diffs = rng.integers(-5, 6, size=n).astype(float)  # forces ties
        else:
            diffs = np.round(rng.standard_normal(n), 3)
        if (diffs != 0).sum() < 5:
            diffs[:5] = np.arange(1, 6, dtype=float)
        result = wilcoxon_signed_rank(diffs, np.zeros(n))
        w, p = wilcoxon_p_by_enumeration(diffs)
        assert result.w_statistic == pytest.approx(w, abs=1e-12)
        worst = max(worst, abs(result.p_value - p))
        trials += 1
    assert worst <= 1e-12
    report(6, f"{trials} random paired samples (n_eff <= 10), max |p - "
              f"enumeration| = {worst:.2e} <= 1e-12")


def _fourclass_path():
    env = os.environ.get("OPF_FOURCLASS")
    if env:
        return Path(env)
    return Path(__file__).parent / "data" / "fourclass.csv"


def test_criterion_7_fourclass_reproduction():
    """20-run benchmark on the public Four-Class data (when supplied)."""
    path = _fourclass_path()
    if not path.exists():
        pytest.skip("Four-Class dataset not supplied (set OPF_FOURCLASS or "
                    "place tests/data/fourclass.csv); criterion is "
                    "optional-if-data-present")
    dataset = load_csv(path)
    report_obj = run_cv_experiment(dataset, 20, SplitSpec(seed=0))
    aggregate = report_obj.aggregate()
    opf_mean = aggregate["opf"]["mean_accuracy"]
    fuzzy_mean = aggregate["fuzzy-opf"]["mean_accuracy"]
    assert opf_mean >= 0.97
    assert fuzzy_mean >= 0.97
    assert fuzzy_mean >= opf_mean - 0.005
    report(7, f"Four-Class 20-run benchmark: OPF mean accuracy "
              f"{opf_mean:.5f}, Fuzzy-OPF mean accuracy {fuzzy_mean:.5f} "
              f"(both >= 0.97, fuzzy >= opf - 0.005)")


def _median_train_seconds(datasets_1000, datasets_2000):
    times_1000, times_2000 = [], []
    for a, b in zip(datasets_1000, datasets_2000):
        t0 = time.perf_counter()
        train(a)
        times_1000.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        train(b)
        times_2000.append(time.perf_counter() - t0)
    return float(np.median(times_1000)), float(np.median(times_2000))


def test_criterion_8_quadratic_training_scaling():
    """Doubling |V| should roughly quadruple training wall time."""
    try:  # timing hygiene: one BLAS thread keeps the O(n^2) term visible
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        import contextlib
        threadpool_limits = lambda limits: contextlib.nullcontext()  # noqa: E731
    datasets_1000 = [random_blobs(np.random.default_rng(20_248_000 + t),
                                  1000, 4, n_features=32) for t in range(5)]
    datasets_2000 = [random_blobs(np.random.default_rng(20_248_100 + t),
                                  2000, 4, n_features=32) for t in range(5)]
    with threadpool_limits(limits=1):
        train(datasets_1000[0])  # warmup
        med_1000, med_2000 = _median_train_seconds(datasets_1000,
                                                   datasets_2000)
        ratio = med_2000 / med_1000
        if not 2.5 <= ratio <= 6.5:
            # wall-clock measurement on a shared machine; one remeasure of
            # the full 5-trial protocol before declaring failure
            med_1000, med_2000 = _median_train_seconds(datasets_1000,
                                                       datasets_2000)
            ratio = med_2000 / med_1000
    assert 2.5 <= ratio <= 6.5, (
        f"train medians {med_1000:.3f}s -> {med_2000:.3f}s, "
        f"ratio {ratio:.2f} outside [2.5, 6.5]")
    report(8, f"median train wall time {med_1000 * 1e3:.0f}ms at |V|=1000 "
              f"vs {med_2000 * 1e3:.0f}ms at |V|=2000, ratio {ratio:.2f} "
              f"in [2.5, 6.5]")


def test_criterion_9_grid_shape(tmp_path):
    """Default grid search emits 96 cells; sigma=1.0 column equals the
    standard classifier's evaluation accuracy cell-for-cell."""
    # overlapping clusters so the reference accuracy is non-trivial and
    # the column equality is a discriminating check
    dataset = random_blobs(np.random.default_rng(909), 420, 3, spread=2.5)
    src = tmp_path / "blobs.csv"
    save_csv(dataset, src)
    out = tmp_path / "grid.csv"
    runner = CliRunner()
    result = runner.invoke(cli_main, [
        "grid-search", "--input", str(src), "--output", str(out),
        "--seed", "3", "--no-figures"])
    assert result.exit_code == 0, result.output
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "k_max,sigma,accuracy"
    rows = [line.split(",") for line in lines[1:]]
    assert len(rows) == 96
    train_set, eval_set, _ = stratified_split(dataset,
                                              SplitSpec(0.6, 0.2, 0.2, 3))
    model = train(train_set)
    predicted, _ = classify_batch(model, eval_set)
    reference = float((predicted == eval_set.labels).mean())
    sigma_one = [float(acc) for _, sigma, acc in rows if float(sigma) == 1.0]
    assert len(sigma_one) == 16
    assert all(acc == reference for acc in sigma_one)
    report(9, f"default CLI grid search wrote 96 cells; all 16 sigma=1.0 "
              f"cells equal the standard evaluation accuracy {reference:.5f}")


def test_criterion_10_format_fidelity(tmp_path):
    """Binary round trips are bit-exact; CSV<->binary preserves labels and
    float32-resolution features."""
    rng = np.random.default_rng(20_250_000)
    for trial in range(20):
        n = int(rng.integers(10, 80))
        d = make_mixed_dataset(rng, n)
        first = tmp_path / f"a{trial}.opf"
        second = tmp_path / f"b{trial}.opf"
        save_opf_binary(d, first)
        save_opf_binary(load_opf_binary(first), second)
        assert first.read_bytes() == second.read_bytes()
    runner = CliRunner()
    src = tmp_path / "src.csv"
    d = random_blobs(np.random.default_rng(20_250_900), 60, 3)
    save_csv(d, src)
    binary = tmp_path / "conv.opf"
    back = tmp_path / "back.csv"
    for args in (["convert", "--input", str(src), "--output", str(binary),
                  "--format", "opf"],
                 ["convert", "--input", str(binary), "--output", str(back),
                  "--format", "csv"]):
        result = runner.invoke(cli_main, args)
        assert result.exit_code == 0, result.output
    returned = load_csv(back)
    assert np.array_equal(returned.labels, d.labels)
    assert np.array_equal(returned.features,
                          d.features.astype(np.float32).astype(np.float64))
    report(10, "20 binary round trips bit-exact; CSV->binary->CSV kept "
               "labels exactly and features at float32 resolution")
