import numpy as np
import pytest

from opforest import (ConfigError, DataError, Dataset, CostQueue, compute_mst,
                      distance, find_prototypes, pairwise_distances)

from conftest import line_dataset, random_uniform
from oracles import mst_weight_by_enumeration, mst_weight_by_prufer


class TestDistance:
    def test_euclidean_3_4_5(self):
        assert distance("euclidean", (0, 0), (3, 4)) == 5.0

    def test_identity(self):
        for metric in ("euclidean", "squared-euclidean", "manhattan"):
            assert distance(metric, (1.5, -2.0), (1.5, -2.0)) == 0.0

    def test_manhattan(self):
        assert distance("manhattan", (1, 2), (4, 0)) == 5.0

    def test_squared_euclidean(self):
        assert distance("squared-euclidean", (0, 0), (3, 4)) == 25.0

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            distance("euclidean", (1, 2), (1, 2, 3))

    def test_unknown_metric(self):
        with pytest.raises(ConfigError):
            distance("cosine", (1,), (2,))

    def test_symmetry_and_nonnegativity(self):
        rng = np.random.default_rng(3)
        for metric in ("euclidean", "squared-euclidean", "manhattan"):
            a = rng.standard_normal(6)
            b = rng.standard_normal(6)
            assert distance(metric, a, b) == pytest.approx(
                distance(metric, b, a))
            assert distance(metric, a, b) >= 0.0

    def test_pairwise_matches_scalar(self):
        rng = np.random.default_rng(4)
        feats = rng.standard_normal((7, 3))
        d = Dataset(feats, np.ones(7, dtype=np.int64), 1)
        for metric in ("euclidean", "squared-euclidean", "manhattan"):
            mat = pairwise_distances(metric, d.features)
            for i in range(7):
                for j in range(7):
                    assert mat[i, j] == pytest.approx(
                        distance(metric, feats[i], feats[j]), abs=1e-12)


class TestMst:
    def test_three_points_on_a_line(self):
        d = Dataset(np.array([[0.0], [1.0], [3.0]]), np.array([1, 1, 1]), 1)
        mst = compute_mst(d)
        assert mst.total_weight == 3.0
        edges = {(u, int(mst.parent[u])) for u in range(3)
                 if mst.parent[u] >= 0}
        assert edges == {(1, 0), (2, 1)}

    def test_single_sample(self):
        d = Dataset(np.array([[2.0]]), np.array([1]), 1)
        mst = compute_mst(d)
        assert mst.root == 0
        assert mst.parent.tolist() == [-1]
        assert mst.total_weight == 0.0

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6, 7, 8])
    def test_weight_matches_exhaustive_enumeration(self, n):
        rng = np.random.default_rng(n * 101)
        d = random_uniform(rng, n, 1, 3)
        dist = pairwise_distances("euclidean", d.features)
        got = compute_mst(d).total_weight
        assert got == pytest.approx(mst_weight_by_prufer(dist), abs=1e-9)
        if n <= 6:
            assert got == pytest.approx(mst_weight_by_enumeration(dist),
                                        abs=1e-9)

    def test_enumeration_oracles_agree(self):
        rng = np.random.default_rng(77)
        for _ in range(5):
            d = random_uniform(rng, 6, 1, 2)
            dist = pairwise_distances("euclidean", d.features)
            assert mst_weight_by_prufer(dist) == pytest.approx(
                mst_weight_by_enumeration(dist), abs=1e-12)

    def test_spans_all_nodes(self):
        rng = np.random.default_rng(8)
        d = random_uniform(rng, 20, 2, 2)
        mst = compute_mst(d)
        roots = np.flatnonzero(mst.parent < 0)
        assert roots.tolist() == [0]
        for u in range(20):  # every node reaches the root
            seen = set()
            x = u
            while x != 0:
                assert x not in seen
                seen.add(x)
                x = int(mst.parent[x])


class TestPrototypes:
    def test_line_fixture(self):
        d = line_dataset()
        protos = find_prototypes(d, compute_mst(d))
        assert protos.members == {1, 2}

    def test_single_class_degenerates_to_root(self):
        d = Dataset(np.array([[0.0], [1.0], [5.0]]), np.array([1, 1, 1]), 1)
        mst = compute_mst(d)
        protos = find_prototypes(d, mst)
        assert protos.members == {mst.root}

    def test_alternating_chain_selects_all(self):
        d = Dataset(np.array([[0.0], [1.0], [2.0], [3.0]]),
                    np.array([1, 2, 1, 2]), 2)
        protos = find_prototypes(d, compute_mst(d))
        assert protos.members == {0, 1, 2, 3}

    def test_size_mismatch(self):
        d = line_dataset()
        other = Dataset(np.array([[0.0], [1.0]]), np.array([1, 2]), 2)
        with pytest.raises(DataError):
            find_prototypes(d, compute_mst(other))

    def test_scale_invariance(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            d = random_uniform(rng, 12, 3, 2)
            scaled = Dataset(d.features * 37.5, d.labels.copy(), d.n_classes)
            a = find_prototypes(d, compute_mst(d)).members
            b = find_prototypes(scaled, compute_mst(scaled)).members
            assert a == b

    def test_every_prototype_has_cross_class_edge(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            d = random_uniform(rng, 15, 3, 2)
            mst = compute_mst(d)
            protos = find_prototypes(d, mst)
            cross = set()
            for u in range(len(d)):
                p = int(mst.parent[u])
                if p >= 0 and d.labels[u] != d.labels[p]:
                    cross.update((u, p))
            assert protos.members == cross


class TestCostQueue:
    def test_pop_order_min(self):
        q = CostQueue("min")
        for node, cost in [(0, 5.0), (1, 2.0), (2, 8.0), (3, 2.0)]:
            q.push(node, cost)
        assert [q.pop()[0] for _ in range(4)] == [1, 3, 0, 2]

    def test_fifo_among_equal_priorities(self):
        q = CostQueue("min")
        for node in range(6):
            q.push(node, 1.0)
        assert [q.pop()[0] for _ in range(6)] == list(range(6))

    def test_update_requeues_behind_equals(self):
        q = CostQueue("min")
        q.push(0, 3.0)
        q.push(1, 1.0)
        q.push(2, 2.0)
        q.update(0, 2.0)  # same priority as node 2, but fresher
        assert [q.pop()[0] for _ in range(3)] == [1, 2, 0]

    def test_max_mode(self):
        q = CostQueue("max")
        for node, cost in [(0, 1.0), (1, 9.0), (2, 4.0)]:
            q.push(node, cost)
        assert [q.pop()[0] for _ in range(3)] == [1, 2, 0]

    def test_max_mode_fifo(self):
        q = CostQueue("max")
        for node in range(4):
            q.push(node, 2.5)
        assert [q.pop()[0] for _ in range(4)] == [0, 1, 2, 3]

    def test_membership_and_len(self):
        q = CostQueue("min")
        q.push(4, 1.0)
        assert 4 in q and 5 not in q and len(q) == 1
        q.pop()
        assert 4 not in q and len(q) == 0

    def test_double_push_rejected(self):
        q = CostQueue("min")
        q.push(0, 1.0)
        with pytest.raises(ConfigError):
            q.push(0, 2.0)

    def test_pop_empty(self):
        with pytest.raises(IndexError):
            CostQueue("min").pop()

    def test_randomized_against_sort(self):
        rng = np.random.default_rng(21)
        for _ in range(30):
            n = int(rng.integers(1, 40))
            priorities = rng.integers(0, 6, size=n).astype(float)
            q = CostQueue("min")
            for node, pr in enumerate(priorities):
                q.push(node, pr)
            # updates on a random subset (decrease only, fresh FIFO slot)
            for node in rng.choice(n, size=n // 3, replace=False):
                priorities[node] -= float(rng.integers(0, 3))
                q.update(int(node), priorities[node])
            got = [q.pop() for _ in range(n)]
            assert [cost for _, cost in got] == sorted(priorities.tolist())

    def test_priority_increase_supported(self):
        q = CostQueue("min")
        q.push(0, 1.0)
        q.push(1, 2.0)
        q.update(0, 3.0)
        assert [q.pop()[0] for _ in range(2)] == [1, 0]
