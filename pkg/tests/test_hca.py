"""Tests for agglomerative clustering: distances, merge trees and cuts."""

import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sectorlab.exceptions import DimensionMismatchError, InvalidArgumentError
from sectorlab.hca import (
    build_merge_tree,
    cut,
    dump_merge_tree,
    euclidean_distances,
    partition_is_coarsening,
)
from sectorlab.types import LINKAGE_ORDER, Linkage


def _line(*xs: float) -> np.ndarray:
    return np.array([[x] for x in xs], dtype=float)


def _oracle(points: np.ndarray, linkage: Linkage) -> list[tuple[frozenset[int], frozenset[int], float]]:
    """Recompute every set-to-set distance from scratch at each step."""
    n = len(points)
    d = [[math.dist(points[i], points[j]) for j in range(n)] for i in range(n)]
    clusters = [frozenset([i]) for i in range(n)]

    def distance(a: frozenset[int], b: frozenset[int]) -> float:
        pairs = [d[i][j] for i in a for j in b]
        if linkage is Linkage.SINGLE:
            return min(pairs)
        if linkage is Linkage.COMPLETE:
            return max(pairs)
        if linkage is Linkage.AVERAGE:
            return math.fsum(pairs) / (len(a) * len(b))
        ca = points[sorted(a)].mean(axis=0)
        cb = points[sorted(b)].mean(axis=0)
        return math.sqrt(2.0 * len(a) * len(b) / (len(a) + len(b))) * math.dist(ca, cb)

    merges = []
    while len(clusters) > 1:
        best = min(
            ((distance(a, b), a, b) for i, a in enumerate(clusters) for b in clusters[i + 1 :]),
            key=lambda item: item[0],
        )
        height, a, b = best
        merges.append((a, b, height))
        clusters = [c for c in clusters if c not in (a, b)] + [a | b]
    return merges


def _leaf_sets(tree) -> list[tuple[frozenset[int], frozenset[int], float]]:
    members = {i: frozenset([i]) for i in range(tree.n_leaves)}
    merges = []
    for m in tree.merges:
        merges.append((members[m.left], members[m.right], m.height))
        members[m.new_id] = members[m.left] | members[m.right]
    return merges


def _canonical(partition, labels) -> frozenset[frozenset[int]]:
    return frozenset(frozenset(labels[i] for i in cluster) for cluster in partition)


class TestEuclideanDistances:
    """Tests for euclidean_distances."""

    def test_three_four_five(self):
        """(0,0) and (3,4) are 5 apart."""
        d = euclidean_distances([[0.0, 0.0], [3.0, 4.0]])

        assert d.values[0, 1] == 5.0
        assert d.values[1, 0] == 5.0
        assert d.n == 2

    def test_identical_rows(self):
        """Identical rows have zero distance."""
        d = euclidean_distances([[1.0, 2.0], [1.0, 2.0]])

        assert d.values[0, 1] == 0.0

    def test_matches_double_loop(self):
        """10 random 15-dim rows agree with an explicit double loop."""
        x = np.random.default_rng(3).normal(size=(10, 15)) * 1e6

        d = euclidean_distances(x).values

        for i in range(10):
            for j in range(10):
                expected = math.sqrt(sum((x[i, k] - x[j, k]) ** 2 for k in range(15)))
                assert d[i, j] == pytest.approx(expected, rel=1e-12, abs=1e-12)

    def test_symmetric_zero_diagonal(self):
        """The matrix is exactly symmetric with a zero diagonal."""
        d = euclidean_distances(np.random.default_rng(4).normal(size=(7, 15))).values

        assert (d == d.T).all()
        assert (np.diag(d) == 0.0).all()
        assert (d >= 0.0).all()

    def test_ragged_rows(self):
        """Rows of different length are a dimension error."""
        with pytest.raises(DimensionMismatchError):
            euclidean_distances([[0.0, 0.0], [1.0]])

    def test_non_finite(self):
        """NaN input is rejected."""
        with pytest.raises(InvalidArgumentError):
            euclidean_distances([[0.0, math.nan], [1.0, 1.0]])


class TestBuildMergeTree:
    """Tests for build_merge_tree."""

    def test_single_on_a_line(self):
        """{0, 1, 10} under single linkage merges 0+1 at 1, then 10 at 9."""
        tree = build_merge_tree(euclidean_distances(_line(0, 1, 10)), Linkage.SINGLE)

        assert [(m.left, m.right, m.height, m.new_id) for m in tree.merges] == [
            (0, 1, 1.0, 3),
            (2, 3, 9.0, 4),
        ]

    def test_complete_on_a_line(self):
        """Complete linkage joins 10 at the largest pairwise distance."""
        tree = build_merge_tree(euclidean_distances(_line(0, 1, 10)), "complete")

        assert tree.heights == [1.0, 10.0]
        assert tree.linkage is Linkage.COMPLETE

    def test_average_on_a_line(self):
        """Average linkage joins 10 at the mean of 10 and 9."""
        tree = build_merge_tree(euclidean_distances(_line(0, 1, 10)), "average")

        assert tree.heights == [1.0, 9.5]

    def test_too_few_items(self):
        """A single item cannot be clustered."""
        with pytest.raises(InvalidArgumentError):
            build_merge_tree(euclidean_distances([[1.0]]), "single")

    def test_unknown_linkage(self):
        """Only the four linkages are accepted."""
        with pytest.raises(ValueError):
            build_merge_tree(euclidean_distances(_line(0, 1)), "centroid")

    def test_ties_go_to_smallest_ids(self):
        """Equal distances merge the lexicographically smallest id pair first."""
        tree = build_merge_tree(euclidean_distances(_line(0, 1, 2, 3)), "single")

        assert [(m.left, m.right) for m in tree.merges] == [(0, 1), (2, 3), (4, 5)]

    def test_merge_structure(self):
        """n-1 merges, new ids n+t, every id consumed at most once."""
        x = np.random.default_rng(5).normal(size=(12, 15))
        tree = build_merge_tree(euclidean_distances(x), "ward")

        assert len(tree.merges) == 11
        assert [m.new_id for m in tree.merges] == list(range(12, 23))
        consumed = [i for m in tree.merges for i in (m.left, m.right)]
        assert len(consumed) == len(set(consumed))
        assert tree.merges[-1].size == 12

    @pytest.mark.parametrize("linkage", LINKAGE_ORDER)
    def test_matches_naive_oracle(self, linkage):
        """Random tie-free inputs match a recompute-everything oracle."""
        rng = np.random.default_rng(11)
        for _ in range(50):
            n = int(rng.integers(2, 13))
            points = rng.normal(size=(n, 15))

            tree = build_merge_tree(euclidean_distances(points), linkage)
            expected = _oracle(points, linkage)

            actual = _leaf_sets(tree)
            for (a, b, height), (ea, eb, eheight) in zip(actual, expected, strict=True):
                assert {a, b} == {ea, eb}
                assert height == pytest.approx(eheight, rel=1e-9, abs=1e-12)

    @pytest.mark.parametrize("linkage", LINKAGE_ORDER)
    def test_heights_monotone(self, linkage):
        """Merge heights never decrease."""
        rng = np.random.default_rng(12)
        for _ in range(20):
            points = rng.normal(size=(int(rng.integers(3, 30)), 15))

            heights = build_merge_tree(euclidean_distances(points), linkage).heights

            for lower, upper in zip(heights, heights[1:], strict=False):
                assert upper >= lower - 1e-9 * max(1.0, lower)


class TestCut:
    """Tests for cut and nesting."""

    def test_identity_cut(self):
        """k = n gives singletons."""
        tree = build_merge_tree(euclidean_distances(_line(0, 1, 10)), "single")

        assert cut(tree, 3) == [[0], [1], [2]]

    def test_single_cluster(self):
        """k = 1 gives one cluster of every leaf."""
        tree = build_merge_tree(euclidean_distances(_line(0, 1, 10)), "single")

        assert cut(tree, 1) == [[0, 1, 2]]

    def test_two_clusters(self):
        """{0, 1, 10} single linkage at k=2 separates 10."""
        tree = build_merge_tree(euclidean_distances(_line(0, 1, 10)), "single")

        assert cut(tree, 2) == [[0, 1], [2]]

    @pytest.mark.parametrize("k", [0, 4])
    def test_out_of_range(self, k):
        """k must lie in [1, n]."""
        tree = build_merge_tree(euclidean_distances(_line(0, 1, 10)), "single")

        with pytest.raises(InvalidArgumentError):
            cut(tree, k)

    @pytest.mark.parametrize("linkage", LINKAGE_ORDER)
    def test_nesting(self, linkage):
        """cut(k) is a coarsening of cut(k+1) at every k."""
        points = np.random.default_rng(13).normal(size=(25, 15))
        tree = build_merge_tree(euclidean_distances(points), linkage)

        partitions = {k: cut(tree, k) for k in range(1, 26)}

        for k in range(1, 25):
            assert len(partitions[k]) == k
            assert partition_is_coarsening(partitions[k], partitions[k + 1])
            assert sorted(i for c in partitions[k] for i in c) == list(range(25))

    def test_coarsening_detects_split(self):
        """A partition that splits a fine cluster is not a coarsening."""
        assert partition_is_coarsening([[0, 1, 2], [3]], [[0, 1], [2], [3]])
        assert not partition_is_coarsening([[0, 1], [2, 3]], [[0], [1, 2], [3]])


class TestPermutationEquivariance:
    """Relabeling rows permutes leaves but keeps every partition."""

    POINTS = np.random.default_rng(21).normal(size=(9, 15))

    @settings(max_examples=25, deadline=None)
    @given(order=st.permutations(list(range(9))), linkage=st.sampled_from(LINKAGE_ORDER))
    def test_same_partitions(self, order, linkage):
        base = build_merge_tree(euclidean_distances(self.POINTS), linkage)
        shuffled = build_merge_tree(euclidean_distances(self.POINTS[order]), linkage)

        for k in range(1, 10):
            assert _canonical(cut(shuffled, k), order) == _canonical(cut(base, k), list(range(9)))


class TestPooling:
    """Single linkage pools a dense chain into one dominant sector."""

    def test_single_linkage_k5(self, chain_dataset):
        """At k=5 one single-linkage cluster holds at least 80% of items."""
        table = chain_dataset.fundamentals
        features = table.for_year(table.latest_year())

        partition = cut(build_merge_tree(euclidean_distances(features), "single"), 5)

        assert max(len(c) for c in partition) >= 0.8 * len(features)


class TestDumpMergeTree:
    """Tests for the dendrogram CSV."""

    def test_dump(self, tmp_path):
        """One row per merge with the documented header."""
        tree = build_merge_tree(euclidean_distances(_line(0, 1, 10)), "single")

        path = dump_merge_tree(tree, tmp_path / "tree.csv")

        assert path.read_text().splitlines()[0] == "step,left_id,right_id,height,new_id"
        frame = pd.read_csv(path)
        assert frame["new_id"].tolist() == [3, 4]
        assert frame["height"].tolist() == [1.0, 9.0]
