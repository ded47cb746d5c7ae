"""Tests for search-space generation, sector labels and transitions."""

import logging

import pandas as pd
import pytest

from sectorlab.exceptions import DimensionMismatchError, InvalidArgumentError, UniverseMismatchError
from sectorlab.hca import build_merge_tree, euclidean_distances
from sectorlab.ingest import load_universe
from sectorlab.universes import (
    NATO_ALPHABET,
    SUMMARY_FILE,
    build_search_space,
    is_coarsening,
    label_for,
    label_sectors,
    search_space_summary,
    transitions,
    universes_from_tree,
    write_search_space,
    write_transitions,
)


@pytest.fixture(scope="module")
def features(sectors_dataset):
    table = sectors_dataset.fundamentals
    return table.for_year(table.latest_year())


@pytest.fixture(scope="module")
def space(features):
    return build_search_space(features)


class TestLabels:
    """Tests for label_sectors and label_for."""

    def test_largest_is_alpha(self):
        """Sizes [3, 1, 1]: the 3-cluster is Alpha."""
        labels = label_sectors([[1], [0, 2, 3], [4]])

        assert labels[1] == "Alpha"
        assert labels[0] == "Bravo"
        assert labels[2] == "Charlie"

    def test_size_tie_broken_by_smallest_leaf(self):
        """Equal sizes: the cluster holding leaf 0 is Alpha."""
        labels = label_sectors([[1, 3], [0, 2]])

        assert labels == {1: "Alpha", 0: "Bravo"}

    def test_27th_label(self):
        """Labels continue with a numeric suffix after Zulu."""
        labels = label_sectors([[i] for i in range(27)])

        assert labels[25] == "Zulu"
        assert labels[26] == "Alpha2"
        assert label_for(52) == "Alpha3"

    def test_bijection(self):
        """k clusters get the first k labels, each once."""
        labels = label_sectors([[i] for i in range(7)])

        assert sorted(labels.values()) == sorted(NATO_ALPHABET[:7])


class TestUniversesFromTree:
    """Tests for universes_from_tree."""

    def test_fifteen_universes(self, features):
        """k 5..19 gives 15 universes with k distinct labels each."""
        tree = build_merge_tree(euclidean_distances(features), "average")

        universes = universes_from_tree(tree, features.tickers, (5, 19), year=2017)

        assert [u.meta.sector_count for u in universes] == list(range(5, 20))
        for u in universes:
            assert len(set(u.assignments.values())) == u.meta.sector_count
            assert u.meta.linkage == "average"
            assert u.meta.source_year == 2017
            assert list(u.assignments) == list(features.tickers)

    def test_every_ticker_own_sector(self, features):
        """k = n puts every ticker in its own sector."""
        n = len(features)
        tree = build_merge_tree(euclidean_distances(features), "single")

        (universe,) = universes_from_tree(tree, features.tickers, (n, n))

        assert len(set(universe.assignments.values())) == n

    def test_nesting(self, features):
        """The k=5 universe is a coarsening of k=6."""
        tree = build_merge_tree(euclidean_distances(features), "ward")

        five, six = universes_from_tree(tree, features.tickers, (5, 6))

        assert is_coarsening(five, six)
        assert not is_coarsening(six, five)

    def test_ticker_count_mismatch(self, features):
        """Tickers must match the leaves one to one."""
        tree = build_merge_tree(euclidean_distances(features), "single")

        with pytest.raises(DimensionMismatchError):
            universes_from_tree(tree, features.tickers[:-1], (5, 6))

    @pytest.mark.parametrize("k_range", [(6, 5), (0, 3), (5, 41)])
    def test_bad_k_range(self, features, k_range):
        """k range must be non-empty and inside [1, n]."""
        tree = build_merge_tree(euclidean_distances(features), "single")

        with pytest.raises(InvalidArgumentError):
            universes_from_tree(tree, features.tickers, k_range)

    def test_benchmark_labels_carried(self, features, sectors_dataset):
        """Benchmark labels travel with the learned assignments."""
        tree = build_merge_tree(euclidean_distances(features), "complete")

        (universe,) = universes_from_tree(
            tree, features.tickers, (5, 5), benchmark=sectors_dataset.benchmark.assignments
        )

        assert universe.benchmark == sectors_dataset.benchmark.assignments


class TestSearchSpace:
    """Tests for build_search_space and write_search_space."""

    def test_sixty_universes(self, space):
        """4 linkages x 15 sector counts."""
        assert len(space) == 60
        assert space.get("complete", 17).key == "complete_17"
        assert [u.key for u in space][:2] == ["single_5", "single_6"]

    def test_subset(self, features):
        """k_min = k_max = 7 gives one universe per linkage."""
        space = build_search_space(features, k_range=(7, 7))

        assert sorted(u.key for u in space) == ["average_7", "complete_7", "single_7", "ward_7"]

    def test_written_files(self, tmp_path, space):
        """One <linkage>_<k>.csv per universe plus the summary."""
        paths = write_search_space(space, tmp_path)

        assert len(paths) == 60
        assert (tmp_path / "ward_19.csv").exists()
        assert (tmp_path / SUMMARY_FILE).exists()
        loaded = load_universe(tmp_path / "ward_19.csv")
        assert loaded.assignments == space.get("ward", 19).assignments

    def test_byte_identical_regeneration(self, tmp_path, features):
        """Identical inputs write identical bytes."""
        write_search_space(build_search_space(features), tmp_path / "a")
        write_search_space(build_search_space(features), tmp_path / "b")

        for path in sorted((tmp_path / "a").iterdir()):
            assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes()

    def test_summary(self, space):
        """The summary has one row per universe with consistent shares."""
        summary = search_space_summary(space)

        assert len(summary) == 60
        assert (summary["largest_share"] <= 1.0).all()
        row = summary[(summary["linkage"] == "single") & (summary["k"] == 5)]
        assert int(row["largest_sector"].iloc[0]) >= 8

    def test_pooling_summary(self, chain_dataset):
        """Single linkage at k=5 on the chain layout holds 80% in one sector."""
        table = chain_dataset.fundamentals

        summary = search_space_summary(build_search_space(table.for_year(table.latest_year())))

        row = summary[(summary["linkage"] == "single") & (summary["k"] == 5)].iloc[0]
        assert row["largest_share"] >= 0.8
        assert row["singletons"] == 4


class TestTransitions:
    """Tests for transitions and write_transitions."""

    def test_identity(self, make_universe):
        """A universe against itself flows only along the diagonal."""
        u = make_universe({"A": "x", "B": "x", "C": "y"})

        table = transitions(u, u)

        assert table.flows == {("x", "x"): 2, ("y", "y"): 1}

    def test_split(self, make_universe):
        """One source sector splitting into two targets."""
        table = transitions(make_universe({"A": "a", "B": "a"}), make_universe({"A": "x", "B": "y"}))

        assert table.flows == {("a", "x"): 1, ("a", "y"): 1}

    def test_benchmark_vs_learned_conserved(self, small_dataset):
        """Flows sum to the common tickers and outflows to the source sizes."""
        table = small_dataset.fundamentals
        learned = build_search_space(table.for_year(table.latest_year()), k_range=(5, 5)).get("ward", 5)
        bench = small_dataset.benchmark

        flows = transitions(bench, learned)

        assert flows.total == 12
        sizes = pd.Series(bench.assignments).value_counts().to_dict()
        assert flows.outflows() == dict(sorted(sizes.items()))

    def test_partial_overlap_warns(self, make_universe, caplog):
        """Tickers missing on one side are reported, not counted."""
        with caplog.at_level(logging.WARNING):
            table = transitions(make_universe({"A": "x", "B": "y"}), make_universe({"B": "z", "C": "z"}))

        assert table.flows == {("y", "z"): 1}
        assert table.only_in_from == ("A",)
        assert table.only_in_to == ("C",)
        assert "differ in tickers" in caplog.text

    def test_no_common_tickers(self, make_universe):
        """Disjoint universes are an error."""
        with pytest.raises(UniverseMismatchError):
            transitions(make_universe({"A": "x"}), make_universe({"B": "x"}))

    def test_write(self, tmp_path, make_universe):
        """CSV rows sorted by label pair."""
        table = transitions(make_universe({"A": "b", "B": "a"}), make_universe({"A": "x", "B": "x"}))

        path = write_transitions(table, tmp_path / "t.csv")

        assert path.read_text().splitlines() == ["from_label,to_label,count", "a,x,1", "b,x,1"]


def test_is_coarsening_needs_same_tickers(make_universe):
    """Universes over different tickers are never nested."""
    assert not is_coarsening(make_universe({"A": "x"}), make_universe({"B": "x"}))
