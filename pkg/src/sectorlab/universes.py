"""Candidate sector universes: search-space generation, labels and transitions.

A merge tree is cut once per requested sector count; each cut becomes a
SectorUniverse whose sectors carry NATO phonetic labels, largest first.
"""

from collections import Counter
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd

from .exceptions import DimensionMismatchError, InvalidArgumentError, UniverseMismatchError
from .files import write_frame
from .hca import MergeTree, build_merge_tree, cut, euclidean_distances, partition_is_coarsening
from .ingest import save_universe
from .logging import get_logger
from .types import LINKAGE_ORDER, FeatureMatrix, Linkage, SectorUniverse, UniverseMeta

logger = get_logger(__name__)

NATO_ALPHABET: tuple[str, ...] = (
    "Alpha", "Bravo", "Charlie", "Delta", "Echo", "Foxtrot", "Golf",
    "Hotel", "India", "Juliett", "Kilo", "Lima", "Mike", "November",
    "Oscar", "Papa", "Quebec", "Romeo", "Sierra", "Tango", "Uniform",
    "Victor", "Whiskey", "Xray", "Yankee", "Zulu",
)

DEFAULT_K_RANGE: tuple[int, int] = (5, 19)

SUMMARY_FILE = "search_space_summary.csv"


def label_for(index: int) -> str:
    """Label of the ``index``-th sector: Alpha..Zulu, then Alpha2..Zulu2, ..."""
    word = NATO_ALPHABET[index % len(NATO_ALPHABET)]
    round_ = index // len(NATO_ALPHABET)
    return word if round_ == 0 else f"{word}{round_ + 1}"


def label_sectors(partition: Sequence[Sequence[int]]) -> dict[int, str]:
    """Assign labels to the clusters of a partition.

    Clusters are ranked by descending size, ties broken by the smallest
    leaf id they contain, and labelled in that order.

    Returns:
        Mapping from cluster position in ``partition`` to its label
    """
    order = sorted(
        range(len(partition)),
        key=lambda c: (-len(partition[c]), min(partition[c])),
    )
    return {cluster: label_for(rank) for rank, cluster in enumerate(order)}


def _check_k_range(k_range: tuple[int, int], n_leaves: int) -> None:
    k_min, k_max = k_range
    if k_min > k_max:
        raise InvalidArgumentError(f"Empty k range {k_min}..{k_max}")
    if k_min < 1 or k_max > n_leaves:
        raise InvalidArgumentError(
            f"k range {k_min}..{k_max} outside [1, {n_leaves}]"
        )


def universes_from_tree(
    tree: MergeTree,
    tickers: Sequence[str],
    k_range: tuple[int, int],
    year: int | None = None,
    benchmark: Mapping[str, str] | None = None,
) -> list[SectorUniverse]:
    """Cut ``tree`` at every k in the inclusive ``k_range``.

    Args:
        tree: Merge tree over ``tickers`` (leaf i is tickers[i])
        tickers: Ticker of each leaf
        k_range: Inclusive (k_min, k_max)
        year: Fiscal year the tree was learned from
        benchmark: Benchmark label per ticker, carried into the universe files

    Raises:
        DimensionMismatchError: Ticker count differs from the leaf count
        InvalidArgumentError: k range empty or outside [1, n_leaves]
    """
    if len(tickers) != tree.n_leaves:
        raise DimensionMismatchError(
            f"{len(tickers)} tickers for a tree with {tree.n_leaves} leaves"
        )
    _check_k_range(k_range, tree.n_leaves)

    universes = []
    for k in range(k_range[0], k_range[1] + 1):
        partition = cut(tree, k)
        labels = label_sectors(partition)
        leaf_label = {
            leaf: labels[cluster]
            for cluster, members in enumerate(partition)
            for leaf in members
        }
        assignments = {ticker: leaf_label[i] for i, ticker in enumerate(tickers)}
        bench = {t: benchmark[t] for t in tickers if t in benchmark} if benchmark else None
        universes.append(
            SectorUniverse(
                assignments=assignments,
                meta=UniverseMeta(linkage=tree.linkage.value, sector_count=k, source_year=year),
                benchmark=bench or None,
            )
        )
    return universes


@dataclass
class SearchSpace:
    """Every candidate universe, keyed by (linkage, k).

    Attributes:
        universes: Universe per (linkage name, k), linkage-major order
        k_range: Inclusive (k_min, k_max)
        linkages: Linkages the space was built with
        year: Fiscal year of the clustering input
    """

    universes: dict[tuple[str, int], SectorUniverse] = field(default_factory=dict)
    k_range: tuple[int, int] = DEFAULT_K_RANGE
    linkages: tuple[Linkage, ...] = LINKAGE_ORDER
    year: int | None = None

    def __len__(self) -> int:
        return len(self.universes)

    def __iter__(self) -> Iterator[SectorUniverse]:
        return iter(self.universes.values())

    def get(self, linkage: Linkage | str, k: int) -> SectorUniverse:
        return self.universes[(Linkage(linkage).value, k)]


def build_search_space(
    features: FeatureMatrix,
    linkages: Iterable[Linkage | str] = LINKAGE_ORDER,
    k_range: tuple[int, int] = DEFAULT_K_RANGE,
    benchmark: Mapping[str, str] | None = None,
) -> SearchSpace:
    """Cluster one year's features with every linkage and cut at every k.

    The distance matrix is computed once and shared by all linkages.
    """
    linkages = tuple(Linkage(link) for link in linkages)
    _check_k_range(k_range, len(features))
    distances = euclidean_distances(features)

    space = SearchSpace(k_range=k_range, linkages=linkages, year=features.fiscal_year)
    for linkage in linkages:
        tree = build_merge_tree(distances, linkage)
        for universe in universes_from_tree(
            tree, features.tickers, k_range, features.fiscal_year, benchmark
        ):
            space.universes[(linkage.value, universe.meta.sector_count)] = universe
        logger.debug("Built universes", linkage=linkage.value, year=features.fiscal_year)
    return space


def universe_filename(universe: SectorUniverse) -> str:
    """File name of a universe: ``<linkage>_<k>.csv`` or ``benchmark.csv``."""
    return f"{universe.key}.csv"


def search_space_summary(space: SearchSpace) -> pd.DataFrame:
    """Pooling diagnostic: largest sector, its share and singleton count per universe."""
    rows = []
    for (linkage, k), universe in space.universes.items():
        sizes = Counter(universe.assignments.values())
        largest = max(sizes.values())
        rows.append(
            (
                linkage,
                k,
                largest,
                largest / len(universe.assignments),
                sum(1 for size in sizes.values() if size == 1),
            )
        )
    return pd.DataFrame(
        rows, columns=["linkage", "k", "largest_sector", "largest_share", "singletons"]
    )


def write_search_space(space: SearchSpace, outdir: Path) -> list[Path]:
    """Write every universe file plus the summary CSV into ``outdir``."""
    outdir = Path(outdir)
    written = [
        save_universe(universe, outdir / universe_filename(universe))
        for universe in space
    ]
    write_frame(search_space_summary(space), outdir / SUMMARY_FILE)
    logger.info("Wrote search space", outdir=outdir, universes=len(written))
    return written


def is_coarsening(coarse: SectorUniverse, fine: SectorUniverse) -> bool:
    """True if every sector of ``coarse`` is a union of sectors of ``fine``.

    Both universes must cover the same tickers.
    """
    if set(coarse.assignments) != set(fine.assignments):
        return False
    index = {ticker: i for i, ticker in enumerate(fine.assignments)}

    def groups(universe: SectorUniverse) -> list[list[int]]:
        return [[index[t] for t in members] for members in universe.sectors().values()]

    return partition_is_coarsening(groups(coarse), groups(fine))


@dataclass(frozen=True)
class TransitionTable:
    """Ticker flows between the sectors of two universes (Sankey data).

    Attributes:
        flows: Count of common tickers per (from_label, to_label)
        only_in_from: Tickers present only in the ``from`` universe
        only_in_to: Tickers present only in the ``to`` universe
    """

    flows: dict[tuple[str, str], int]
    only_in_from: tuple[str, ...] = ()
    only_in_to: tuple[str, ...] = ()

    @property
    def total(self) -> int:
        return sum(self.flows.values())

    def outflows(self) -> dict[str, int]:
        """Common tickers leaving each ``from`` sector."""
        sums: Counter[str] = Counter()
        for (source, _), count in self.flows.items():
            sums[source] += count
        return dict(sorted(sums.items()))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(a, b, n) for (a, b), n in sorted(self.flows.items())],
            columns=["from_label", "to_label", "count"],
        )


def transitions(source: SectorUniverse, target: SectorUniverse) -> TransitionTable:
    """Count how the tickers of each ``source`` sector spread over ``target``.

    Raises:
        UniverseMismatchError: The universes share no ticker
    """
    common = [t for t in source.assignments if t in target.assignments]
    if not common:
        raise UniverseMismatchError(
            f"Universes {source.key} and {target.key} have no tickers in common"
        )
    flows = Counter((source.assignments[t], target.assignments[t]) for t in common)
    only_from = tuple(t for t in source.assignments if t not in target.assignments)
    only_to = tuple(t for t in target.assignments if t not in source.assignments)
    if only_from or only_to:
        logger.warning(
            "Universes differ in tickers",
            source=source.key,
            target=target.key,
            only_in_source=len(only_from),
            only_in_target=len(only_to),
        )
    return TransitionTable(flows=dict(flows), only_in_from=only_from, only_in_to=only_to)


def write_transitions(table: TransitionTable, path: Path) -> Path:
    """Write ``from_label,to_label,count`` rows sorted by label pair."""
    return write_frame(table.to_frame(), Path(path))
