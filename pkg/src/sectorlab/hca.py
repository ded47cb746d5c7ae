"""Agglomerative hierarchical clustering of company feature vectors.

Distances are Euclidean on raw dollar features (no scaling). The merge loop
keeps an active-cluster distance table and updates it with the
Lance-Williams rule of the chosen linkage:

    single    d(C, A) = min(d(A, X), d(A, Y))
    complete  d(C, A) = max(d(A, X), d(A, Y))
    average   d(C, A) = (|X| d(A, X) + |Y| d(A, Y)) / (|X| + |Y|)
    ward      d(C, A)^2 = ((|A|+|X|) d(A, X)^2 + (|A|+|Y|) d(A, Y)^2 - |A| d(X, Y)^2) / N

where C = X u Y and N = |A| + |X| + |Y|. Ward distances between singletons
are seeded with the plain Euclidean distance.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import DimensionMismatchError, InvalidArgumentError
from .files import write_frame
from .logging import get_logger
from .types import FeatureMatrix, Linkage

logger = get_logger(__name__)


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric matrix of pairwise Euclidean distances with zero diagonal."""

    values: np.ndarray

    @property
    def n(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class MergeStep:
    """One agglomeration: clusters ``left`` and ``right`` become ``new_id``.

    Attributes:
        left: Smaller of the two merged cluster ids
        right: Larger of the two merged cluster ids
        height: Linkage distance between the two clusters
        new_id: Id of the merged cluster (n_leaves + step)
        size: Number of leaves in the merged cluster
    """

    left: int
    right: int
    height: float
    new_id: int
    size: int


@dataclass(frozen=True)
class MergeTree:
    """Dendrogram: the n_leaves - 1 merges in the order they happened."""

    n_leaves: int
    merges: tuple[MergeStep, ...]
    linkage: Linkage

    @property
    def heights(self) -> list[float]:
        return [m.height for m in self.merges]


def _as_array(m: FeatureMatrix | np.ndarray | Sequence[Sequence[float]]) -> np.ndarray:
    if isinstance(m, FeatureMatrix):
        return np.asarray(m.values, dtype=float)
    if isinstance(m, np.ndarray):
        return np.asarray(m, dtype=float)
    rows = [list(r) for r in m]
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise DimensionMismatchError(f"Feature rows have differing dimensions: {sorted(widths)}")
    return np.array(rows, dtype=float).reshape(len(rows), widths.pop() if widths else 0)


def euclidean_distances(m: FeatureMatrix | np.ndarray | Sequence[Sequence[float]]) -> DistanceMatrix:
    """Pairwise Euclidean distances between the rows of a feature matrix.

    Raises:
        DimensionMismatchError: Rows have differing lengths or input is not 2-D
        InvalidArgumentError: Input contains NaN or infinity
    """
    x = _as_array(m)
    if x.ndim != 2:
        raise DimensionMismatchError(f"Expected a 2-D feature matrix, got {x.ndim} dimensions")
    if not np.isfinite(x).all():
        raise InvalidArgumentError("Feature matrix contains non-finite values")

    # Each pair sums its squared differences in feature order, so
    # d[i, j] and d[j, i] are bit-identical.
    diff = x[:, np.newaxis, :] - x[np.newaxis, :, :]
    d = np.sqrt(np.sum(diff * diff, axis=2))
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(values=d)


def _lance_williams(
    linkage: Linkage,
    d_ax: np.ndarray,
    d_ay: np.ndarray,
    d_xy: float,
    size_a: np.ndarray,
    size_x: int,
    size_y: int,
) -> np.ndarray:
    if linkage is Linkage.SINGLE:
        return np.minimum(d_ax, d_ay)
    if linkage is Linkage.COMPLETE:
        return np.maximum(d_ax, d_ay)
    if linkage is Linkage.AVERAGE:
        return (size_x * d_ax + size_y * d_ay) / (size_x + size_y)
    total = size_a + size_x + size_y
    squared = (
        (size_a + size_x) * d_ax * d_ax
        + (size_a + size_y) * d_ay * d_ay
        - size_a * (d_xy * d_xy)
    ) / total
    return np.sqrt(np.maximum(squared, 0.0))


def build_merge_tree(d: DistanceMatrix, linkage: Linkage | str) -> MergeTree:
    """Cluster bottom-up until a single cluster remains.

    Each step merges the active pair with the smallest linkage distance.
    Ties go to the pair with the lexicographically smallest
    (min cluster id, max cluster id).

    Raises:
        InvalidArgumentError: Fewer than two items
    """
    linkage = Linkage(linkage)
    n = d.n
    if n < 2:
        raise InvalidArgumentError(f"Need at least 2 items to cluster, got {n}")

    table = np.array(d.values, dtype=float, copy=True)
    np.fill_diagonal(table, np.inf)
    ids = np.arange(n)
    sizes = np.ones(n, dtype=np.int64)
    active = np.ones(n, dtype=bool)
    merges: list[MergeStep] = []

    with logger.performance("Merge tree", level=logging.DEBUG, linkage=linkage.value, items=n):
        for step in range(n - 1):
            height = float(table.min())
            rows, cols = np.nonzero(table == height)
            a, b = min(
                zip(rows.tolist(), cols.tolist(), strict=True),
                key=lambda rc: (min(ids[rc[0]], ids[rc[1]]), max(ids[rc[0]], ids[rc[1]])),
            )
            a, b = min(a, b), max(a, b)

            left, right = sorted((int(ids[a]), int(ids[b])))
            new_id = n + step
            size_x, size_y = int(sizes[a]), int(sizes[b])
            merges.append(MergeStep(left, right, height, new_id, size_x + size_y))

            others = active.copy()
            others[a] = others[b] = False
            if others.any():
                updated = _lance_williams(
                    linkage,
                    table[a, others],
                    table[b, others],
                    height,
                    sizes[others],
                    size_x,
                    size_y,
                )
                table[a, others] = updated
                table[others, a] = updated

            table[b, :] = np.inf
            table[:, b] = np.inf
            active[b] = False
            ids[a] = new_id
            sizes[a] = size_x + size_y

    return MergeTree(n_leaves=n, merges=tuple(merges), linkage=linkage)


def cut(tree: MergeTree, k: int) -> list[list[int]]:
    """Flat partition with ``k`` clusters from the first n_leaves - k merges.

    Clusters are lists of leaf ids in ascending order; clusters are ordered
    by their smallest leaf.

    Raises:
        InvalidArgumentError: k outside [1, n_leaves]
    """
    n = tree.n_leaves
    if not 1 <= k <= n:
        raise InvalidArgumentError(f"k={k} outside [1, {n}]")

    parent = list(range(2 * n - 1))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for merge in tree.merges[: n - k]:
        parent[find(merge.left)] = merge.new_id
        parent[find(merge.right)] = merge.new_id

    groups: dict[int, list[int]] = {}
    for leaf in range(n):
        groups.setdefault(find(leaf), []).append(leaf)
    return sorted(groups.values(), key=lambda members: members[0])


def partition_is_coarsening(coarse: Sequence[Sequence[int]], fine: Sequence[Sequence[int]]) -> bool:
    """True if every cluster of ``coarse`` is a union of clusters of ``fine``."""
    owner: dict[int, int] = {}
    for index, members in enumerate(coarse):
        for item in members:
            owner[item] = index
    for members in fine:
        if len({owner.get(item, -1) for item in members}) != 1:
            return False
    return sorted(owner) == sorted(i for members in fine for i in members)


def merge_tree_frame(tree: MergeTree) -> pd.DataFrame:
    """Dendrogram as a ``step,left_id,right_id,height,new_id`` frame."""
    return pd.DataFrame(
        [(step, m.left, m.right, m.height, m.new_id) for step, m in enumerate(tree.merges)],
        columns=["step", "left_id", "right_id", "height", "new_id"],
    )


def dump_merge_tree(tree: MergeTree, path: Path) -> Path:
    """Write the dendrogram CSV for external plotting."""
    return write_frame(merge_tree_frame(tree), Path(path))
