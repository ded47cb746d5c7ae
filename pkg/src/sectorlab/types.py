"""Type definitions for sectorlab.

Core data types shared by ingest, clustering, universe generation and the
backtest: fundamentals records, feature matrices, price tables and sector
universes.
"""

from collections.abc import Iterator
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
import pandas as pd

from .exceptions import DataValidationError, DimensionMismatchError

# Fixed schema order; distances never depend on file column order.
FEATURE_COLUMNS: tuple[str, ...] = (
    "total_assets",
    "cash_and_equivalents",
    "receivables",
    "inventories",
    "sales",
    "cost_of_goods_sold",
    "gross_profit",
    "operating_cash_flow",
    "operating_income",
    "depreciation_amortization",
    "interest_expense",
    "non_operating_income",
    "income_taxes",
    "advertising_expense",
    "rnd_expense",
)

FEATURE_LABELS: dict[str, str] = {
    "total_assets": "Total Assets",
    "cash_and_equivalents": "Cash & Equivalents",
    "receivables": "Receivables",
    "inventories": "Inventories",
    "sales": "Sales",
    "cost_of_goods_sold": "Cost of Goods Sold",
    "gross_profit": "Gross Profit",
    "operating_cash_flow": "Operating Cash Flow",
    "operating_income": "Operating Income",
    "depreciation_amortization": "Depreciation/Depletion/Amortization",
    "interest_expense": "Interest Expense",
    "non_operating_income": "Non-Operating Income/Expense",
    "income_taxes": "Income Taxes",
    "advertising_expense": "Advertising Expense",
    "rnd_expense": "R&D Expense",
}

BENCHMARK = "benchmark"


class Linkage(StrEnum):
    """Inter-cluster distance rule for agglomerative clustering."""

    SINGLE = "single"
    COMPLETE = "complete"
    AVERAGE = "average"
    WARD = "ward"

    @property
    def rank(self) -> int:
        """Position in the tie-break order single < complete < average < ward."""
        return LINKAGE_ORDER.index(self)


LINKAGE_ORDER: tuple[Linkage, ...] = (
    Linkage.SINGLE,
    Linkage.COMPLETE,
    Linkage.AVERAGE,
    Linkage.WARD,
)


@dataclass(frozen=True)
class FundamentalsRecord:
    """One company's 15 annual fundamentals for one fiscal year.

    Attributes:
        ticker: Ticker symbol
        fiscal_year: Fiscal year of the annual report
        features: 15 dollar values in FEATURE_COLUMNS order
    """

    ticker: str
    fiscal_year: int
    features: tuple[float, ...]


@dataclass(frozen=True)
class FeatureMatrix:
    """Clustering input: one row of fundamentals per ticker for one year.

    Attributes:
        tickers: Row labels, in input order
        values: Array of shape (len(tickers), 15)
        fiscal_year: Year the rows were taken from
    """

    tickers: tuple[str, ...]
    values: np.ndarray
    fiscal_year: int | None = None

    def __post_init__(self) -> None:
        expected = (len(self.tickers), len(FEATURE_COLUMNS))
        if np.shape(self.values) != expected:
            raise DimensionMismatchError(
                f"Feature matrix has shape {np.shape(self.values)}, expected {expected}"
            )

    def __len__(self) -> int:
        return len(self.tickers)


@dataclass
class FundamentalsTable:
    """Validated fundamentals records, in file order.

    Example:
        >>> table = load_fundamentals(Path("fundamentals.csv"))
        >>> matrix = table.for_year(table.latest_year())
        >>> matrix.values.shape
        (362, 15)
    """

    records: list[FundamentalsRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[FundamentalsRecord]:
        return iter(self.records)

    def __getitem__(self, index: int) -> FundamentalsRecord:
        return self.records[index]

    def years(self) -> list[int]:
        """Distinct fiscal years, ascending."""
        return sorted({r.fiscal_year for r in self.records})

    def latest_year(self) -> int:
        """Most recent fiscal year present."""
        years = self.years()
        if not years:
            raise DataValidationError("Fundamentals table is empty")
        return years[-1]

    def for_year(self, year: int) -> FeatureMatrix:
        """Feature matrix of every ticker reporting in ``year``, file order."""
        rows = [r for r in self.records if r.fiscal_year == year]
        if not rows:
            raise DataValidationError(f"No fundamentals for fiscal year {year}", fiscal_year=year)
        values = np.array([r.features for r in rows], dtype=float)
        return FeatureMatrix(
            tickers=tuple(r.ticker for r in rows),
            values=values,
            fiscal_year=year,
        )


@dataclass(frozen=True)
class PriceTable:
    """Daily closing prices, one column per ticker.

    Attributes:
        frame: Float frame indexed by a strictly increasing DatetimeIndex;
            NaN marks a gap (no price that day)
    """

    frame: pd.DataFrame

    def __post_init__(self) -> None:
        index = self.frame.index
        if not isinstance(index, pd.DatetimeIndex):
            raise DataValidationError("Price table must be indexed by date")
        if not index.is_monotonic_increasing or index.has_duplicates:
            raise DataValidationError("Price dates must be strictly increasing")

    @property
    def dates(self) -> list[pd.Timestamp]:
        return list(self.frame.index)

    @property
    def tickers(self) -> list[str]:
        return [str(c) for c in self.frame.columns]

    def price(self, ticker: str, date: pd.Timestamp | str) -> float | None:
        """Price of ``ticker`` on ``date``, or None for a gap."""
        value = self.frame.at[pd.Timestamp(date), ticker]
        return None if pd.isna(value) else float(value)

    def count(self) -> int:
        """Number of stored (non-gap) prices."""
        return int(self.frame.notna().to_numpy().sum())


@dataclass(frozen=True)
class UniverseMeta:
    """Provenance of a sector universe.

    Attributes:
        linkage: Linkage name, or "benchmark" for an external classification
        sector_count: Number of distinct sector labels
        source_year: Fiscal year of the fundamentals it was learned from
    """

    linkage: str
    sector_count: int
    source_year: int | None = None


@dataclass(frozen=True)
class SectorUniverse:
    """Total mapping ticker -> sector label.

    Attributes:
        assignments: Sector label of each ticker
        meta: Provenance (linkage, k, year)
        benchmark: Benchmark label of each ticker, when the file carried one
    """

    assignments: dict[str, str]
    meta: UniverseMeta
    benchmark: dict[str, str] | None = None

    def __post_init__(self) -> None:
        distinct = len(set(self.assignments.values()))
        if distinct != self.meta.sector_count:
            raise DimensionMismatchError(
                f"sector_count {self.meta.sector_count} does not match "
                f"{distinct} distinct labels"
            )

    @property
    def key(self) -> str:
        """Universe key: ``<linkage>_<k>`` or ``benchmark``."""
        if self.meta.linkage == BENCHMARK:
            return BENCHMARK
        return f"{self.meta.linkage}_{self.meta.sector_count}"

    @property
    def tickers(self) -> list[str]:
        return list(self.assignments)

    def sectors(self) -> dict[str, list[str]]:
        """Constituents of each sector, labels sorted, tickers in universe order."""
        members: dict[str, list[str]] = {}
        for ticker, label in self.assignments.items():
            members.setdefault(label, []).append(ticker)
        return {label: members[label] for label in sorted(members)}
