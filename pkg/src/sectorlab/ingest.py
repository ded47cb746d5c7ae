"""Loading and validation of fundamentals, price and sector-universe files.

All three inputs are CSV with a mandatory header. Loading is deterministic:
the same bytes always give identical in-memory tables.
"""

import math
import re
from collections import Counter
from datetime import date
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import ConfigError, DataValidationError, DuplicateEntryError, SchemaError
from .files import write_frame
from .logging import get_logger
from .types import (
    BENCHMARK,
    FEATURE_COLUMNS,
    FEATURE_LABELS,
    FundamentalsRecord,
    FundamentalsTable,
    PriceTable,
    SectorUniverse,
    UniverseMeta,
)

logger = get_logger(__name__)

TICKER_COLUMN = "ticker"
YEAR_COLUMN = "fiscal_year"
DATE_COLUMN = "date"
BENCHMARK_COLUMN = "benchmark_sector"
LEARNED_COLUMN = "learned_sector"

UNIVERSE_FILE_PATTERN = re.compile(r"^(?P<linkage>[a-z]+)_(?P<k>\d+)$")

# Header is line 1, so data row i (0-based) sits on line i + 2.
_HEADER_LINES = 2


def _read_raw(path: Path) -> pd.DataFrame:
    """Read a CSV keeping every cell as text, empty cells as ''."""
    try:
        frame: pd.DataFrame = pd.read_csv(
            path, dtype=str, keep_default_na=False, skipinitialspace=True
        )
    except pd.errors.EmptyDataError:
        return pd.DataFrame()
    except OSError as e:
        raise ConfigError(f"Cannot read input file {path}: {e}", source=str(path)) from None
    frame.columns = [str(c).strip() for c in frame.columns]
    return frame


def load_fundamentals(path: Path) -> FundamentalsTable:
    """Load a fundamentals CSV into a validated table.

    Args:
        path: CSV with ``ticker``, ``fiscal_year`` and the 15 feature columns

    Returns:
        FundamentalsTable in file row order

    Raises:
        SchemaError: A required column is missing
        DataValidationError: A feature value is missing or non-finite
        DuplicateEntryError: A (ticker, fiscal_year) pair repeats
    """
    path = Path(path)
    raw = _read_raw(path)

    for column in (TICKER_COLUMN, YEAR_COLUMN, *FEATURE_COLUMNS):
        if column not in raw.columns:
            label = FEATURE_LABELS.get(column, column)
            raise SchemaError(
                f"Missing column '{column}' ({label}) in fundamentals file",
                source=str(path),
                column=column,
            )

    records: list[FundamentalsRecord] = []
    seen: set[tuple[str, int]] = set()
    for i in range(len(raw)):
        line = i + _HEADER_LINES
        ticker = str(raw.at[i, TICKER_COLUMN]).strip()
        year_text = str(raw.at[i, YEAR_COLUMN]).strip()
        if not ticker:
            raise DataValidationError(
                "Empty ticker", source=str(path), line=line, column=TICKER_COLUMN
            )
        try:
            year = int(year_text)
        except ValueError:
            raise DataValidationError(
                f"Fiscal year '{year_text}' is not an integer",
                source=str(path),
                line=line,
                ticker=ticker,
                column=YEAR_COLUMN,
            ) from None

        features = []
        for column in FEATURE_COLUMNS:
            text = str(raw.at[i, column]).strip()
            try:
                value = float(text)
            except ValueError:
                value = math.nan
            if not math.isfinite(value):
                raise DataValidationError(
                    f"Non-finite value '{text}' for {FEATURE_LABELS[column]} "
                    f"(ticker {ticker}, fiscal year {year})",
                    source=str(path),
                    line=line,
                    column=column,
                    ticker=ticker,
                    fiscal_year=year,
                )
            features.append(value)

        key = (ticker, year)
        if key in seen:
            raise DuplicateEntryError(
                f"Duplicate fundamentals row for ticker {ticker}, fiscal year {year}",
                source=str(path),
                line=line,
                ticker=ticker,
                fiscal_year=year,
            )
        seen.add(key)
        records.append(FundamentalsRecord(ticker=ticker, fiscal_year=year, features=tuple(features)))

    logger.debug("Loaded fundamentals", source=path, records=len(records))
    return FundamentalsTable(records=records)


def save_fundamentals(table: FundamentalsTable, path: Path) -> Path:
    """Write a fundamentals table in the documented column order."""
    frame = pd.DataFrame(
        [(r.ticker, r.fiscal_year, *r.features) for r in table.records],
        columns=[TICKER_COLUMN, YEAR_COLUMN, *FEATURE_COLUMNS],
    )
    return write_frame(frame, Path(path))


def load_prices(path: Path) -> PriceTable:
    """Load a wide daily price CSV.

    Args:
        path: CSV whose first column is an ISO-8601 date and whose other
            columns are tickers; an empty cell is a gap

    Returns:
        PriceTable sorted by date, gaps kept as NaN

    Raises:
        DataValidationError: Unparseable date or non-positive/non-numeric price
        DuplicateEntryError: A date appears twice
    """
    path = Path(path)
    raw = _read_raw(path)
    if len(raw.columns) == 0:
        raise SchemaError("Price file has no header", source=str(path))

    date_column = raw.columns[0]
    tickers = [str(c) for c in raw.columns[1:]]

    dates: list[date] = []
    for i, text in enumerate(raw[date_column]):
        try:
            dates.append(date.fromisoformat(str(text).strip()))
        except ValueError:
            raise DataValidationError(
                f"Unparseable date '{text}'",
                source=str(path),
                line=i + _HEADER_LINES,
                column=str(date_column),
            ) from None

    values = np.full((len(raw), len(tickers)), np.nan)
    for j, ticker in enumerate(tickers):
        for i, text in enumerate(raw[ticker]):
            text = str(text).strip()
            if not text:
                continue
            try:
                price = float(text)
            except ValueError:
                price = math.nan
            if not math.isfinite(price) or price <= 0.0:
                raise DataValidationError(
                    f"Non-positive or invalid price '{text}' at ({dates[i].isoformat()}, {ticker})",
                    source=str(path),
                    line=i + _HEADER_LINES,
                    column=ticker,
                    ticker=ticker,
                    date=dates[i].isoformat(),
                )
            values[i, j] = price

    index = pd.DatetimeIndex(pd.to_datetime(dates), name=DATE_COLUMN)
    frame = pd.DataFrame(values, index=index, columns=tickers)
    frame = frame.sort_index(kind="mergesort")
    duplicated = frame.index.duplicated()
    if duplicated.any():
        first = frame.index[duplicated][0]
        raise DuplicateEntryError(
            f"Date {first.date().isoformat()} appears more than once",
            source=str(path),
            date=first.date().isoformat(),
        )

    logger.debug("Loaded prices", source=path, dates=len(frame), tickers=len(tickers))
    return PriceTable(frame=frame)


def save_prices(prices: PriceTable, path: Path) -> Path:
    """Write a price table in the wide CSV layout, gaps as empty cells."""
    frame = prices.frame.copy()
    frame.index = [d.date().isoformat() for d in frame.index]
    frame.index.name = DATE_COLUMN
    return write_frame(frame, Path(path), index=True)


def _meta_from_path(path: Path, has_learned: bool, sector_count: int) -> UniverseMeta:
    if not has_learned:
        return UniverseMeta(linkage=BENCHMARK, sector_count=sector_count)
    match = UNIVERSE_FILE_PATTERN.match(path.stem)
    linkage = match.group("linkage") if match else "custom"
    return UniverseMeta(linkage=linkage, sector_count=sector_count)


def load_universe(path: Path, source_year: int | None = None) -> SectorUniverse:
    """Load a sector-universe CSV.

    A file with a non-empty ``learned_sector`` column is a learned universe
    whose provenance comes from its ``<linkage>_<k>.csv`` name; without that
    column the file is a benchmark universe. In learned files the
    ``benchmark_sector`` cell may be blank.

    Raises:
        SchemaError: ``ticker`` or ``benchmark_sector`` column missing
        DuplicateEntryError: A ticker appears twice
        DataValidationError: An assigned sector label is empty
    """
    path = Path(path)
    raw = _read_raw(path)
    for column in (TICKER_COLUMN, BENCHMARK_COLUMN):
        if column not in raw.columns:
            raise SchemaError(
                f"Missing column '{column}' in universe file",
                source=str(path),
                column=column,
            )
    has_learned = LEARNED_COLUMN in raw.columns
    label_column = LEARNED_COLUMN if has_learned else BENCHMARK_COLUMN

    assignments: dict[str, str] = {}
    benchmark: dict[str, str] = {}
    for i in range(len(raw)):
        line = i + _HEADER_LINES
        ticker = str(raw.at[i, TICKER_COLUMN]).strip()
        label = str(raw.at[i, label_column]).strip()
        if not ticker:
            raise DataValidationError("Empty ticker", source=str(path), line=line)
        if ticker in assignments:
            raise DuplicateEntryError(
                f"Duplicate ticker {ticker} in universe file",
                source=str(path),
                line=line,
                ticker=ticker,
            )
        if not label:
            raise DataValidationError(
                f"Empty sector label for ticker {ticker}",
                source=str(path),
                line=line,
                column=label_column,
                ticker=ticker,
            )
        assignments[ticker] = label
        bench_label = str(raw.at[i, BENCHMARK_COLUMN]).strip()
        if bench_label:
            benchmark[ticker] = bench_label

    meta = _meta_from_path(path, has_learned, len(set(assignments.values())))
    if source_year is not None:
        meta = UniverseMeta(meta.linkage, meta.sector_count, source_year)
    return SectorUniverse(
        assignments=assignments,
        meta=meta,
        benchmark=benchmark or None,
    )


def save_universe(universe: SectorUniverse, path: Path) -> Path:
    """Write a universe in the ``ticker,benchmark_sector,learned_sector`` layout.

    Benchmark universes are written with the two-column layout so that
    loading them back yields a benchmark universe again.
    """
    bench = universe.benchmark or {}
    if universe.meta.linkage == BENCHMARK:
        frame = pd.DataFrame(
            [(t, label) for t, label in universe.assignments.items()],
            columns=[TICKER_COLUMN, BENCHMARK_COLUMN],
        )
    else:
        frame = pd.DataFrame(
            [(t, bench.get(t, ""), label) for t, label in universe.assignments.items()],
            columns=[TICKER_COLUMN, BENCHMARK_COLUMN, LEARNED_COLUMN],
        )
    return write_frame(frame, Path(path))


def sector_distribution(universe: SectorUniverse) -> dict[str, int]:
    """Number of tickers in each sector, largest first (ties by label)."""
    counts = Counter(universe.assignments.values())
    return dict(sorted(counts.items(), key=lambda item: (-item[1], item[0])))
