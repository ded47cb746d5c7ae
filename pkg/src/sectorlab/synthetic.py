"""Seeded synthetic datasets: fundamentals, GBM prices and a benchmark universe.

Two layouts are available:

``sectors``
    Companies scattered around one center per benchmark sector; prices
    follow a sector-factor geometric Brownian motion.
``chain-outliers``
    36 companies on a tightly spaced chain plus 4 far-away outliers. The
    chain companies track one price path with a little noise of their own,
    the outliers move independently.
    Single linkage pools the chain into one sector.
"""

from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import InvalidArgumentError
from .ingest import DATE_COLUMN, save_fundamentals, save_prices, save_universe
from .logging import get_logger
from .trading_calendar import TradingCalendar
from .types import (
    BENCHMARK,
    FEATURE_COLUMNS,
    FundamentalsRecord,
    FundamentalsTable,
    PriceTable,
    SectorUniverse,
    UniverseMeta,
)

logger = get_logger(__name__)

SECTORS_LAYOUT = "sectors"
CHAIN_LAYOUT = "chain-outliers"
LAYOUTS = (SECTORS_LAYOUT, CHAIN_LAYOUT)

DEFAULT_SEED = 20171231
DEFAULT_START = date(2012, 1, 1)
DEFAULT_END = date(2017, 12, 31)

BENCHMARK_SECTORS: tuple[str, ...] = (
    "Information Technology",
    "Health Care",
    "Financials",
    "Consumer Discretionary",
    "Industrials",
    "Consumer Staples",
    "Energy",
    "Utilities",
    "Real Estate",
    "Materials",
    "Communication Services",
)

CHAIN_LENGTH = 36
OUTLIERS = 4
CHAIN_UNIT = 1_000_000.0
CHAIN_BASE = 1_000_000_000.0
OUTLIER_OFFSET = 10.0

FUNDAMENTALS_FILE = "fundamentals.csv"
PRICES_FILE = "prices.csv"
BENCHMARK_FILE = "benchmark.csv"


@dataclass(frozen=True)
class SyntheticDataset:
    """A generated dataset and the sector each ticker was drawn from."""

    fundamentals: FundamentalsTable
    prices: PriceTable
    benchmark: SectorUniverse


def ticker_names(n: int) -> list[str]:
    return [f"SYN{i:03d}" for i in range(n)]


def _records(
    tickers: list[str], years: list[int], values: np.ndarray
) -> FundamentalsTable:
    """Table from values of shape (years, tickers, 15), year-major order."""
    return FundamentalsTable(
        records=[
            FundamentalsRecord(
                ticker=ticker,
                fiscal_year=year,
                features=tuple(float(v) for v in values[y, i]),
            )
            for y, year in enumerate(years)
            for i, ticker in enumerate(tickers)
        ]
    )


def _sector_fundamentals(
    rng: np.random.Generator, groups: list[int], n_groups: int, years: list[int]
) -> np.ndarray:
    features = len(FEATURE_COLUMNS)
    centers = np.exp(rng.normal(20.0, 1.0, size=(n_groups, features)))
    centers *= np.exp(rng.normal(0.0, 1.0, size=(n_groups, 1)))
    size = np.exp(rng.normal(0.0, 0.2, size=(len(groups), 1)))
    base = centers[groups] * size * np.exp(rng.normal(0.0, 0.15, size=(len(groups), features)))
    drift = np.exp(rng.normal(0.0, 0.02, size=(len(years), len(groups), features)))
    growth = 1.05 ** np.arange(len(years))
    return np.round(base[np.newaxis] * drift * growth[:, np.newaxis, np.newaxis])


def _chain_fundamentals(rng: np.random.Generator, years: list[int]) -> np.ndarray:
    features = len(FEATURE_COLUMNS)
    n = CHAIN_LENGTH + OUTLIERS
    points = np.zeros((n, features))
    points[:CHAIN_LENGTH, 0] = np.cumsum(1.0 + rng.uniform(0.0, 0.05, size=CHAIN_LENGTH))
    for j in range(OUTLIERS):
        anchor = 4 + 8 * j
        points[CHAIN_LENGTH + j, 0] = points[anchor, 0]
        points[CHAIN_LENGTH + j, j + 1] = OUTLIER_OFFSET
    layers = []
    for y in range(len(years)):
        jitter = rng.normal(0.0, 0.01, size=(n, features))
        layers.append((CHAIN_BASE + CHAIN_UNIT * (points + jitter)) * 1.03**y)
    return np.round(np.array(layers))


def gbm_prices(
    rng: np.random.Generator,
    tickers: list[str],
    groups: list[int],
    days: pd.DatetimeIndex,
    factor_volatility: float = 0.01,
    idiosyncratic_volatility: float = 0.015,
    shared_groups: frozenset[int] = frozenset(),
    shared_volatility: float = 0.002,
) -> pd.DataFrame:
    """Daily closes from a one-factor-per-group geometric Brownian motion.

    Tickers in ``shared_groups`` follow their group leader's path plus a
    small noise of their own (``shared_volatility``).
    """
    n_days = len(days)
    n_groups = max(groups) + 1
    factor = rng.normal(0.0002, factor_volatility, size=(n_days, n_groups))
    own = rng.normal(0.0001, idiosyncratic_volatility, size=(n_days, len(tickers)))
    start = rng.uniform(20.0, 200.0, size=len(tickers))
    shared_path: dict[int, int] = {}
    returns = np.empty((n_days, len(tickers)))
    for i, group in enumerate(groups):
        leader = shared_path.setdefault(group, i) if group in shared_groups else i
        returns[:, i] = factor[:, group] + own[:, leader]
        start[i] = start[leader]
    if shared_groups:
        followers = np.array([g in shared_groups for g in groups])
        returns[:, followers] += rng.normal(0.0, shared_volatility, size=(n_days, int(followers.sum())))
    returns[0] = 0.0
    values = np.round(start * np.exp(np.cumsum(returns, axis=0)), 4)
    return pd.DataFrame(values, index=pd.DatetimeIndex(days, name=DATE_COLUMN), columns=tickers)


def generate(
    layout: str = SECTORS_LAYOUT,
    seed: int = DEFAULT_SEED,
    n_tickers: int = 40,
    n_sectors: int = 4,
    years: list[int] | None = None,
    start: date = DEFAULT_START,
    end: date = DEFAULT_END,
    late_listings: int = 0,
    cal: TradingCalendar | None = None,
) -> SyntheticDataset:
    """Build a synthetic dataset; identical arguments give identical data.

    Args:
        layout: ``sectors`` or ``chain-outliers``
        seed: Random seed
        n_tickers: Number of companies (``sectors`` layout only)
        n_sectors: Number of benchmark sectors (``sectors`` layout only)
        years: Fiscal years of fundamentals (default: every year of the window)
        start: First price date
        end: Last price date
        late_listings: Number of tickers (taken from the end) without prices
            for the first fifth of the window
        cal: Calendar of the price dates

    Raises:
        InvalidArgumentError: Unknown layout or inconsistent sizes
    """
    if layout not in LAYOUTS:
        raise InvalidArgumentError(f"Unknown layout '{layout}', expected one of {', '.join(LAYOUTS)}")
    cal = cal or TradingCalendar.default()
    years = years or list(range(start.year, end.year + 1))
    rng = np.random.default_rng(seed)

    if layout == SECTORS_LAYOUT:
        if not 1 <= n_sectors <= min(n_tickers, len(BENCHMARK_SECTORS)):
            raise InvalidArgumentError(
                f"n_sectors must be in [1, {min(n_tickers, len(BENCHMARK_SECTORS))}], got {n_sectors}"
            )
        tickers = ticker_names(n_tickers)
        groups = [i % n_sectors for i in range(n_tickers)]
        values = _sector_fundamentals(rng, groups, n_sectors, years)
        shared: frozenset[int] = frozenset()
    else:
        tickers = ticker_names(CHAIN_LENGTH + OUTLIERS)
        groups = [0] * CHAIN_LENGTH + list(range(1, OUTLIERS + 1))
        values = _chain_fundamentals(rng, years)
        shared = frozenset({0})

    days = cal.trading_index(start, end)
    frame = gbm_prices(rng, tickers, groups, days, shared_groups=shared)
    if late_listings:
        frame.iloc[: len(days) // 5, len(tickers) - late_listings :] = np.nan

    labels = {t: BENCHMARK_SECTORS[g % len(BENCHMARK_SECTORS)] for t, g in zip(tickers, groups, strict=True)}
    benchmark = SectorUniverse(
        assignments=labels,
        meta=UniverseMeta(linkage=BENCHMARK, sector_count=len(set(labels.values()))),
    )
    logger.debug("Generated synthetic dataset", layout=layout, seed=seed, tickers=len(tickers))
    return SyntheticDataset(
        fundamentals=_records(tickers, years, values),
        prices=PriceTable(frame=frame),
        benchmark=benchmark,
    )


def write_synthetic_dataset(dataset: SyntheticDataset, outdir: Path) -> dict[str, Path]:
    """Write fundamentals, prices and benchmark CSVs into ``outdir``."""
    outdir = Path(outdir)
    return {
        "fundamentals": save_fundamentals(dataset.fundamentals, outdir / FUNDAMENTALS_FILE),
        "prices": save_prices(dataset.prices, outdir / PRICES_FILE),
        "benchmark": save_universe(dataset.benchmark, outdir / BENCHMARK_FILE),
    }
