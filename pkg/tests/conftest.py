"""Pytest configuration and shared fixtures."""

import logging
from datetime import date
from pathlib import Path

import pytest

from sectorlab.synthetic import CHAIN_LAYOUT, SyntheticDataset, generate, write_synthetic_dataset
from sectorlab.trading_calendar import TradingCalendar
from sectorlab.types import SectorUniverse, UniverseMeta

FIXTURE_SEED = 1729


@pytest.fixture(autouse=True)
def _drop_cli_log_handlers():
    """Remove console/file handlers that configure_logging installs during a test."""
    root = logging.getLogger()
    before = list(root.handlers)
    level = root.level
    yield
    for handler in root.handlers[:]:
        if handler not in before and type(handler) in (logging.StreamHandler, logging.FileHandler):
            root.removeHandler(handler)
            handler.close()
    root.setLevel(level)


@pytest.fixture(scope="session")
def calendar() -> TradingCalendar:
    return TradingCalendar.default()


@pytest.fixture(scope="session")
def small_dataset(calendar) -> SyntheticDataset:
    """3 benchmark sectors, 12 tickers, prices for 2016-2017."""
    return generate(
        seed=FIXTURE_SEED,
        n_tickers=12,
        n_sectors=3,
        start=date(2016, 1, 1),
        end=date(2017, 12, 31),
        cal=calendar,
    )


@pytest.fixture(scope="session")
def sectors_dataset(calendar) -> SyntheticDataset:
    """40 tickers in 4 benchmark sectors, fundamentals and prices for 2012-2017."""
    return generate(seed=FIXTURE_SEED, cal=calendar)


@pytest.fixture(scope="session")
def chain_dataset(calendar) -> SyntheticDataset:
    """36 chained companies tracking one price path plus 4 outliers, 2016."""
    return generate(
        layout=CHAIN_LAYOUT,
        seed=FIXTURE_SEED,
        start=date(2016, 1, 1),
        end=date(2016, 12, 31),
        cal=calendar,
    )


@pytest.fixture
def small_files(tmp_path, small_dataset) -> dict[str, Path]:
    """The small dataset written as fundamentals.csv, prices.csv, benchmark.csv."""
    return write_synthetic_dataset(small_dataset, tmp_path / "data")


@pytest.fixture
def make_universe():
    """Factory: universe from a ticker -> label mapping."""

    def factory(assignments: dict[str, str], linkage: str = "single") -> SectorUniverse:
        return SectorUniverse(
            assignments=dict(assignments),
            meta=UniverseMeta(linkage=linkage, sector_count=len(set(assignments.values()))),
        )

    return factory
