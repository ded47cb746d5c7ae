"""Concurrent backtests over many universes.

Universes are processed in chunks of ``parallel``. With ``parallel > 1``
each backtest runs in a worker process; with ``parallel == 1`` they run
inline, one after another. Every run is independent: a failure is recorded
on its outcome and the remaining universes still run.
"""

import asyncio
import logging
import time
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import batched
from pathlib import Path
from typing import Any

from .backtest import BacktestConfig, BacktestLedger, run_backtest, write_ledger
from .exceptions import InvalidArgumentError, SectorLabError
from .logging import get_logger
from .progress import NullProgressReporter, ProgressReporter
from .trading_calendar import TradingCalendar
from .types import PriceTable, SectorUniverse

logger = get_logger(__name__)


@dataclass(frozen=True)
class BacktestJob:
    """One universe to backtest.

    Attributes:
        universe: Universe to simulate
        config: Backtest settings
        outdir: Directory to write the ledger files into, if any
    """

    universe: SectorUniverse
    config: BacktestConfig
    outdir: Path | None = None

    @property
    def key(self) -> str:
        return self.universe.key


@dataclass
class BacktestOutcome:
    """Result of one universe's backtest.

    Attributes:
        key: Universe key
        success: Whether the backtest completed
        ledger: The ledger, when successful
        error: Error message, when failed
        error_context: Structured context of a sectorlab error
        duration: Wall-clock seconds
    """

    key: str
    success: bool
    ledger: BacktestLedger | None = None
    error: str | None = None
    error_context: dict[str, Any] | None = None
    duration: float = 0.0


@dataclass
class BacktestResults:
    """Outcomes of a multi-universe run, in job order.

    Example:
        >>> results = await BacktestExecutor(parallel=4).run(jobs, prices, cal)
        >>> print(f"Success: {results.successful}/{results.total}")
    """

    outcomes: dict[str, BacktestOutcome] = field(default_factory=dict)
    total: int = 0
    successful: int = 0
    failed: int = 0

    def __post_init__(self) -> None:
        """Calculate statistics from outcomes."""
        if not self.outcomes:
            return
        self.total = len(self.outcomes)
        self.successful = sum(1 for o in self.outcomes.values() if o.success)
        self.failed = self.total - self.successful

    def is_success(self) -> bool:
        """Check if every backtest succeeded."""
        return self.failed == 0

    def ledgers(self) -> dict[str, BacktestLedger]:
        """Ledgers of the successful backtests."""
        return {k: o.ledger for k, o in self.outcomes.items() if o.ledger is not None}


def run_job(job: BacktestJob, prices: PriceTable, cal: TradingCalendar) -> BacktestLedger:
    """Backtest one universe and write its ledger files when asked to.

    Runs inline or in a worker process, so it logs through its own logger.
    """
    log = get_logger(__name__)
    with log.scope("Backtest", level=logging.DEBUG, universe=job.key, tickers=len(job.universe.tickers)):
        ledger = run_backtest(job.universe, prices, job.config, cal)
        if job.outdir is not None:
            paths = write_ledger(ledger, job.outdir)
            log.debug("Wrote ledger files", files=len(paths), outdir=job.outdir)
    return ledger


class BacktestExecutor:
    """Runs backtests for many universes with bounded parallelism.

    Attributes:
        parallel: Number of universes processed at once
        progress_reporter: Reporter for progress events
    """

    def __init__(
        self,
        parallel: int = 1,
        progress_reporter: ProgressReporter | None = None,
    ) -> None:
        if parallel < 1:
            raise InvalidArgumentError(f"parallel must be at least 1, got {parallel}")
        self.parallel = parallel
        self.progress_reporter = progress_reporter or NullProgressReporter()

    async def run(
        self,
        jobs: list[BacktestJob],
        prices: PriceTable,
        cal: TradingCalendar,
    ) -> BacktestResults:
        """Backtest every job.

        Args:
            jobs: Universes to backtest; keys must be unique
            prices: Shared price table
            cal: Trading calendar

        Returns:
            BacktestResults with one outcome per job
        """
        start_time = time.perf_counter()
        self.progress_reporter.on_run_start(len(jobs), "backtest")
        logger.info("Starting backtests", universes=len(jobs), parallel=self.parallel)

        outcomes: dict[str, BacktestOutcome] = {}
        pool = ProcessPoolExecutor(max_workers=self.parallel) if self.parallel > 1 else None
        try:
            for batch in batched(jobs, self.parallel):
                done = await asyncio.gather(
                    *(self._run_one(job, prices, cal, pool) for job in batch)
                )
                for outcome in done:
                    outcomes[outcome.key] = outcome
        finally:
            if pool is not None:
                pool.shutdown()

        results = BacktestResults(outcomes=outcomes)
        duration = time.perf_counter() - start_time
        self.progress_reporter.on_run_complete(
            results.total, results.successful, results.failed, duration
        )
        logger.info(
            "Backtests finished",
            successful=results.successful,
            failed=results.failed,
            duration=f"{duration:.2f}s",
        )
        return results

    async def _run_one(
        self,
        job: BacktestJob,
        prices: PriceTable,
        cal: TradingCalendar,
        pool: Executor | None,
    ) -> BacktestOutcome:
        self.progress_reporter.on_universe_start(job.key)
        start_time = time.perf_counter()
        try:
            if pool is None:
                ledger = run_job(job, prices, cal)
            else:
                loop = asyncio.get_running_loop()
                ledger = await loop.run_in_executor(pool, run_job, job, prices, cal)
            outcome = BacktestOutcome(key=job.key, success=True, ledger=ledger)
        except SectorLabError as e:
            logger.error("Backtest failed", universe=job.key, error=str(e))
            outcome = BacktestOutcome(
                key=job.key,
                success=False,
                error=str(e),
                error_context=e.context.to_dict(),
            )
        except Exception as e:
            logger.error("Backtest crashed", universe=job.key, error=repr(e))
            outcome = BacktestOutcome(key=job.key, success=False, error=repr(e))
        outcome.duration = time.perf_counter() - start_time
        self.progress_reporter.on_universe_complete(
            job.key, outcome.success, outcome.duration, outcome.error
        )
        return outcome
