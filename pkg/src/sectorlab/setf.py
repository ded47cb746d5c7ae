"""Price-weighted synthetic ETFs (SETFs), one per sector.

A restructure sets each constituent's weight to its share of the summed
constituent prices. Between restructures the SETF price is the dot product
of those stale weights with current prices.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from .exceptions import DimensionMismatchError, InvalidArgumentError, MissingPriceError
from .logging import get_logger
from .types import SectorUniverse

logger = get_logger(__name__)


def _is_priced(value: float | None) -> bool:
    return value is not None and not math.isnan(value)


@dataclass(frozen=True)
class SyntheticEtf:
    """One sector's synthetic ETF.

    Attributes:
        sector_label: Sector the ETF tracks
        constituents: Constituent tickers, fixed for the whole run
        weights: Weight of each constituent set at the last restructure;
            zero for constituents that were unpriced at that time
        last_restructure: Date of the last restructure, None before the first
    """

    sector_label: str
    constituents: tuple[str, ...]
    weights: tuple[float, ...] = ()
    last_restructure: pd.Timestamp | None = None

    @classmethod
    def create(cls, sector_label: str, constituents: Sequence[str]) -> "SyntheticEtf":
        if not constituents:
            raise InvalidArgumentError(f"Sector {sector_label} has no constituents")
        return cls(sector_label=sector_label, constituents=tuple(constituents))

    @property
    def weighted(self) -> bool:
        return self.last_restructure is not None

    @property
    def weight_vector(self) -> np.ndarray:
        if not self.weighted:
            return np.zeros(len(self.constituents))
        return np.array(self.weights, dtype=float)

    def weight_map(self) -> dict[str, float]:
        """Constituent weights; all zero before the first restructure."""
        return dict(zip(self.constituents, self.weight_vector.tolist(), strict=True))


def _check_length(etf: SyntheticEtf, prices: Sequence[float | None]) -> None:
    if len(prices) != len(etf.constituents):
        raise DimensionMismatchError(
            f"{len(prices)} prices for {len(etf.constituents)} constituents of {etf.sector_label}"
        )


def restructure(
    etf: SyntheticEtf,
    prices: Sequence[float | None],
    date: pd.Timestamp | str,
    allow_missing: bool = False,
) -> SyntheticEtf:
    """Recompute weights as w_i = P_i / sum(P).

    Args:
        etf: ETF to restructure
        prices: Price of each constituent in constituent order; None or NaN
            marks an unpriced constituent
        date: Restructure date
        allow_missing: Give unpriced constituents weight 0 and renormalize
            over the priced ones instead of failing

    Raises:
        MissingPriceError: A constituent is unpriced (or all are, with allow_missing)
        InvalidArgumentError: A price is not positive
    """
    _check_length(etf, prices)
    date = pd.Timestamp(date)
    priced: list[float] = []
    for ticker, price in zip(etf.constituents, prices, strict=True):
        if not _is_priced(price):
            if not allow_missing:
                raise MissingPriceError(
                    f"No price for {ticker} in sector {etf.sector_label}",
                    ticker=ticker,
                    date=date.date().isoformat(),
                )
            continue
        assert price is not None
        if price <= 0.0:
            raise InvalidArgumentError(f"Non-positive price {price} for {ticker}", ticker=ticker)
        priced.append(price)

    if not priced:
        raise MissingPriceError(
            f"No constituent of sector {etf.sector_label} is priced",
            date=date.date().isoformat(),
        )

    total = math.fsum(priced)
    weights = tuple(
        price / total if _is_priced(price) else 0.0  # type: ignore[operator]
        for price in prices
    )
    return replace(etf, weights=weights, last_restructure=date)


def etf_price(etf: SyntheticEtf, prices: Sequence[float | None]) -> float:
    """SETF price: stale weights dotted with current prices.

    Raises:
        InvalidArgumentError: The ETF was never restructured
        MissingPriceError: A constituent with non-zero weight is unpriced
    """
    if etf.last_restructure is None:
        raise InvalidArgumentError(f"SETF {etf.sector_label} has no weights yet")
    _check_length(etf, prices)
    terms = []
    for ticker, weight, price in zip(etf.constituents, etf.weights, prices, strict=True):
        if weight == 0.0:
            continue
        if not _is_priced(price):
            raise MissingPriceError(
                f"No price for weighted constituent {ticker} of {etf.sector_label}",
                ticker=ticker,
            )
        terms.append(weight * price)  # type: ignore[operator]
    return math.fsum(terms)


def absolute_turnover(
    old: Sequence[float], new: Sequence[float], prices: Sequence[float | None]
) -> float:
    """sum_i |new_i - old_i| * P_i, skipping unchanged entries.

    Raises:
        DimensionMismatchError: Vectors of different lengths
        MissingPriceError: A changed entry has no price
    """
    if not len(old) == len(new) == len(prices):
        raise DimensionMismatchError(
            f"Turnover vectors differ in length: {len(old)}, {len(new)}, {len(prices)}"
        )
    terms = []
    for before, after, price in zip(old, new, prices, strict=True):
        delta = abs(after - before)
        if delta == 0.0:
            continue
        if not _is_priced(price):
            raise MissingPriceError("Weight changed for an unpriced position")
        terms.append(delta * price)  # type: ignore[operator]
    return math.fsum(terms)


def restructuring_turnover(
    w_old: Sequence[float], w_new: Sequence[float], prices_at_new: Sequence[float | None]
) -> float:
    """Dollar turnover of one SETF restructure."""
    return absolute_turnover(w_old, w_new, prices_at_new)


class SetfBook:
    """The SETFs of one universe and the weights they held over time.

    Price rows are indexed by day number on the run's trading-day axis.
    Days before the first restructure are priced with the first
    restructure's weights. Computed SETF prices are memoized per day, so a
    day must not be priced before its own restructure has been applied.

    Example:
        >>> book = SetfBook(universe, tickers)
        >>> book.restructure(0, price_rows[0], dates[0])
        0.0
        >>> book.prices(0, price_rows[0])
        array([...])
    """

    def __init__(self, universe: SectorUniverse, tickers: Sequence[str]) -> None:
        """Create one SETF per sector, constituents in ``tickers`` order.

        Args:
            universe: Sector assignments
            tickers: Column order of the price rows passed to this book
        """
        column = {ticker: j for j, ticker in enumerate(tickers)}
        members: dict[str, list[str]] = {}
        for ticker in tickers:
            members.setdefault(universe.assignments[ticker], []).append(ticker)
        self.labels: list[str] = sorted(members)
        self.etfs: list[SyntheticEtf] = [
            SyntheticEtf.create(label, members[label]) for label in self.labels
        ]
        self._columns: list[list[int]] = [
            [column[t] for t in etf.constituents] for etf in self.etfs
        ]
        self._history: list[tuple[int, list[SyntheticEtf]]] = []
        self._memo: dict[int, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self.etfs)

    @property
    def restructured(self) -> bool:
        return bool(self._history)

    def _constituent_prices(self, sector: int, row: np.ndarray) -> list[float]:
        return [float(row[j]) for j in self._columns[sector]]

    def restructure(self, day: int, row: np.ndarray, date: pd.Timestamp) -> float:
        """Restructure every SETF on ``day`` and return the summed turnover.

        The first restructure of a run has zero turnover, and so has the
        first weighting of a sector. Unpriced constituents are excluded and
        re-enter once priced; a sector with no priced constituent stays
        unweighted, priced NaN, until one is priced.
        """
        turnover = 0.0
        updated = []
        for sector, etf in enumerate(self.etfs):
            prices = self._constituent_prices(sector, row)
            if not any(_is_priced(p) for p in prices):
                logger.debug(
                    "Sector has no priced constituent",
                    sector=etf.sector_label,
                    date=date.date().isoformat(),
                )
                updated.append(etf)
                continue
            fresh = restructure(etf, prices, date, allow_missing=True)
            if self.restructured and etf.weighted:
                turnover += restructuring_turnover(etf.weights, fresh.weights, prices)
            updated.append(fresh)
        self.etfs = updated
        self._history.append((day, list(updated)))
        self._memo = {d: p for d, p in self._memo.items() if d < day}
        logger.debug("Restructured SETFs", date=date.date().isoformat(), turnover=turnover)
        return turnover

    def etfs_on(self, day: int) -> list[SyntheticEtf]:
        """SETF states in force on ``day``."""
        if not self._history:
            raise InvalidArgumentError("SETF book has not been restructured yet")
        active = self._history[0][1]
        for start, etfs in self._history:
            if start > day:
                break
            active = etfs
        return active

    def prices(self, day: int, row: np.ndarray) -> np.ndarray:
        """SETF prices on ``day``; NaN for an unweighted SETF or an unpriced weighted constituent."""
        cached = self._memo.get(day)
        if cached is not None:
            return cached
        values = np.empty(len(self.etfs))
        for sector, etf in enumerate(self.etfs_on(day)):
            if not etf.weighted:
                values[sector] = math.nan
                continue
            try:
                values[sector] = etf_price(etf, self._constituent_prices(sector, row))
            except MissingPriceError:
                values[sector] = math.nan
        self._memo[day] = values
        return values

    def price_history(self, first: int, last: int, rows: np.ndarray) -> np.ndarray:
        """SETF prices for days ``first..last`` inclusive, shape (days, sectors)."""
        return np.array([self.prices(day, rows[day]) for day in range(first, last + 1)])


def setf_price_frame(dates: Sequence[pd.Timestamp], labels: Sequence[str], prices: np.ndarray) -> pd.DataFrame:
    """Long ``date,sector_label,price`` frame from a (days, sectors) array."""
    return pd.DataFrame(
        [
            (d.date().isoformat(), label, float(prices[i, s]))
            for i, d in enumerate(dates)
            for s, label in enumerate(labels)
        ],
        columns=["date", "sector_label", "price"],
    )

