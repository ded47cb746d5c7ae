"""Daily backtest of one sector universe.

Each trading day, in order:

1. prices are forward-filled onto the trading calendar;
2. on a restructure day every SETF's weights are recomputed;
3. on a rebalance day the GMV portfolio over SETFs is re-solved from the
   trailing ``lookback`` SETF prices;
4. on either event, once a portfolio exists, holdings are re-targeted to
   the flattened asset weights gamma = w * omega;
5. the portfolio is marked to market and the day is recorded.

A restructure is forced on the first day of the window. The first rebalance
waits until ``lookback`` SETF prices exist; days before the window start are
priced with the first restructure's weights. The portfolio is all cash
until then. A sector whose SETF lacks a full ``lookback`` of prices, such as
one made only of late listings, is held out of the portfolio at weight 0.
"""

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from datetime import date
from enum import StrEnum
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import (
    InsufficientHistoryError,
    InvalidArgumentError,
    MissingPriceError,
    SchemaError,
    SectorLabError,
)
from .files import write_frame
from .logging import StructuredLogger, get_logger
from .optimizer import log_return_covariance, rebalancing_turnover, solve_gmv
from .setf import SetfBook, setf_price_frame
from .trading_calendar import (
    FIRST_TRADING_DAY,
    THIRD_FRIDAY,
    TradingCalendar,
    build_schedule,
    parse_trigger_rule,
)
from .types import PriceTable, SectorUniverse

logger = get_logger(__name__)

TRADING_DAYS_PER_YEAR = 252

LEDGER_COLUMNS = [
    "date",
    "portfolio_value",
    "cash",
    "cum_setf_turnover",
    "cum_rebal_turnover",
    "rolling_sharpe",
]
POSITION_COLUMNS = ["date", "ticker", "shares"]
WEIGHT_COLUMNS = ["date", "sector_label", "weight"]
CONSTITUENT_COLUMNS = ["date", "sector_label", "ticker", "weight"]

LEDGER_SUFFIX = "_ledger.csv"
POSITIONS_SUFFIX = "_positions.csv"
WEIGHTS_SUFFIX = "_weights.csv"
SETF_PRICES_SUFFIX = "_setf_prices.csv"

# Below this per-day standard deviation a window counts as flat.
FLAT_RETURNS = 1e-14


class ShareMode(StrEnum):
    """How share targets are rounded."""

    INTEGER = "integer"
    FRACTIONAL = "fractional"


@dataclass(frozen=True)
class BacktestConfig:
    """Settings of one backtest run.

    Attributes:
        start: First day of the backtest window
        end: Last day of the backtest window
        starting_capital: Cash at the start, USD
        restructure_rule: SETF restructure trigger
        rebalance_rule: Portfolio rebalance trigger
        lookback: SETF price observations used per covariance estimate
        share_mode: Integer or fractional share targets
        risk_free_rate: Annual risk-free rate used by the Sharpe ratio
        sharpe_window: Trading days per rolling Sharpe window
    """

    start: date
    end: date
    starting_capital: float = 10_000_000_000.0
    restructure_rule: str = THIRD_FRIDAY
    rebalance_rule: str = FIRST_TRADING_DAY
    lookback: int = 126
    share_mode: ShareMode = ShareMode.INTEGER
    risk_free_rate: float = 0.0
    sharpe_window: int = 63

    def __post_init__(self) -> None:
        if not self.start < self.end:
            raise InvalidArgumentError(f"Backtest start {self.start} must be before end {self.end}")
        if not self.starting_capital > 0.0:
            raise InvalidArgumentError(f"Starting capital must be positive, got {self.starting_capital}")
        if self.lookback < 2:
            raise InvalidArgumentError(f"Lookback must be at least 2, got {self.lookback}")
        if self.sharpe_window < 3:
            raise InvalidArgumentError(f"Sharpe window must be at least 3, got {self.sharpe_window}")
        parse_trigger_rule(self.restructure_rule)
        parse_trigger_rule(self.rebalance_rule)
        object.__setattr__(self, "share_mode", ShareMode(self.share_mode))


@dataclass
class BacktestLedger:
    """Daily record of one backtest.

    Attributes:
        key: Universe key the ledger belongs to
        frame: One row per trading day with LEDGER_COLUMNS; undefined
            rolling Sharpe values are NaN
        positions: Share holdings per ticker after each trade
        weights: SETF weights of the portfolio after each rebalance
        setf_prices: SETF price of every sector, every day
        constituent_weights: SETF constituent weights after each restructure
        dropped: Universe tickers that had no price column
    """

    key: str
    frame: pd.DataFrame
    positions: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=POSITION_COLUMNS))
    weights: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=WEIGHT_COLUMNS))
    setf_prices: pd.DataFrame = field(
        default_factory=lambda: pd.DataFrame(columns=["date", "sector_label", "price"])
    )
    constituent_weights: pd.DataFrame = field(
        default_factory=lambda: pd.DataFrame(columns=CONSTITUENT_COLUMNS)
    )
    dropped: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def dates(self) -> list[str]:
        return [str(d) for d in self.frame["date"]]

    @property
    def values(self) -> np.ndarray:
        return self.frame["portfolio_value"].to_numpy(dtype=float)

    @property
    def trade_dates(self) -> list[str]:
        return sorted(set(self.positions["date"]))


@dataclass(frozen=True)
class ShareOrders:
    """Result of converting target weights into share positions."""

    targets: dict[str, float]
    deltas: dict[str, float]
    residual_cash: float


def flatten_weights(
    setf_weights: Mapping[str, Mapping[str, float]],
    portfolio_weights: Mapping[str, float],
) -> dict[str, float]:
    """True asset weights gamma_j = w_j * omega_i for ticker j in sector i.

    Raises:
        InvalidArgumentError: A ticker appears in two sectors, or a weighted
            sector has no SETF weights
    """
    gamma: dict[str, float] = {}
    for sector, omega in portfolio_weights.items():
        if sector not in setf_weights:
            raise InvalidArgumentError(f"No SETF weights for sector {sector}")
        for ticker, weight in setf_weights[sector].items():
            if ticker in gamma:
                raise InvalidArgumentError(f"Ticker {ticker} appears in more than one sector", ticker=ticker)
            gamma[ticker] = weight * omega
    return gamma


def to_share_orders(
    gamma: Mapping[str, float],
    portfolio_value: float,
    prices: Mapping[str, float],
    share_mode: ShareMode | str = ShareMode.INTEGER,
    current: Mapping[str, float] | None = None,
) -> ShareOrders:
    """Share targets floor(gamma * V / P) (or exact, in fractional mode).

    Whatever is not invested stays as cash.

    Raises:
        InvalidArgumentError: A weighted ticker has a non-positive price
    """
    share_mode = ShareMode(share_mode)
    current = current or {}
    targets: dict[str, float] = {}
    invested = []
    for ticker, weight in gamma.items():
        if weight == 0.0:
            targets[ticker] = 0.0
            continue
        price = prices.get(ticker, math.nan)
        if not price > 0.0:
            raise InvalidArgumentError(f"Cannot size {ticker} at price {price}", ticker=ticker)
        exact = weight * portfolio_value / price
        shares = float(math.floor(exact)) if share_mode is ShareMode.INTEGER else exact
        targets[ticker] = shares
        invested.append(shares * price)
    deltas = {t: targets[t] - current.get(t, 0.0) for t in targets}
    for ticker, held in current.items():
        if ticker not in targets:
            deltas[ticker] = -held
            targets[ticker] = 0.0
    return ShareOrders(targets=targets, deltas=deltas, residual_cash=portfolio_value - math.fsum(invested))


def rolling_sharpe(
    values: Sequence[float],
    window: int = 63,
    risk_free_rate: float = 0.0,
) -> list[float | None]:
    """Annualized Sharpe ratio over trailing windows of daily log-returns.

    The value on day t uses the ``window`` trading days ending at t, which is
    ``window - 1`` returns, so the first ``window - 1`` days have none. Flat
    windows have none either.

    Raises:
        InvalidArgumentError: window < 3 or a non-positive value
    """
    if window < 3:
        raise InvalidArgumentError(f"Sharpe window must be at least 3, got {window}")
    if any(not v > 0.0 for v in values):
        raise InvalidArgumentError("Portfolio values must be positive")
    # returns[i] is the log-return from day i to day i + 1
    returns = [math.log(values[t] / values[t - 1]) for t in range(1, len(values))]
    count = window - 1
    result: list[float | None] = [None] * len(values)
    for t in range(count, len(values)):
        sample = returns[t - count : t]
        mean = math.fsum(sample) / count
        deviation = math.sqrt(math.fsum((r - mean) ** 2 for r in sample) / (count - 1))
        if deviation < FLAT_RETURNS:
            continue
        annual_return = mean * TRADING_DAYS_PER_YEAR
        annual_volatility = deviation * math.sqrt(TRADING_DAYS_PER_YEAR)
        result[t] = (annual_return - risk_free_rate) / annual_volatility
    return result


def nested_value(
    portfolio_weights: Mapping[str, float],
    setf_weights: Mapping[str, Mapping[str, float]],
    prices_at_trade: Mapping[str, float],
    prices_now: Mapping[str, float],
    invested: float,
    cash: float = 0.0,
) -> float:
    """Portfolio-of-SETFs value since the last trade.

    cash + sum_i omega_i * sum_j w_j * (P_j,now / P_j,trade) * V_trade, where
    V_trade is the value invested at the last trade.
    """
    terms = []
    for sector, omega in portfolio_weights.items():
        for ticker, weight in setf_weights[sector].items():
            if weight == 0.0 or omega == 0.0:
                continue
            terms.append(omega * weight * prices_now[ticker] / prices_at_trade[ticker] * invested)
    return cash + math.fsum(terms)


def align_prices(
    prices: PriceTable, days: pd.DatetimeIndex, tickers: Sequence[str] | None = None
) -> pd.DataFrame:
    """Prices forward-filled onto ``days``; NaN before a ticker's first price."""
    frame = prices.frame if tickers is None else prices.frame[list(tickers)]
    combined = frame.reindex(frame.index.union(days)).ffill()
    return combined.reindex(days)


def _value(cash: float, shares: np.ndarray, row: np.ndarray) -> float:
    held = np.nonzero(shares)[0]
    return cash + math.fsum(shares[held] * row[held])


def run_backtest(
    universe: SectorUniverse,
    prices: PriceTable,
    cfg: BacktestConfig,
    cal: TradingCalendar | None = None,
) -> BacktestLedger:
    """Simulate ``universe`` over the configured window.

    Tickers without a price column are dropped with a warning.

    Raises:
        MissingPriceError: No universe ticker has prices
        InsufficientHistoryError: Prices start after the window start
        SolverError: The optimizer failed; the error carries the date
    """
    cal = cal or TradingCalendar.default()
    key = universe.key
    try:
        return _simulate(universe, prices, cfg, cal, key, get_logger(__name__, universe=key))
    except SectorLabError as e:
        if not e.context.universe:
            e.with_context(universe=key)
        raise


def _simulate(
    universe: SectorUniverse,
    prices: PriceTable,
    cfg: BacktestConfig,
    cal: TradingCalendar,
    key: str,
    log: StructuredLogger,
) -> BacktestLedger:
    columns = set(prices.tickers)
    tickers = [t for t in universe.tickers if t in columns]
    dropped = tuple(t for t in universe.tickers if t not in columns)
    if dropped:
        log.warning(
            "Dropping tickers without prices",
            count=len(dropped),
            tickers=",".join(dropped[:10]),
        )
    if not tickers:
        raise MissingPriceError(f"No ticker of universe {key} has prices")

    if prices.frame.empty or prices.frame.index[0].date() > cfg.start:
        first = prices.frame.index[0].date().isoformat() if not prices.frame.empty else "none"
        raise InsufficientHistoryError(
            f"Prices start at {first}, after backtest start {cfg.start.isoformat()}",
            date=cfg.start.isoformat(),
        )

    days = cal.trading_index(prices.frame.index[0].date(), cfg.end)
    start_day = int(days.searchsorted(pd.Timestamp(cfg.start)))
    if start_day >= len(days):
        raise InvalidArgumentError(f"No trading days between {cfg.start} and {cfg.end}")
    rows = align_prices(prices, days, tickers).to_numpy(dtype=float)

    schedule = build_schedule(
        cal, days[start_day].date(), cfg.end, cfg.restructure_rule, cfg.rebalance_rule
    )
    restructure_days = set(schedule.restructure_dates)
    rebalance_days = set(schedule.rebalance_dates)

    book = SetfBook(universe, tickers)
    labels = book.labels
    shares = np.zeros(len(tickers))
    cash = float(cfg.starting_capital)
    omega: np.ndarray | None = None
    cum_setf = 0.0
    cum_rebal = 0.0

    ledger_rows = []
    position_rows = []
    weight_rows = []
    constituent_rows = []
    setf_rows = []

    for day in range(start_day, len(days)):
        stamp = days[day]
        today = stamp.date()
        iso = today.isoformat()
        row = rows[day]
        trade = False

        if day == start_day or today in restructure_days:
            cum_setf += book.restructure(day, row, stamp)
            for etf in book.etfs:
                constituent_rows.extend(
                    (iso, etf.sector_label, t, w) for t, w in etf.weight_map().items()
                )
            trade = omega is not None

        if today in rebalance_days:
            first = day - cfg.lookback + 1
            history = book.price_history(first, day, rows) if first >= 0 else None
            investable = np.isfinite(history).all(axis=0) if history is not None else None
            if investable is None or not investable.any():
                log.debug("Rebalance deferred, lookback not filled", date=iso)
            else:
                if not investable.all():
                    log.debug(
                        "Sectors held out of the portfolio",
                        date=iso,
                        sectors=",".join(label for label, ok in zip(labels, investable, strict=True) if not ok),
                    )
                cov = log_return_covariance(history[:, investable], end_date=stamp)
                try:
                    solution = solve_gmv(cov)
                except SectorLabError as e:
                    raise e.with_context(date=iso)
                weights = np.zeros(len(labels))
                weights[investable] = solution.weights
                setf_now = book.prices(day, row)
                if omega is not None:
                    cum_rebal += rebalancing_turnover(omega, weights, setf_now)
                omega = weights
                weight_rows.extend((iso, label, float(w)) for label, w in zip(labels, omega, strict=True))
                log.debug("Rebalanced", date=iso, cum_rebal_turnover=cum_rebal)
                trade = True

        if trade and omega is not None:
            value = _value(cash, shares, row)
            gamma = flatten_weights(
                {etf.sector_label: etf.weight_map() for etf in book.etfs},
                dict(zip(labels, omega.tolist(), strict=True)),
            )
            held = {t: float(s) for t, s in zip(tickers, shares, strict=True) if s != 0.0}
            orders = to_share_orders(
                gamma,
                value,
                {t: float(p) for t, p in zip(tickers, row, strict=True)},
                cfg.share_mode,
                held,
            )
            shares = np.array([orders.targets.get(t, 0.0) for t in tickers])
            cash = orders.residual_cash
            position_rows.extend((iso, t, float(s)) for t, s in zip(tickers, shares, strict=True))

        value = _value(cash, shares, row)
        ledger_rows.append((iso, value, cash, cum_setf, cum_rebal))
        setf_rows.append(book.prices(day, row))
        log.trace("Marked to market", date=iso, value=value)

    if omega is None:
        log.warning("Portfolio never rebalanced, held cash for the whole window")

    frame = pd.DataFrame(ledger_rows, columns=LEDGER_COLUMNS[:-1])
    sharpe = rolling_sharpe(frame["portfolio_value"].tolist(), cfg.sharpe_window, cfg.risk_free_rate)
    frame["rolling_sharpe"] = [math.nan if s is None else s for s in sharpe]

    log.info(
        "Backtest complete",
        days=len(frame),
        terminal_value=frame["portfolio_value"].iloc[-1],
    )
    return BacktestLedger(
        key=key,
        frame=frame,
        positions=pd.DataFrame(position_rows, columns=POSITION_COLUMNS),
        weights=pd.DataFrame(weight_rows, columns=WEIGHT_COLUMNS),
        setf_prices=setf_price_frame(list(days[start_day:]), labels, np.array(setf_rows)),
        constituent_weights=pd.DataFrame(constituent_rows, columns=CONSTITUENT_COLUMNS),
        dropped=dropped,
    )


def ledger_paths(outdir: Path, key: str) -> dict[str, Path]:
    """Output file of each ledger table for universe ``key``."""
    outdir = Path(outdir)
    return {
        "frame": outdir / f"{key}{LEDGER_SUFFIX}",
        "positions": outdir / f"{key}{POSITIONS_SUFFIX}",
        "weights": outdir / f"{key}{WEIGHTS_SUFFIX}",
        "setf_prices": outdir / f"{key}{SETF_PRICES_SUFFIX}",
    }


def write_ledger(ledger: BacktestLedger, outdir: Path) -> list[Path]:
    """Write the ledger, positions, weights and SETF price CSVs of a run."""
    paths = ledger_paths(outdir, ledger.key)
    return [write_frame(getattr(ledger, name), path) for name, path in paths.items()]


def load_ledger(path: Path) -> BacktestLedger:
    """Read ``<key>_ledger.csv`` and whichever sibling tables exist.

    Raises:
        SchemaError: The ledger file lacks a required column
    """
    path = Path(path)
    key = path.name.removesuffix(LEDGER_SUFFIX)
    frame = pd.read_csv(path, dtype={"date": str})
    missing = [c for c in LEDGER_COLUMNS if c not in frame.columns]
    if missing:
        raise SchemaError(f"Ledger file lacks columns {missing}", source=str(path), column=missing[0])

    tables: dict[str, pd.DataFrame] = {}
    for name, sibling in ledger_paths(path.parent, key).items():
        if name != "frame" and sibling.exists():
            tables[name] = pd.read_csv(sibling, dtype={"date": str, "ticker": str, "sector_label": str})
    return BacktestLedger(key=key, frame=frame, **tables)
