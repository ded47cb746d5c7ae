"""Trading days and the monthly restructure/rebalance trigger schedules.

Trading days are weekdays that are not holidays. A trigger that lands on a
non-trading day rolls forward to the next trading day of the same month;
if none is left the trigger is skipped for that month.
"""

import calendar
import re
from dataclasses import dataclass
from datetime import date, timedelta
from importlib import resources
from pathlib import Path

import pandas as pd

from .exceptions import DataValidationError, InvalidArgumentError
from .logging import get_logger

logger = get_logger(__name__)

DEFAULT_HOLIDAY_RESOURCE = "data/us_holidays.txt"

WEEKDAYS = {"mon": 0, "tue": 1, "wed": 2, "thu": 3, "fri": 4}

THIRD_FRIDAY = "third-friday"
FIRST_TRADING_DAY = "first-trading-day"
_NTH_WEEKDAY = re.compile(r"^nth-weekday:(?P<n>[1-5]):(?P<day>mon|tue|wed|thu|fri)$")


def _parse_holiday_lines(lines: list[str], source: str) -> frozenset[date]:
    holidays = set()
    for number, raw in enumerate(lines, 1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        try:
            holidays.add(date.fromisoformat(text))
        except ValueError:
            raise DataValidationError(
                f"Invalid holiday date '{text}'", source=source, line=number
            ) from None
    return frozenset(holidays)


def load_holidays(path: Path) -> frozenset[date]:
    """Read a holiday file: one ISO-8601 date per line, ``#`` comments.

    Raises:
        DataValidationError: A line is not a valid date
    """
    path = Path(path)
    return _parse_holiday_lines(path.read_text().splitlines(), str(path))


@dataclass(frozen=True)
class TradingCalendar:
    """Weekdays minus a fixed set of holidays.

    Example:
        >>> cal = TradingCalendar.default()
        >>> len(cal.trading_days(date(2015, 1, 1), date(2015, 12, 31)))
        252
    """

    holidays: frozenset[date] = frozenset()

    @classmethod
    def default(cls) -> "TradingCalendar":
        """Calendar with the bundled US market holidays 2010-2018."""
        text = resources.files("sectorlab").joinpath(DEFAULT_HOLIDAY_RESOURCE).read_text()
        return cls(_parse_holiday_lines(text.splitlines(), DEFAULT_HOLIDAY_RESOURCE))

    @classmethod
    def from_file(cls, path: Path) -> "TradingCalendar":
        return cls(load_holidays(path))

    def is_trading_day(self, day: date) -> bool:
        return day.weekday() < 5 and day not in self.holidays

    def trading_index(self, start: date, end: date) -> pd.DatetimeIndex:
        """Trading days in [start, end] as a DatetimeIndex.

        Raises:
            InvalidArgumentError: start is after end
        """
        if start > end:
            raise InvalidArgumentError(f"Start {start} is after end {end}")
        return pd.bdate_range(start, end, freq="C", holidays=sorted(self.holidays))

    def trading_days(self, start: date, end: date) -> list[date]:
        """Trading days in [start, end], ascending."""
        return [ts.date() for ts in self.trading_index(start, end)]

    def roll_forward(self, day: date) -> date | None:
        """First trading day on or after ``day`` in the same month."""
        current = day
        while current.month == day.month:
            if self.is_trading_day(current):
                return current
            current += timedelta(days=1)
        return None


def _months(start: date, end: date) -> list[tuple[int, int]]:
    months = []
    year, month = start.year, start.month
    while (year, month) <= (end.year, end.month):
        months.append((year, month))
        year, month = (year + 1, 1) if month == 12 else (year, month + 1)
    return months


def _keep(cal: TradingCalendar, target: date, start: date, end: date) -> date | None:
    rolled = cal.roll_forward(target)
    if rolled is None:
        logger.warning(
            "Trigger skipped, no trading day left in month",
            month=f"{target.year}-{target.month:02d}",
        )
        return None
    return rolled if start <= rolled <= end else None


def nth_weekday_schedule(
    cal: TradingCalendar, start: date, end: date, n: int, weekday: int
) -> list[date]:
    """The ``n``-th ``weekday`` (0=Monday) of each month, rolled forward.

    Months without an ``n``-th such weekday are skipped.
    """
    if start > end:
        raise InvalidArgumentError(f"Start {start} is after end {end}")
    dates = []
    for year, month in _months(start, end):
        offset = (weekday - date(year, month, 1).weekday()) % 7
        day = 1 + offset + 7 * (n - 1)
        if day > calendar.monthrange(year, month)[1]:
            continue
        kept = _keep(cal, date(year, month, day), start, end)
        if kept is not None:
            dates.append(kept)
    return dates


def third_friday_schedule(cal: TradingCalendar, start: date, end: date) -> list[date]:
    """Third Friday of each month in the window, rolled forward on holidays."""
    return nth_weekday_schedule(cal, start, end, 3, WEEKDAYS["fri"])


def first_trading_day_schedule(cal: TradingCalendar, start: date, end: date) -> list[date]:
    """Earliest trading day of each month, kept when it falls in the window."""
    if start > end:
        raise InvalidArgumentError(f"Start {start} is after end {end}")
    dates = []
    for year, month in _months(start, end):
        kept = _keep(cal, date(year, month, 1), start, end)
        if kept is not None:
            dates.append(kept)
    return dates


@dataclass(frozen=True)
class TriggerRule:
    """A monthly trigger: first trading day, or the n-th given weekday."""

    text: str
    n: int | None = None
    weekday: int | None = None

    def dates(self, cal: TradingCalendar, start: date, end: date) -> list[date]:
        if self.n is None or self.weekday is None:
            return first_trading_day_schedule(cal, start, end)
        return nth_weekday_schedule(cal, start, end, self.n, self.weekday)


def parse_trigger_rule(text: str) -> TriggerRule:
    """Parse ``third-friday``, ``first-trading-day`` or ``nth-weekday:<n>:<day>``.

    Raises:
        InvalidArgumentError: Unknown rule
    """
    rule = text.strip().lower()
    if rule == THIRD_FRIDAY:
        return TriggerRule(rule, 3, WEEKDAYS["fri"])
    if rule == FIRST_TRADING_DAY:
        return TriggerRule(rule)
    match = _NTH_WEEKDAY.match(rule)
    if match:
        return TriggerRule(rule, int(match.group("n")), WEEKDAYS[match.group("day")])
    raise InvalidArgumentError(
        f"Unknown trigger rule '{text}' (expected {THIRD_FRIDAY}, {FIRST_TRADING_DAY} "
        "or nth-weekday:<1-5>:<mon..fri>)"
    )


@dataclass(frozen=True)
class TriggerSchedule:
    """Restructure and rebalance dates of one backtest window."""

    restructure_dates: tuple[date, ...]
    rebalance_dates: tuple[date, ...]


def build_schedule(
    cal: TradingCalendar,
    start: date,
    end: date,
    restructure_rule: str | TriggerRule = THIRD_FRIDAY,
    rebalance_rule: str | TriggerRule = FIRST_TRADING_DAY,
) -> TriggerSchedule:
    """Both trigger schedules for [start, end]."""
    if isinstance(restructure_rule, str):
        restructure_rule = parse_trigger_rule(restructure_rule)
    if isinstance(rebalance_rule, str):
        rebalance_rule = parse_trigger_rule(rebalance_rule)
    return TriggerSchedule(
        restructure_dates=tuple(restructure_rule.dates(cal, start, end)),
        rebalance_dates=tuple(rebalance_rule.dates(cal, start, end)),
    )
