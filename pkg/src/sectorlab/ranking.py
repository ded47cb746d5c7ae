"""Scoring, ranking and pairwise comparison of backtested universes."""

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import pandas as pd

from .backtest import BacktestLedger
from .exceptions import DegenerateUniverseError, InvalidArgumentError, WindowMismatchError
from .files import write_frame
from .ingest import UNIVERSE_FILE_PATTERN
from .logging import get_logger
from .types import LINKAGE_ORDER

logger = get_logger(__name__)

RANKING_FILE = "ranking_report.csv"
WINNERS_FILE = "winners.csv"

MIN_SETF_TURNOVER = "min_setf_turnover"
MIN_REBAL_TURNOVER = "min_rebal_turnover"
MAX_TERMINAL_VALUE = "max_terminal_value"
MAX_MEAN_SHARPE = "max_mean_sharpe"
METRICS = (MIN_SETF_TURNOVER, MIN_REBAL_TURNOVER, MAX_TERMINAL_VALUE, MAX_MEAN_SHARPE)

PANELS = {
    "setf_turnover": "cum_setf_turnover",
    "rebal_turnover": "cum_rebal_turnover",
    "portfolio_value": "portfolio_value",
    "rolling_sharpe": "rolling_sharpe",
}


def split_key(key: str) -> tuple[str, int | None]:
    """``complete_17`` -> ("complete", 17); ``benchmark`` -> ("benchmark", None)."""
    match = UNIVERSE_FILE_PATTERN.match(key)
    if match:
        return match.group("linkage"), int(match.group("k"))
    return key, None


@dataclass(frozen=True)
class UniverseScore:
    """End-of-run metrics of one universe.

    Attributes:
        key: Universe key, ``<linkage>_<k>`` or ``benchmark``
        terminal_setf_turnover: Cumulative SETF restructuring turnover, USD
        terminal_rebal_turnover: Cumulative portfolio rebalancing turnover, USD
        terminal_value: Portfolio value on the last day, USD
        mean_rolling_sharpe: Mean rolling Sharpe over days where it is defined;
            None if it is never defined
    """

    key: str
    terminal_setf_turnover: float
    terminal_rebal_turnover: float
    terminal_value: float
    mean_rolling_sharpe: float | None

    @property
    def linkage(self) -> str:
        return split_key(self.key)[0]

    @property
    def k(self) -> int | None:
        return split_key(self.key)[1]

    def order_key(self) -> tuple[int, int, int, str]:
        """Tie-break order: smaller k, then single < complete < average < ward.

        Universes without a k (the benchmark) sort last.
        """
        names = [link.value for link in LINKAGE_ORDER]
        linkage_rank = names.index(self.linkage) if self.linkage in names else len(names)
        k = self.k
        return (1 if k is None else 0, k or 0, linkage_rank, self.key)

    def metric(self, name: str) -> float | None:
        return {
            MIN_SETF_TURNOVER: self.terminal_setf_turnover,
            MIN_REBAL_TURNOVER: self.terminal_rebal_turnover,
            MAX_TERMINAL_VALUE: self.terminal_value,
            MAX_MEAN_SHARPE: self.mean_rolling_sharpe,
        }[name]


def score(ledger: BacktestLedger, key: str | None = None, strict: bool = True) -> UniverseScore:
    """Read terminal metrics off a ledger.

    Args:
        ledger: Complete ledger
        key: Universe key (defaults to the ledger's)
        strict: Raise if rolling Sharpe is never defined

    Raises:
        InvalidArgumentError: Empty ledger
        DegenerateUniverseError: No defined rolling Sharpe value (strict only)
    """
    key = key or ledger.key
    if len(ledger) == 0:
        raise InvalidArgumentError(f"Ledger of {key} is empty", universe=key)
    last = ledger.frame.iloc[-1]
    defined = [float(s) for s in ledger.frame["rolling_sharpe"] if not pd.isna(s)]
    if not defined and strict:
        raise DegenerateUniverseError(
            f"Rolling Sharpe is undefined on every day of {key}", universe=key
        )
    return UniverseScore(
        key=key,
        terminal_setf_turnover=float(last["cum_setf_turnover"]),
        terminal_rebal_turnover=float(last["cum_rebal_turnover"]),
        terminal_value=float(last["portfolio_value"]),
        mean_rolling_sharpe=math.fsum(defined) / len(defined) if defined else None,
    )


@dataclass(frozen=True)
class Winner:
    """Best universe for one metric, plus any universes tied with it."""

    metric: str
    key: str
    value: float
    ties: tuple[str, ...] = ()


@dataclass
class RankingReport:
    """All scores in tie-break order and the per-metric winners."""

    scores: list[UniverseScore]
    winners: dict[str, Winner] = field(default_factory=dict)
    excluded: tuple[str, ...] = ()

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                (
                    s.linkage,
                    "" if s.k is None else s.k,
                    s.terminal_value,
                    s.terminal_setf_turnover,
                    s.terminal_rebal_turnover,
                    s.mean_rolling_sharpe,
                )
                for s in self.scores
            ],
            columns=[
                "linkage",
                "k",
                "terminal_value",
                "terminal_setf_turnover",
                "terminal_rebal_turnover",
                "mean_rolling_sharpe",
            ],
        )

    def winners_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(w.metric, w.key, w.value, ";".join(w.ties)) for w in self.winners.values()],
            columns=["metric", "universe", "value", "ties"],
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "winners": {
                m: {"universe": w.key, "value": w.value, "ties": list(w.ties)}
                for m, w in self.winners.items()
            },
            "excluded_from_sharpe": list(self.excluded),
            "universes": len(self.scores),
        }

    def format_text(self) -> str:
        lines = [f"Ranked {len(self.scores)} universe(s)"]
        for metric, winner in self.winners.items():
            tie_text = f" (tied with {', '.join(winner.ties)})" if winner.ties else ""
            lines.append(f"  {metric}: {winner.key} = {winner.value:.6g}{tie_text}")
        if self.excluded:
            lines.append(f"  excluded from Sharpe ranking: {', '.join(self.excluded)}")
        return "\n".join(lines)


def _winner(metric: str, candidates: Sequence[UniverseScore], maximize: bool) -> Winner:
    values = [c.metric(metric) for c in candidates]
    best = max(values) if maximize else min(values)  # type: ignore[type-var]
    tied = [c for c, v in zip(candidates, values, strict=True) if v == best]
    assert best is not None
    return Winner(metric=metric, key=tied[0].key, value=best, ties=tuple(c.key for c in tied[1:]))


def rank(scores: Iterable[UniverseScore]) -> RankingReport:
    """Winners for minimal turnovers, maximal terminal value and mean Sharpe.

    Ties go to the smaller k, then the linkage order single < complete <
    average < ward. Universes whose Sharpe is never defined do not compete
    for the Sharpe metric.

    Raises:
        InvalidArgumentError: No scores
    """
    ordered = sorted(scores, key=UniverseScore.order_key)
    if not ordered:
        raise InvalidArgumentError("Nothing to rank")

    winners = {
        MIN_SETF_TURNOVER: _winner(MIN_SETF_TURNOVER, ordered, maximize=False),
        MIN_REBAL_TURNOVER: _winner(MIN_REBAL_TURNOVER, ordered, maximize=False),
        MAX_TERMINAL_VALUE: _winner(MAX_TERMINAL_VALUE, ordered, maximize=True),
    }
    excluded = tuple(s.key for s in ordered if s.mean_rolling_sharpe is None)
    if excluded:
        logger.warning(
            "Universes excluded from Sharpe ranking, rolling Sharpe never defined",
            universes=",".join(excluded),
        )
    sharpe_candidates = [s for s in ordered if s.mean_rolling_sharpe is not None]
    if sharpe_candidates:
        winners[MAX_MEAN_SHARPE] = _winner(MAX_MEAN_SHARPE, sharpe_candidates, maximize=True)
    return RankingReport(scores=ordered, winners=winners, excluded=excluded)


def write_ranking(report: RankingReport, outdir: Path) -> list[Path]:
    """Write ``ranking_report.csv`` and ``winners.csv``."""
    outdir = Path(outdir)
    return [
        write_frame(report.to_frame(), outdir / RANKING_FILE),
        write_frame(report.winners_frame(), outdir / WINNERS_FILE),
    ]


@dataclass
class ComparisonReport:
    """Metric deltas (a - b) and aligned daily panels of two universes.

    Attributes:
        a: Score of the first universe
        b: Score of the second universe
        deltas: a - b per metric; None where either side is undefined
        value_ratio: Terminal value of a over terminal value of b
        outperformance: (V_a - V_b) / starting capital
        panels: ``date,<a>,<b>`` frame per panel name
    """

    a: UniverseScore
    b: UniverseScore
    deltas: dict[str, float | None]
    value_ratio: float
    outperformance: float
    panels: dict[str, pd.DataFrame] = field(default_factory=dict)

    def summary_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(m, self.a.metric(m), self.b.metric(m), d) for m, d in self.deltas.items()]
            + [
                ("value_ratio", None, None, self.value_ratio),
                ("outperformance", None, None, self.outperformance),
            ],
            columns=["metric", self.a.key, _column_b(self.a.key, self.b.key), "delta"],
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "a": self.a.key,
            "b": self.b.key,
            "deltas": self.deltas,
            "value_ratio": self.value_ratio,
            "outperformance": self.outperformance,
        }

    def format_text(self) -> str:
        lines = [f"{self.a.key} vs {self.b.key}"]
        for metric, delta in self.deltas.items():
            lines.append(f"  {metric}: {'undefined' if delta is None else f'{delta:+.6g}'}")
        lines.append(f"  value ratio: {self.value_ratio:.6g}")
        lines.append(f"  outperformance: {self.outperformance:.2%} of starting capital")
        return "\n".join(lines)


def _column_b(key_a: str, key_b: str) -> str:
    return f"{key_b}_b" if key_a == key_b else key_b


def compare(
    a: tuple[UniverseScore, BacktestLedger],
    b: tuple[UniverseScore, BacktestLedger],
    starting_capital: float | None = None,
) -> ComparisonReport:
    """Compare two backtests of the same window.

    Args:
        a: Score and ledger of the first universe
        b: Score and ledger of the second universe
        starting_capital: Denominator of the outperformance; defaults to the
            first day's value of ``b``

    Raises:
        WindowMismatchError: The ledgers cover different days
    """
    score_a, ledger_a = a
    score_b, ledger_b = b
    if ledger_a.dates != ledger_b.dates:
        raise WindowMismatchError(
            f"Ledgers of {score_a.key} ({_window(ledger_a)}) and "
            f"{score_b.key} ({_window(ledger_b)}) cover different windows"
        )
    capital = starting_capital if starting_capital is not None else float(ledger_b.values[0])

    deltas: dict[str, float | None] = {}
    for metric in METRICS:
        va, vb = score_a.metric(metric), score_b.metric(metric)
        deltas[metric] = None if va is None or vb is None else va - vb

    column_b = _column_b(score_a.key, score_b.key)
    panels = {
        name: pd.DataFrame(
            {
                "date": ledger_a.dates,
                score_a.key: ledger_a.frame[column].to_numpy(),
                column_b: ledger_b.frame[column].to_numpy(),
            }
        )
        for name, column in PANELS.items()
    }
    return ComparisonReport(
        a=score_a,
        b=score_b,
        deltas=deltas,
        value_ratio=score_a.terminal_value / score_b.terminal_value,
        outperformance=(score_a.terminal_value - score_b.terminal_value) / capital,
        panels=panels,
    )


def _window(ledger: BacktestLedger) -> str:
    dates = ledger.dates
    return f"{dates[0]}..{dates[-1]}" if dates else "empty"


def write_comparison(report: ComparisonReport, outdir: Path) -> list[Path]:
    """Write one CSV per panel plus a summary, named ``<a>_vs_<b>_*.csv``."""
    outdir = Path(outdir)
    stem = f"{report.a.key}_vs_{report.b.key}"
    paths = [write_frame(report.summary_frame(), outdir / f"{stem}_summary.csv")]
    for name, panel in report.panels.items():
        paths.append(write_frame(panel, outdir / f"{stem}_{name}.csv"))
    return paths
