"""Tests for scoring, ranking and comparing backtested universes."""

import logging
import math
from datetime import date

import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sectorlab.backtest import LEDGER_COLUMNS, BacktestConfig, BacktestLedger, run_backtest
from sectorlab.exceptions import DegenerateUniverseError, InvalidArgumentError, WindowMismatchError
from sectorlab.ranking import (
    MAX_MEAN_SHARPE,
    MAX_TERMINAL_VALUE,
    METRICS,
    MIN_REBAL_TURNOVER,
    MIN_SETF_TURNOVER,
    RANKING_FILE,
    WINNERS_FILE,
    UniverseScore,
    compare,
    rank,
    score,
    split_key,
    write_comparison,
    write_ranking,
)
from sectorlab.universes import build_search_space

DATES = ["2017-01-03", "2017-01-04", "2017-01-05", "2017-01-06"]


def _ledger(
    key: str,
    values: list[float],
    sharpe: list[float] | None = None,
    dates: list[str] | None = None,
) -> BacktestLedger:
    dates = dates or DATES[: len(values)]
    n = len(values)
    frame = pd.DataFrame(
        {
            "date": dates,
            "portfolio_value": values,
            "cash": [0.0] * n,
            "cum_setf_turnover": [float(i) for i in range(n)],
            "cum_rebal_turnover": [2.0 * i for i in range(n)],
            "rolling_sharpe": sharpe if sharpe is not None else [math.nan] * n,
        },
        columns=LEDGER_COLUMNS,
    )
    return BacktestLedger(key=key, frame=frame)


# key: (setf turnover, rebalance turnover, terminal value, mean Sharpe)
EIGHT = {
    "single_5": (10.0, 5.0, 100.0, 0.5),
    "complete_5": (3.0, 5.0, 120.0, 0.7),
    "average_5": (3.0, 7.0, 90.0, 0.9),
    "ward_5": (8.0, 2.0, 120.0, None),
    "single_6": (3.0, 2.0, 110.0, 0.9),
    "complete_6": (20.0, 9.0, 80.0, 0.1),
    "ward_7": (15.0, 2.0, 130.0, 0.2),
    "benchmark": (3.0, 1.0, 130.0, 0.9),
}
EIGHT_SCORES = [UniverseScore(key, *metrics) for key, metrics in EIGHT.items()]


class TestScore:
    """Tests for score."""

    def test_last_row(self):
        """Terminal metrics come from the last ledger row."""
        ledger = _ledger("ward_9", [1.0e10, 1.7e10, 2.5e10], sharpe=[math.nan, 1.0, 2.0])

        result = score(ledger)

        assert result.terminal_value == 2.5e10
        assert result.terminal_setf_turnover == 2.0
        assert result.terminal_rebal_turnover == 4.0
        assert result.mean_rolling_sharpe == 1.5
        assert (result.linkage, result.k) == ("ward", 9)

    def test_sharpe_never_defined(self):
        """A ledger without any Sharpe value is degenerate."""
        with pytest.raises(DegenerateUniverseError) as excinfo:
            score(_ledger("single_5", [1.0, 1.0]))

        assert excinfo.value.context.universe == "single_5"

    def test_sharpe_never_defined_lenient(self):
        """Non-strict scoring leaves the Sharpe metric unset."""
        assert score(_ledger("single_5", [1.0, 1.0]), strict=False).mean_rolling_sharpe is None

    def test_empty(self):
        """An empty ledger has no score."""
        with pytest.raises(InvalidArgumentError):
            score(_ledger("single_5", [], dates=[]))

    def test_from_backtest(self, small_dataset, calendar):
        """A real ledger scores to its last row and the mean of defined Sharpe values."""
        ledger = run_backtest(
            small_dataset.benchmark,
            small_dataset.prices,
            BacktestConfig(date(2017, 1, 1), date(2017, 6, 30)),
            calendar,
        )

        result = score(ledger)

        defined = ledger.frame["rolling_sharpe"].dropna()
        assert result.terminal_value == ledger.frame["portfolio_value"].iloc[-1]
        assert result.mean_rolling_sharpe == pytest.approx(defined.mean(), rel=1e-12)


class TestSplitKey:
    """Tests for split_key."""

    @pytest.mark.parametrize(
        ("key", "expected"),
        [("complete_17", ("complete", 17)), ("benchmark", ("benchmark", None)), ("ward_5", ("ward", 5))],
    )
    def test_split(self, key, expected):
        assert split_key(key) == expected


class TestRank:
    """Tests for rank."""

    def test_single_universe_wins_everything(self):
        """One universe wins all four metrics."""
        report = rank([UniverseScore("single_5", 1.0, 1.0, 1.0, 1.0)])

        assert {w.key for w in report.winners.values()} == {"single_5"}
        assert set(report.winners) == set(METRICS)

    def test_dominator_wins(self):
        """A universe better on every metric wins every metric."""
        good = UniverseScore("ward_9", 1.0, 1.0, 200.0, 2.0)
        bad = UniverseScore("single_5", 5.0, 5.0, 100.0, 1.0)

        report = rank([bad, good])

        assert all(w.key == "ward_9" for w in report.winners.values())

    def test_eight_universes(self, caplog):
        """Hand-ranked winners, ties and exclusions."""
        with caplog.at_level(logging.WARNING):
            report = rank(EIGHT_SCORES)

        winners = report.winners
        assert (winners[MIN_SETF_TURNOVER].key, winners[MIN_SETF_TURNOVER].ties) == (
            "complete_5",
            ("average_5", "single_6", "benchmark"),
        )
        assert (winners[MIN_REBAL_TURNOVER].key, winners[MIN_REBAL_TURNOVER].value) == ("benchmark", 1.0)
        assert (winners[MAX_TERMINAL_VALUE].key, winners[MAX_TERMINAL_VALUE].ties) == ("ward_7", ("benchmark",))
        assert (winners[MAX_MEAN_SHARPE].key, winners[MAX_MEAN_SHARPE].ties) == (
            "average_5",
            ("single_6", "benchmark"),
        )
        assert report.excluded == ("ward_5",)
        assert "excluded from Sharpe ranking" in caplog.text

    def test_order(self):
        """Scores are kept in k order, then linkage order, benchmark last."""
        keys = [s.key for s in rank(reversed(EIGHT_SCORES)).scores]

        assert keys == list(EIGHT)

    def test_winner_attains_extreme(self):
        """Every winner holds the extreme value of its metric."""
        report = rank(EIGHT_SCORES)

        for metric, winner in report.winners.items():
            values = [s.metric(metric) for s in EIGHT_SCORES if s.metric(metric) is not None]
            extreme = min(values) if metric.startswith("min") else max(values)
            assert winner.value == extreme
            assert winner.key in EIGHT

    def test_nothing_to_rank(self):
        with pytest.raises(InvalidArgumentError):
            rank([])

    @settings(max_examples=30, deadline=None)
    @given(order=st.permutations(EIGHT_SCORES))
    def test_permutation_invariant(self, order):
        """The report does not depend on input order."""
        assert rank(order).winners == rank(EIGHT_SCORES).winners

    def test_write(self, tmp_path):
        """The report and winners files are written with stable columns."""
        paths = write_ranking(rank(EIGHT_SCORES), tmp_path)

        assert [p.name for p in paths] == [RANKING_FILE, WINNERS_FILE]
        report = pd.read_csv(tmp_path / RANKING_FILE, keep_default_na=False)
        assert list(report.columns) == [
            "linkage",
            "k",
            "terminal_value",
            "terminal_setf_turnover",
            "terminal_rebal_turnover",
            "mean_rolling_sharpe",
        ]
        assert report["k"].iloc[-1] == ""
        winners = pd.read_csv(tmp_path / WINNERS_FILE, keep_default_na=False)
        assert winners["universe"].tolist() == ["complete_5", "benchmark", "ward_7", "average_5"]

    def test_text_and_dict(self):
        """Both renderings name every winner."""
        report = rank(EIGHT_SCORES)

        assert "ward_7" in report.format_text()
        assert report.to_dict()["winners"][MAX_TERMINAL_VALUE]["ties"] == ["benchmark"]
        assert report.to_dict()["excluded_from_sharpe"] == ["ward_5"]


class TestCompare:
    """Tests for compare and write_comparison."""

    def test_identical(self):
        """A universe against itself is the zero report."""
        ledger = _ledger("ward_9", [1.0, 2.0, 3.0], sharpe=[math.nan, 1.0, 0.5])
        s = score(ledger)

        report = compare((s, ledger), (s, ledger))

        assert all(d == 0.0 for d in report.deltas.values())
        assert report.value_ratio == 1.0
        assert report.outperformance == 0.0
        assert list(report.panels["portfolio_value"].columns) == ["date", "ward_9", "ward_9_b"]

    def test_outperformance(self):
        """2.5e10 against 1.0e10 on 1.0e10 capital is 150% outperformance."""
        a = _ledger("complete_17", [1.0e10, 2.5e10], sharpe=[math.nan, 1.0])
        b = _ledger("benchmark", [1.0e10, 1.0e10], sharpe=[math.nan, 0.25])

        report = compare((score(a), a), (score(b), b), starting_capital=1.0e10)

        assert report.outperformance == 1.5
        assert report.value_ratio == 2.5
        assert report.deltas[MAX_MEAN_SHARPE] == 0.75
        assert "150.00%" in report.format_text()

    def test_capital_defaults_to_first_value(self):
        """Without a capital the first value of b is used."""
        a = _ledger("complete_17", [2.0, 6.0], sharpe=[math.nan, 1.0])
        b = _ledger("benchmark", [2.0, 4.0], sharpe=[math.nan, 1.0])

        assert compare((score(a), a), (score(b), b)).outperformance == 1.0

    def test_undefined_sharpe_delta(self):
        """A missing Sharpe on either side leaves its delta undefined."""
        a = _ledger("complete_17", [1.0, 2.0], sharpe=[math.nan, 1.0])
        b = _ledger("benchmark", [1.0, 2.0])

        report = compare((score(a), a), (score(b, strict=False), b))

        assert report.deltas[MAX_MEAN_SHARPE] is None
        assert report.to_dict()["deltas"][MAX_MEAN_SHARPE] is None

    def test_window_mismatch(self):
        """Ledgers over different days cannot be compared."""
        a = _ledger("complete_17", [1.0, 2.0], sharpe=[math.nan, 1.0])
        b = _ledger("benchmark", [1.0, 2.0], sharpe=[math.nan, 1.0], dates=DATES[1:3])

        with pytest.raises(WindowMismatchError):
            compare((score(a), a), (score(b), b))

    def test_write(self, tmp_path):
        """A summary and one file per panel."""
        a = _ledger("complete_17", [1.0, 2.0], sharpe=[math.nan, 1.0])
        b = _ledger("benchmark", [1.0, 1.5], sharpe=[math.nan, 0.5])

        paths = write_comparison(compare((score(a), a), (score(b), b)), tmp_path)

        assert sorted(p.name for p in paths) == [
            "complete_17_vs_benchmark_portfolio_value.csv",
            "complete_17_vs_benchmark_rebal_turnover.csv",
            "complete_17_vs_benchmark_rolling_sharpe.csv",
            "complete_17_vs_benchmark_setf_turnover.csv",
            "complete_17_vs_benchmark_summary.csv",
        ]
        panel = pd.read_csv(tmp_path / "complete_17_vs_benchmark_portfolio_value.csv")
        assert panel["benchmark"].tolist() == [1.0, 1.5]


class TestPoolingCriterion:
    """Single linkage pools the chain layout into one low-turnover sector."""

    @pytest.fixture(scope="class")
    def k5_scores(self, chain_dataset, calendar):
        table = chain_dataset.fundamentals
        space = build_search_space(table.for_year(table.latest_year()), k_range=(5, 5))
        cfg = BacktestConfig(date(2016, 1, 4), date(2016, 12, 30), lookback=20)
        return {
            universe.key: score(run_backtest(universe, chain_dataset.prices, cfg, calendar))
            for universe in space
        }

    def test_single_has_least_setf_turnover(self, k5_scores):
        assert sorted(k5_scores) == ["average_5", "complete_5", "single_5", "ward_5"]
        single = k5_scores["single_5"].terminal_setf_turnover
        assert single > 0.0
        for key, universe_score in k5_scores.items():
            assert single <= universe_score.terminal_setf_turnover, key
        assert rank(k5_scores.values()).winners[MIN_SETF_TURNOVER].key == "single_5"
