"""Tests for price-weighted synthetic ETFs."""

import math

import numpy as np
import pandas as pd
import pytest

from sectorlab.exceptions import DimensionMismatchError, InvalidArgumentError, MissingPriceError
from sectorlab.setf import (
    SetfBook,
    SyntheticEtf,
    etf_price,
    restructure,
    restructuring_turnover,
    setf_price_frame,
)

DAY = pd.Timestamp("2016-01-04")


def _etf(*tickers: str) -> SyntheticEtf:
    return SyntheticEtf.create("Alpha", tickers)


class TestRestructure:
    """Tests for restructure."""

    def test_price_share_weights(self):
        """Prices [1, 3] give weights [0.25, 0.75]."""
        etf = restructure(_etf("A", "B"), [1.0, 3.0], DAY)

        assert etf.weights == (0.25, 0.75)
        assert etf.last_restructure == DAY

    def test_single_constituent(self):
        """One constituent carries the whole weight."""
        assert restructure(_etf("A"), [42.0], DAY).weights == (1.0,)

    def test_matches_recomputation(self):
        """7 random prices give weights that sum to 1 and match p / sum(p)."""
        prices = np.random.default_rng(7).uniform(1.0, 500.0, size=7).tolist()

        etf = restructure(_etf(*"ABCDEFG"), prices, DAY)

        total = math.fsum(prices)
        for weight, price in zip(etf.weights, prices, strict=True):
            assert weight == pytest.approx(price / total, rel=0, abs=1e-15)
        assert math.fsum(etf.weights) == pytest.approx(1.0, abs=1e-12)

    def test_missing_price_names_ticker(self):
        """An unpriced constituent is an error unless allowed."""
        with pytest.raises(MissingPriceError) as excinfo:
            restructure(_etf("A", "B"), [1.0, None], DAY)

        assert excinfo.value.context.ticker == "B"
        assert excinfo.value.context.date == "2016-01-04"

    def test_missing_price_allowed(self):
        """With allow_missing the unpriced constituent gets weight 0."""
        etf = restructure(_etf("A", "B", "C"), [1.0, math.nan, 3.0], DAY, allow_missing=True)

        assert etf.weights == (0.25, 0.0, 0.75)

    def test_nothing_priced(self):
        """A sector with no priced constituent cannot be restructured."""
        with pytest.raises(MissingPriceError):
            restructure(_etf("A", "B"), [None, None], DAY, allow_missing=True)

    def test_non_positive_price(self):
        """Prices must be positive."""
        with pytest.raises(InvalidArgumentError):
            restructure(_etf("A", "B"), [1.0, 0.0], DAY)

    def test_length_mismatch(self):
        """One price per constituent."""
        with pytest.raises(DimensionMismatchError):
            restructure(_etf("A", "B"), [1.0], DAY)

    def test_no_constituents(self):
        """An empty sector has no SETF."""
        with pytest.raises(InvalidArgumentError):
            SyntheticEtf.create("Alpha", [])


class TestEtfPrice:
    """Tests for etf_price."""

    def test_dot_product(self):
        """Weights [0.25, 0.75] and prices [1, 3] price at 2.5."""
        etf = restructure(_etf("A", "B"), [1.0, 3.0], DAY)

        assert etf_price(etf, [1.0, 3.0]) == 2.5

    def test_single(self):
        """A one-constituent SETF prices at its constituent's price."""
        etf = restructure(_etf("A"), [42.0], DAY)

        assert etf_price(etf, [42.0]) == 42.0

    def test_stale_weights(self):
        """Weights stay fixed when prices move after the restructure."""
        etf = restructure(_etf("A", "B"), [1.0, 3.0], DAY)

        assert etf_price(etf, [2.0, 3.0]) == pytest.approx(0.25 * 2.0 + 0.75 * 3.0)

    def test_linear_in_prices(self):
        """Doubling every price doubles the SETF price."""
        rng = np.random.default_rng(8)
        etf = restructure(_etf(*"ABCDE"), rng.uniform(1, 100, 5).tolist(), DAY)
        prices = rng.uniform(1, 100, 5)

        assert etf_price(etf, (2 * prices).tolist()) == pytest.approx(2 * etf_price(etf, prices.tolist()))

    def test_never_restructured(self):
        """An ETF without weights cannot be priced."""
        with pytest.raises(InvalidArgumentError):
            etf_price(_etf("A"), [1.0])

    def test_unpriced_weighted_constituent(self):
        """A weighted constituent without a price is an error."""
        etf = restructure(_etf("A", "B"), [1.0, 3.0], DAY)

        with pytest.raises(MissingPriceError):
            etf_price(etf, [1.0, None])

    def test_unpriced_zero_weight_ignored(self):
        """A zero-weight constituent does not need a price."""
        etf = restructure(_etf("A", "B"), [2.0, None], DAY, allow_missing=True)

        assert etf_price(etf, [4.0, None]) == 4.0


class TestRestructuringTurnover:
    """Tests for restructuring_turnover."""

    def test_example(self):
        """[0.5, 0.5] -> [0.6, 0.4] at prices [10, 10] turns over 2.0."""
        assert restructuring_turnover([0.5, 0.5], [0.6, 0.4], [10.0, 10.0]) == pytest.approx(2.0)

    def test_unchanged(self):
        """Identical weights have zero turnover."""
        assert restructuring_turnover([0.2, 0.8], [0.2, 0.8], [5.0, 7.0]) == 0.0

    def test_matches_loop(self):
        """A random 5-asset case matches a plain loop."""
        rng = np.random.default_rng(9)
        old, new = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(5))
        prices = rng.uniform(1, 200, 5)

        expected = 0.0
        for i in range(5):
            expected += abs(new[i] - old[i]) * prices[i]

        actual = restructuring_turnover(old.tolist(), new.tolist(), prices.tolist())

        assert actual == pytest.approx(expected, rel=0, abs=1e-12)

    def test_length_mismatch(self):
        """Vectors must have equal length."""
        with pytest.raises(DimensionMismatchError):
            restructuring_turnover([1.0], [0.5, 0.5], [1.0, 1.0])


class TestSetfBook:
    """Tests for SetfBook."""

    @pytest.fixture
    def book(self, make_universe):
        universe = make_universe({"A": "Alpha", "B": "Alpha", "C": "Bravo"})
        return SetfBook(universe, ["A", "B", "C"])

    def test_one_etf_per_sector(self, book):
        """Sectors are sorted by label, constituents follow the column order."""
        assert len(book) == 2
        assert book.labels == ["Alpha", "Bravo"]
        assert book.etfs[0].constituents == ("A", "B")

    def test_first_restructure_is_free(self, book):
        """The first restructure of a run has zero turnover."""
        assert not book.restructured

        turnover = book.restructure(0, np.array([1.0, 3.0, 5.0]), DAY)

        assert turnover == 0.0
        assert book.restructured

    def test_prices_between_restructures(self, book):
        """Prices on later days use the weights in force on that day."""
        rows = np.array([[1.0, 3.0, 5.0], [2.0, 2.0, 6.0], [4.0, 4.0, 6.0]])
        book.restructure(0, rows[0], DAY)
        book.prices(1, rows[1])

        turnover = book.restructure(2, rows[2], DAY + pd.Timedelta(days=2))

        assert book.prices(1, rows[1]).tolist() == [0.25 * 2.0 + 0.75 * 2.0, 6.0]
        assert book.prices(2, rows[2]).tolist() == [4.0, 6.0]
        assert turnover == pytest.approx(0.25 * 4.0 + 0.25 * 4.0)

    def test_days_before_first_restructure(self, book):
        """Earlier days are priced with the first weights."""
        rows = np.array([[2.0, 2.0, 1.0], [1.0, 3.0, 5.0]])
        book.restructure(1, rows[1], DAY)

        assert book.etfs_on(0) is book.etfs_on(1)
        assert book.prices(0, rows[0])[0] == pytest.approx(2.0)

    def test_unrestructured_book(self, book):
        """Pricing needs weights."""
        with pytest.raises(InvalidArgumentError):
            book.prices(0, np.array([1.0, 1.0, 1.0]))

    def test_late_listing_reenters(self, book):
        """A constituent unpriced at one restructure joins at the next."""
        rows = np.array([[math.nan, 2.0, 5.0], [2.0, 2.0, 5.0]])
        book.restructure(0, rows[0], DAY)
        assert book.etfs[0].weights == (0.0, 1.0)

        turnover = book.restructure(1, rows[1], DAY + pd.Timedelta(days=1))

        assert book.etfs[0].weights == (0.5, 0.5)
        assert turnover == pytest.approx(0.5 * 2.0 + 0.5 * 2.0)

    def test_unpriced_sector_waits(self, book):
        """A sector with no priced constituent stays unweighted until one is priced."""
        rows = np.array([[1.0, 3.0, math.nan], [1.0, 3.0, 5.0]])

        assert book.restructure(0, rows[0], DAY) == 0.0
        assert not book.etfs[1].weighted
        assert book.etfs[1].weight_map() == {"C": 0.0}
        prices = book.prices(0, rows[0])
        assert prices[0] == pytest.approx(2.5)
        assert math.isnan(prices[1])

        turnover = book.restructure(1, rows[1], DAY + pd.Timedelta(days=1))

        assert turnover == 0.0
        assert book.etfs[1].weights == (1.0,)
        assert book.prices(1, rows[1]).tolist() == pytest.approx([2.5, 5.0])

    def test_price_history(self, book):
        """History rows are days, columns are sectors."""
        rows = np.array([[1.0, 1.0, 5.0], [2.0, 2.0, 6.0], [3.0, 3.0, 7.0]])
        book.restructure(0, rows[0], DAY)

        history = book.price_history(0, 2, rows)

        assert history.shape == (3, 2)
        assert history[:, 1].tolist() == [5.0, 6.0, 7.0]


def test_setf_price_frame():
    """The long frame has one row per (date, sector)."""
    dates = [pd.Timestamp("2016-01-04"), pd.Timestamp("2016-01-05")]

    frame = setf_price_frame(dates, ["Alpha", "Bravo"], np.array([[1.0, 2.0], [3.0, 4.0]]))

    assert list(frame.columns) == ["date", "sector_label", "price"]
    assert frame.iloc[2].tolist() == ["2016-01-05", "Alpha", 3.0]
