"""Exception classes for sectorlab.

Provides structured exception types carrying the file, row, ticker or date
that caused the failure, plus actionable suggestions for the user.
"""

import re
from dataclasses import dataclass, field
from typing import Any


@dataclass
class ErrorContext:
    """Rich context for error diagnosis.

    Attributes:
        source: Input file the error refers to
        line: 1-based line number in the source file
        column: Column name in the source file
        ticker: Ticker symbol involved
        fiscal_year: Fiscal year involved
        date: Trading date involved (ISO-8601)
        universe: Universe key (e.g. "complete_17", "benchmark")
        error_type: Classification of error (e.g. "SchemaError")
        message: Human-readable error message
        suggestions: List of actionable suggestions
    """

    source: str = ""
    line: int | None = None
    column: str = ""
    ticker: str = ""
    fiscal_year: int | None = None
    date: str = ""
    universe: str = ""
    error_type: str = "Unknown"
    message: str = ""
    suggestions: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        result: dict[str, Any] = {
            "error_type": self.error_type,
            "message": self.message,
        }
        if self.source:
            result["source"] = self.source
        if self.line is not None:
            result["line"] = self.line
        if self.column:
            result["column"] = self.column
        if self.ticker:
            result["ticker"] = self.ticker
        if self.fiscal_year is not None:
            result["fiscal_year"] = self.fiscal_year
        if self.date:
            result["date"] = self.date
        if self.universe:
            result["universe"] = self.universe
        if self.suggestions:
            result["suggestions"] = self.suggestions
        return result

    def format_text(self) -> str:
        """Format as human-readable text."""
        lines = []

        if self.universe:
            lines.append(f"Error in universe '{self.universe}'")
        else:
            lines.append("Error")

        lines.append(f"  Type: {self.error_type}")
        lines.append(f"  Message: {self.message}")

        has_location = (
            self.source
            or self.line is not None
            or self.column
            or self.ticker
            or self.fiscal_year is not None
            or self.date
        )
        if has_location:
            lines.append("")
            lines.append("  Context:")
            if self.source:
                lines.append(f"    File: {self.source}")
            if self.line is not None:
                lines.append(f"    Line: {self.line}")
            if self.column:
                lines.append(f"    Column: {self.column}")
            if self.ticker:
                lines.append(f"    Ticker: {self.ticker}")
            if self.fiscal_year is not None:
                lines.append(f"    Fiscal Year: {self.fiscal_year}")
            if self.date:
                lines.append(f"    Date: {self.date}")

        if self.suggestions:
            lines.append("")
            lines.append("  Suggested Actions:")
            for i, suggestion in enumerate(self.suggestions, 1):
                lines.append(f"    {i}. {suggestion}")

        return "\n".join(lines)


class ErrorTypes:
    """Standard error type classifications."""

    SCHEMA_ERROR = "SchemaError"
    INVALID_VALUE = "InvalidValue"
    DUPLICATE_ENTRY = "DuplicateEntry"
    MISSING_PRICE = "MissingPrice"
    DIMENSION_MISMATCH = "DimensionMismatch"
    INVALID_ARGUMENT = "InvalidArgument"
    SOLVER_NONCONVERGENCE = "SolverNonConvergence"
    INSUFFICIENT_HISTORY = "InsufficientHistory"
    DEGENERATE_UNIVERSE = "DegenerateUniverse"
    WINDOW_MISMATCH = "WindowMismatch"
    UNIVERSE_MISMATCH = "UniverseMismatch"
    CONFIG_ERROR = "ConfigError"
    UNKNOWN = "Unknown"


ERROR_SUGGESTIONS: dict[str, list[str]] = {
    ErrorTypes.SCHEMA_ERROR: [
        "Check the header row of {source}",
        "Column names are lower-case with underscores (e.g. gross_profit)",
        "Regenerate a reference file with: sectorlab generate --out <dir>",
    ],
    ErrorTypes.INVALID_VALUE: [
        "Inspect line {line} of {source}",
        "Fundamentals must be finite numbers; prices must be positive",
    ],
    ErrorTypes.DUPLICATE_ENTRY: [
        "Remove the repeated row from {source}",
    ],
    ErrorTypes.MISSING_PRICE: [
        "Check that {ticker} has a price on or before {date}",
        "Extend the price file further back in time",
    ],
    ErrorTypes.INSUFFICIENT_HISTORY: [
        "Price data must start on or before the backtest start date",
        "Move --start later or supply earlier prices",
    ],
    ErrorTypes.SOLVER_NONCONVERGENCE: [
        "Increase the lookback window to stabilise the covariance estimate",
        "Run with -vvv to see the solver trace",
    ],
    ErrorTypes.DIMENSION_MISMATCH: [
        "Check that every input covers the same tickers in the same order",
    ],
    ErrorTypes.INVALID_ARGUMENT: [
        "Run the subcommand with --help to see valid ranges",
    ],
    ErrorTypes.DEGENERATE_UNIVERSE: [
        "Lengthen the backtest window or shorten --sharpe-window",
    ],
    ErrorTypes.WINDOW_MISMATCH: [
        "Backtest both universes with the same --start and --end",
    ],
    ErrorTypes.UNIVERSE_MISMATCH: [
        "Check that both universe files were built from the same fundamentals",
    ],
    ErrorTypes.CONFIG_ERROR: [
        "Check the keys in the --config file",
        "Run the subcommand with --help to list valid options",
    ],
}


def get_suggestions(error_type: str, /, **context: Any) -> list[str]:
    """Get suggestions for an error type with context substitution.

    Args:
        error_type: The error type classification
        **context: Variables for substitution (source, line, ticker, date, ...)

    Returns:
        List of actionable suggestions
    """
    templates = ERROR_SUGGESTIONS.get(error_type, [])
    suggestions = []
    for template in templates:
        try:
            suggestions.append(template.format(**context))
        except KeyError:
            suggestions.append(re.sub(r"\{[^}]+\}", "<value>", template))
    return suggestions


class SectorLabError(Exception):
    """Base exception for all sectorlab errors.

    Attributes:
        context: Rich error context for diagnosis
    """

    error_type = ErrorTypes.UNKNOWN

    def __init__(self, message: str, context: ErrorContext | None = None, **fields: Any):
        super().__init__(message)
        if context is None:
            context = ErrorContext(error_type=self.error_type, message=message)
            for key, value in fields.items():
                if hasattr(context, key) and value is not None:
                    setattr(context, key, value)
            format_args = {k: v for k, v in context.to_dict().items() if k != "suggestions"}
            context.suggestions = get_suggestions(self.error_type, **format_args)
        self.context = context

    def __reduce__(self) -> tuple[Any, ...]:
        # Keeps the context when errors cross a process boundary
        return (self.__class__, (self.args[0], self.context), self.__dict__)

    def with_context(self, **kwargs: Any) -> "SectorLabError":
        """Add context to this error."""
        for key, value in kwargs.items():
            if hasattr(self.context, key):
                setattr(self.context, key, value)
        return self


class SchemaError(SectorLabError):
    """Raised when an input file lacks a required column."""

    error_type = ErrorTypes.SCHEMA_ERROR


class DataValidationError(SectorLabError):
    """Raised when a cell holds a value the schema forbids."""

    error_type = ErrorTypes.INVALID_VALUE


class DuplicateEntryError(SectorLabError):
    """Raised on a repeated key: (ticker, fiscal_year), ticker, or date."""

    error_type = ErrorTypes.DUPLICATE_ENTRY


class MissingPriceError(SectorLabError):
    """Raised when a constituent has no usable price."""

    error_type = ErrorTypes.MISSING_PRICE


class DimensionMismatchError(SectorLabError):
    """Raised when vectors or matrices have incompatible shapes."""

    error_type = ErrorTypes.DIMENSION_MISMATCH


class InvalidArgumentError(SectorLabError):
    """Raised when an argument is outside its valid range."""

    error_type = ErrorTypes.INVALID_ARGUMENT


class SolverError(SectorLabError):
    """Raised when the portfolio optimizer fails to converge.

    Attributes:
        best_iterate: Best feasible weights found before giving up
    """

    error_type = ErrorTypes.SOLVER_NONCONVERGENCE

    def __init__(
        self,
        message: str,
        context: ErrorContext | None = None,
        best_iterate: Any = None,
        **fields: Any,
    ):
        super().__init__(message, context, **fields)
        self.best_iterate = best_iterate


class InsufficientHistoryError(SectorLabError):
    """Raised when price data does not reach back to the backtest start."""

    error_type = ErrorTypes.INSUFFICIENT_HISTORY


class DegenerateUniverseError(SectorLabError):
    """Raised when a ledger has no defined rolling Sharpe values."""

    error_type = ErrorTypes.DEGENERATE_UNIVERSE


class WindowMismatchError(SectorLabError):
    """Raised when two ledgers cover different backtest windows."""

    error_type = ErrorTypes.WINDOW_MISMATCH


class UniverseMismatchError(SectorLabError):
    """Raised when two universes share no tickers."""

    error_type = ErrorTypes.UNIVERSE_MISMATCH


class ConfigError(SectorLabError):
    """Raised when configuration values are missing or invalid."""

    error_type = ErrorTypes.CONFIG_ERROR
