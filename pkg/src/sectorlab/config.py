"""Run configuration: defaults, ``--config`` files and the echoed effective config.

Precedence is CLI flags > config file > built-in defaults. The resolved
configuration is written to the output directory as ``effective_config.txt``
in the same ``key=value`` form that ``--config`` reads, so the file alone
reproduces a run.
"""

import shlex
from collections.abc import Callable, Mapping
from dataclasses import asdict, dataclass, fields
from datetime import date
from pathlib import Path
from typing import Any

import yaml

from .backtest import BacktestConfig, ShareMode
from .exceptions import ConfigError, SectorLabError
from .files import atomic_write_text
from .logging import get_logger
from .trading_calendar import FIRST_TRADING_DAY, THIRD_FRIDAY, parse_trigger_rule
from .types import LINKAGE_ORDER, Linkage

logger = get_logger(__name__)

EFFECTIVE_CONFIG_FILE = "effective_config.txt"
YAML_SUFFIXES = (".yaml", ".yml")


@dataclass(frozen=True)
class RunConfig:
    """Fully explicit configuration of a sectorlab run.

    Attributes:
        fundamentals: Fundamentals CSV
        prices: Daily prices CSV
        benchmark: Benchmark universe CSV
        universes: Universe CSVs to backtest
        ledgers: Ledger CSVs or ledger directories to rank or compare
        out: Output directory
        linkages: Linkages of the search space
        k_min: Smallest sector count
        k_max: Largest sector count
        year: Fiscal year to cluster (latest when unset)
        all_years: Build a search space for every fiscal year present
        start: Backtest start date
        end: Backtest end date
        starting_capital: Starting cash, USD
        restructure_rule: SETF restructure trigger rule
        rebalance_rule: Portfolio rebalance trigger rule
        lookback: SETF price observations per covariance estimate
        share_mode: integer or fractional
        risk_free_rate: Annual risk-free rate
        sharpe_window: Trading days per rolling Sharpe window
        holidays: Holiday file (bundled US list when unset)
        parallel: Universes backtested at once
        progress: Show progress
    """

    fundamentals: str = ""
    prices: str = ""
    benchmark: str = ""
    universes: tuple[str, ...] = ()
    ledgers: tuple[str, ...] = ()
    out: str = "out"
    linkages: tuple[str, ...] = tuple(link.value for link in LINKAGE_ORDER)
    k_min: int = 5
    k_max: int = 19
    year: int | None = None
    all_years: bool = False
    start: date | None = None
    end: date | None = None
    starting_capital: float = 10_000_000_000.0
    restructure_rule: str = THIRD_FRIDAY
    rebalance_rule: str = FIRST_TRADING_DAY
    lookback: int = 126
    share_mode: str = ShareMode.INTEGER.value
    risk_free_rate: float = 0.0
    sharpe_window: int = 63
    holidays: str = ""
    parallel: int = 1
    progress: bool = False

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary for JSON/YAML serialization."""
        result = asdict(self)
        for key in ("start", "end"):
            if result[key] is not None:
                result[key] = result[key].isoformat()
        result["universes"] = list(self.universes)
        result["ledgers"] = list(self.ledgers)
        result["linkages"] = list(self.linkages)
        return result

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        """Create from a mapping, coercing every value to its field type.

        Raises:
            ConfigError: Unknown key or a value of the wrong type
        """
        _check_keys(data)
        values = {key: _coerce(key, value) for key, value in data.items()}
        config = cls(**values)
        config.validate()
        return config

    def validate(self) -> None:
        """Check cross-field constraints.

        Raises:
            ConfigError: An inconsistent or out-of-range value
        """
        if self.k_min < 1 or self.k_min > self.k_max:
            raise ConfigError(f"Invalid k range {self.k_min}..{self.k_max}")
        if self.parallel < 1:
            raise ConfigError(f"parallel must be at least 1, got {self.parallel}")
        for linkage in self.linkages:
            if linkage not in {link.value for link in Linkage}:
                raise ConfigError(f"Unknown linkage '{linkage}'")
        if self.share_mode not in {mode.value for mode in ShareMode}:
            raise ConfigError(f"Unknown share mode '{self.share_mode}'")
        for rule in (self.restructure_rule, self.rebalance_rule):
            try:
                parse_trigger_rule(rule)
            except SectorLabError as e:
                raise ConfigError(str(e)) from None

    def backtest_config(self) -> BacktestConfig:
        """The BacktestConfig part of this configuration.

        Raises:
            ConfigError: start or end is unset, or the values are invalid
        """
        if self.start is None or self.end is None:
            raise ConfigError("Backtest needs both start and end dates")
        try:
            return BacktestConfig(
                start=self.start,
                end=self.end,
                starting_capital=self.starting_capital,
                restructure_rule=self.restructure_rule,
                rebalance_rule=self.rebalance_rule,
                lookback=self.lookback,
                share_mode=ShareMode(self.share_mode),
                risk_free_rate=self.risk_free_rate,
                sharpe_window=self.sharpe_window,
            )
        except SectorLabError as e:
            raise ConfigError(str(e)) from None

    def format_text(self) -> str:
        """``key=value`` lines in field order, readable by load_config_file."""
        lines = []
        for key, value in self.to_dict().items():
            if value is None:
                text = ""
            elif isinstance(value, list):
                text = ",".join(value)
            elif isinstance(value, bool):
                text = "true" if value else "false"
            else:
                text = str(value)
            lines.append(f"{key}={shlex.quote(text) if text else ''}")
        return "\n".join(lines) + "\n"


FIELD_NAMES = tuple(f.name for f in fields(RunConfig))


def _to_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in {"true", "yes", "1", "on"}:
        return True
    if text in {"false", "no", "0", "off", ""}:
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _to_tuple(value: Any) -> tuple[str, ...]:
    if isinstance(value, list | tuple):
        return tuple(str(v).strip() for v in value)
    return tuple(part.strip() for part in str(value).split(",") if part.strip())


def _to_date(value: Any) -> date | None:
    if value is None or value == "":
        return None
    if isinstance(value, date):
        return value
    return date.fromisoformat(str(value).strip())


def _to_optional_int(value: Any) -> int | None:
    if value is None or value == "":
        return None
    return int(value)


_COERCE: dict[str, Callable[[Any], Any]] = {
    "fundamentals": str,
    "prices": str,
    "benchmark": str,
    "universes": _to_tuple,
    "ledgers": _to_tuple,
    "out": str,
    "linkages": _to_tuple,
    "k_min": int,
    "k_max": int,
    "year": _to_optional_int,
    "all_years": _to_bool,
    "start": _to_date,
    "end": _to_date,
    "starting_capital": float,
    "restructure_rule": str,
    "rebalance_rule": str,
    "lookback": int,
    "share_mode": str,
    "risk_free_rate": float,
    "sharpe_window": int,
    "holidays": str,
    "parallel": int,
    "progress": _to_bool,
}


def _check_keys(data: Mapping[str, Any]) -> None:
    unknown = sorted(set(data) - set(FIELD_NAMES))
    if unknown:
        raise ConfigError(f"Unknown configuration key(s): {', '.join(unknown)}")


def _coerce(key: str, value: Any) -> Any:
    try:
        return _COERCE[key](value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid value for {key}: {value!r} ({e})") from None


def load_config_file(path: Path) -> dict[str, Any]:
    """Read a ``--config`` file.

    ``key=value`` lines with shell quoting, ``#`` comments and blank lines;
    ``.yaml``/``.yml`` files hold a YAML mapping instead.

    Raises:
        ConfigError: Unreadable file, malformed line or unknown key
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}", source=str(path)) from None

    if path.suffix.lower() in YAML_SUFFIXES:
        data = yaml.safe_load(text) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {path} is not a YAML mapping", source=str(path))
        values = {str(k): v for k, v in data.items()}
    else:
        values = {}
        for number, line in enumerate(text.splitlines(), 1):
            try:
                tokens = shlex.split(line, comments=True)
            except ValueError as e:
                raise ConfigError(f"Malformed line: {e}", source=str(path), line=number) from None
            for token in tokens:
                key, sep, value = token.partition("=")
                if not sep:
                    raise ConfigError(
                        f"Expected key=value, got '{token}'", source=str(path), line=number
                    )
                values[key.strip()] = value

    _check_keys(values)
    logger.debug("Loaded config file", source=path, keys=len(values))
    return values


def resolve_config(
    file_values: Mapping[str, Any] | None = None,
    cli_values: Mapping[str, Any] | None = None,
) -> RunConfig:
    """Merge defaults, config-file values and CLI values (None means unset).

    Raises:
        ConfigError: Unknown key, bad value or inconsistent configuration
    """
    merged: dict[str, Any] = {}
    merged.update(file_values or {})
    merged.update({k: v for k, v in (cli_values or {}).items() if v is not None})
    return RunConfig.from_dict(merged)


def write_effective_config(config: RunConfig, outdir: Path) -> Path:
    """Write ``effective_config.txt`` into ``outdir``."""
    path = Path(outdir) / EFFECTIVE_CONFIG_FILE
    atomic_write_text(path, config.format_text())
    return path
