"""Command-line interface for sectorlab."""

import asyncio
import json
import logging
from collections.abc import Callable, Iterator
from contextlib import contextmanager
from dataclasses import replace
from datetime import date, datetime
from pathlib import Path
from typing import Any

import click
import pandas as pd

from sectorlab import __version__
from sectorlab.backtest import LEDGER_SUFFIX, ShareMode, load_ledger
from sectorlab.config import EFFECTIVE_CONFIG_FILE, RunConfig, load_config_file, resolve_config, write_effective_config
from sectorlab.exceptions import InvalidArgumentError, MissingPriceError, SectorLabError
from sectorlab.files import write_frame
from sectorlab.hca import build_merge_tree, dump_merge_tree, euclidean_distances
from sectorlab.ingest import load_fundamentals, load_prices, load_universe, sector_distribution
from sectorlab.logging import (
    configure_logging,
    get_level_from_name,
    get_level_from_verbosity,
    get_logger,
)
from sectorlab.progress import create_progress_reporter
from sectorlab.ranking import (
    MAX_MEAN_SHARPE,
    MAX_TERMINAL_VALUE,
    ComparisonReport,
    RankingReport,
    compare,
    rank,
    score,
    write_comparison,
    write_ranking,
)
from sectorlab.runner import BacktestExecutor, BacktestJob, BacktestResults
from sectorlab.synthetic import DEFAULT_SEED, LAYOUTS, generate as generate_dataset, write_synthetic_dataset
from sectorlab.trading_calendar import TradingCalendar
from sectorlab.types import BENCHMARK, LINKAGE_ORDER, FundamentalsTable, PriceTable, SectorUniverse
from sectorlab.universes import build_search_space, transitions as build_transitions, write_search_space, write_transitions

logger = get_logger("sectorlab.cli")

LINKAGE_NAMES = [link.value for link in LINKAGE_ORDER]
ISO_DATE = click.DateTime(formats=["%Y-%m-%d"])


def logging_options(func: Callable[..., Any]) -> Callable[..., Any]:
    """Add -v, --log-level and --log-file to a command."""
    func = click.option(
        "--log-file", type=click.Path(dir_okay=False), default=None,
        help="Write logs to file (in addition to console)",
    )(func)
    func = click.option(
        "--log-level", type=click.Choice(["trace", "debug", "info", "warning", "error"]),
        default=None, help="Set log level explicitly (overrides -v)",
    )(func)
    func = click.option(
        "-v", "--verbose", count=True,
        help="Increase verbosity: -v=info, -vv=debug, -vvv=trace",
    )(func)
    return func


def setup_logging(
    verbose: int, log_level: str | None, log_file: str | None, output_format: str = "text"
) -> None:
    level = get_level_from_name(log_level) if log_level else get_level_from_verbosity(verbose)
    # JSON goes to stdout; keep the console quiet so it stays parseable
    console_level = logging.CRITICAL if output_format == "json" else level
    configure_logging(
        level=console_level,
        log_file=log_file,
        file_level=level if log_file else None,
        debug=level <= logging.DEBUG,
    )


@contextmanager
def reported_errors() -> Iterator[None]:
    """Turn sectorlab errors into a click error (exit code 1)."""
    try:
        yield
    except SectorLabError as e:
        raise click.ClickException(e.context.format_text()) from e


def _as_date(value: datetime | None) -> date | None:
    return value.date() if value is not None else None


def _run_config(
    config_file: str | None,
    base: Path | None = None,
    defaults: dict[str, Any] | None = None,
    **cli_values: Any,
) -> RunConfig:
    """Resolve CLI values over ``--config`` over ``base`` over ``defaults``.

    ``base`` is the effective config of an earlier run; its ``out`` is
    that run's directory and is not inherited.
    """
    file_values = dict(defaults or {})
    if base is not None and base.is_file():
        inherited = load_config_file(base)
        inherited.pop("out", None)
        file_values.update(inherited)
    if config_file:
        file_values.update(load_config_file(Path(config_file)))
    return resolve_config(file_values, cli_values)


def _with_fiscal_year(cfg: RunConfig, table: FundamentalsTable) -> RunConfig:
    """Pin an unset fiscal year to the latest one in ``table``."""
    if cfg.year is not None or cfg.all_years:
        return cfg
    return replace(cfg, year=table.latest_year())


def _calendar(cfg: RunConfig) -> TradingCalendar:
    return TradingCalendar.from_file(Path(cfg.holidays)) if cfg.holidays else TradingCalendar.default()


def _with_price_window(cfg: RunConfig, prices: PriceTable) -> RunConfig:
    """Fill an unset start or end with the first or last price date."""
    if not prices.dates:
        raise MissingPriceError("Price file has no rows")
    return replace(
        cfg,
        start=cfg.start or prices.dates[0].date(),
        end=cfg.end or prices.dates[-1].date(),
    )


def _require(cfg: RunConfig, *names: str) -> None:
    missing = [name for name in names if not getattr(cfg, name)]
    if missing:
        raise click.UsageError(f"Missing required setting(s): {', '.join(missing)}")


def _run_backtests(
    cfg: RunConfig,
    universes: list[SectorUniverse],
    prices: PriceTable,
    outdir: Path,
    output_format: str,
) -> BacktestResults:
    backtest_config = cfg.backtest_config()
    jobs = [BacktestJob(universe=u, config=backtest_config, outdir=outdir) for u in universes]
    executor = BacktestExecutor(
        parallel=cfg.parallel,
        progress_reporter=create_progress_reporter(cfg.progress, json_format=output_format == "json"),
    )
    return asyncio.run(executor.run(jobs, prices, _calendar(cfg)))


# Main CLI group
@click.group(invoke_without_command=True)
@click.option("--version", is_flag=True, help="Show version and exit")
@click.pass_context
def cli(ctx: click.Context, version: bool) -> None:
    """sectorlab - learned market-sector universes ranked by backtest."""
    if version:
        click.echo(f"sectorlab {__version__}")
        ctx.exit(0)
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


@cli.command()
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
              help="key=value or YAML config file")
@click.option("--fundamentals", default=None, help="Fundamentals CSV")
@click.option("--linkage", "-l", default=None, type=click.Choice(LINKAGE_NAMES),
              help="Linkage method")
@click.option("--year", type=int, default=None, help="Fiscal year (default: latest)")
@click.option("--out", "-o", default=None, help="Output directory (default: out)")
@logging_options
def cluster(
    config_file: str | None,
    fundamentals: str | None,
    linkage: str | None,
    year: int | None,
    out: str | None,
    verbose: int,
    log_level: str | None,
    log_file: str | None,
) -> None:
    """Build one merge tree and write its dendrogram CSV.

    Examples:
        sectorlab cluster --fundamentals fundamentals.csv -l complete
    """
    setup_logging(verbose, log_level, log_file)
    with reported_errors():
        cfg = _run_config(
            config_file,
            fundamentals=fundamentals,
            linkages=(linkage,) if linkage else None,
            year=year,
            out=out,
        )
        _require(cfg, "fundamentals")
        if len(cfg.linkages) != 1:
            raise click.UsageError("cluster needs exactly one linkage (--linkage)")
        table = load_fundamentals(Path(cfg.fundamentals))
        cfg = _with_fiscal_year(replace(cfg, all_years=False), table)
        features = table.for_year(cfg.year)
        tree = build_merge_tree(euclidean_distances(features), cfg.linkages[0])
        outdir = Path(cfg.out)
        path = dump_merge_tree(tree, outdir / f"{cfg.linkages[0]}_{cfg.year}_dendrogram.csv")
        write_effective_config(cfg, outdir)
    click.echo(f"Wrote {path}")


@cli.command()
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
              help="key=value or YAML config file")
@click.option("--fundamentals", default=None, help="Fundamentals CSV")
@click.option("--benchmark", default=None, help="Benchmark universe CSV (adds benchmark labels)")
@click.option("--linkage", "-l", "linkages", multiple=True, type=click.Choice(LINKAGE_NAMES),
              help="Linkage to include (repeatable, default: all four)")
@click.option("--k-min", type=int, default=None, help="Smallest sector count (default: 5)")
@click.option("--k-max", type=int, default=None, help="Largest sector count (default: 19)")
@click.option("--year", type=int, default=None, help="Fiscal year (default: latest)")
@click.option("--all-years", is_flag=True, help="One search space per fiscal year, in year subdirectories")
@click.option("--out", "-o", default=None, help="Output directory (default: out)")
@logging_options
def universes(
    config_file: str | None,
    fundamentals: str | None,
    benchmark: str | None,
    linkages: tuple[str, ...],
    k_min: int | None,
    k_max: int | None,
    year: int | None,
    all_years: bool,
    out: str | None,
    verbose: int,
    log_level: str | None,
    log_file: str | None,
) -> None:
    """Write every candidate universe: 4 linkages x k_min..k_max sector counts.

    Examples:
        sectorlab universes --fundamentals fundamentals.csv -o out

        sectorlab universes --fundamentals fundamentals.csv --k-min 7 --k-max 7

        sectorlab universes --config run.txt --all-years
    """
    setup_logging(verbose, log_level, log_file)
    with reported_errors():
        cfg = _run_config(
            config_file,
            fundamentals=fundamentals,
            benchmark=benchmark,
            linkages=linkages or None,
            k_min=k_min,
            k_max=k_max,
            year=year,
            all_years=True if all_years else None,
            out=out,
        )
        _require(cfg, "fundamentals")
        table = load_fundamentals(Path(cfg.fundamentals))
        cfg = _with_fiscal_year(cfg, table)
        outdir = Path(cfg.out)
        written = _write_universes(cfg, table, outdir)
        write_effective_config(cfg, outdir)
    click.echo(f"Wrote {written} universe file(s) to {outdir}")


def _write_universes(cfg: RunConfig, table: FundamentalsTable, outdir: Path) -> int:
    labels = load_universe(Path(cfg.benchmark)).assignments if cfg.benchmark else None
    if cfg.all_years:
        targets = [(y, outdir / str(y)) for y in table.years()]
    else:
        targets = [(cfg.year, outdir)]
    written = 0
    for year, target in targets:
        with logger.scope("Building search space", fiscal_year=year, outdir=target):
            space = build_search_space(
                table.for_year(year), cfg.linkages, (cfg.k_min, cfg.k_max), labels
            )
            written += len(write_search_space(space, target))
    return written


@cli.command()
@click.argument("universe_files", nargs=-1, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
              help="key=value or YAML config file")
@click.option("--prices", default=None, help="Daily prices CSV")
@click.option("--start", type=ISO_DATE, default=None, help="Backtest start (default: first price date)")
@click.option("--end", type=ISO_DATE, default=None, help="Backtest end (default: last price date)")
@click.option("--starting-capital", type=float, default=None, help="Starting cash in USD (default: 1e10)")
@click.option("--restructure-rule", default=None,
              help="SETF restructure trigger (third-friday, first-trading-day, nth-weekday:<n>:<day>)")
@click.option("--rebalance-rule", default=None, help="Portfolio rebalance trigger")
@click.option("--lookback", type=int, default=None, help="Prices per covariance estimate (default: 126)")
@click.option("--share-mode", type=click.Choice([m.value for m in ShareMode]), default=None,
              help="Whole or fractional shares (default: integer)")
@click.option("--risk-free-rate", type=float, default=None, help="Annual risk-free rate (default: 0)")
@click.option("--sharpe-window", type=int, default=None, help="Trading days per rolling Sharpe (default: 63)")
@click.option("--holidays", default=None, help="Holiday file (default: bundled US list)")
@click.option("--parallel", type=int, default=None, help="Universes backtested at once (default: 1)")
@click.option("--progress", is_flag=True, help="Show progress as universes complete")
@click.option("--format", "output_format", type=click.Choice(["text", "json"]), default="text",
              help="Output format")
@click.option("--out", "-o", default=None, help="Output directory (default: out)")
@logging_options
def backtest(
    universe_files: tuple[str, ...],
    config_file: str | None,
    prices: str | None,
    start: datetime | None,
    end: datetime | None,
    starting_capital: float | None,
    restructure_rule: str | None,
    rebalance_rule: str | None,
    lookback: int | None,
    share_mode: str | None,
    risk_free_rate: float | None,
    sharpe_window: int | None,
    holidays: str | None,
    parallel: int | None,
    progress: bool,
    output_format: str,
    out: str | None,
    verbose: int,
    log_level: str | None,
    log_file: str | None,
) -> None:
    """Backtest one or more universe files and write their ledgers.

    Examples:
        sectorlab backtest out/complete_17.csv out/benchmark.csv --prices prices.csv

        sectorlab backtest out/*_*.csv --prices prices.csv --parallel 4 --progress
    """
    setup_logging(verbose, log_level, log_file, output_format)
    with reported_errors():
        cfg = _run_config(
            config_file,
            universes=universe_files or None,
            prices=prices,
            start=_as_date(start),
            end=_as_date(end),
            starting_capital=starting_capital,
            restructure_rule=restructure_rule,
            rebalance_rule=rebalance_rule,
            lookback=lookback,
            share_mode=share_mode,
            risk_free_rate=risk_free_rate,
            sharpe_window=sharpe_window,
            holidays=holidays,
            parallel=parallel,
            progress=True if progress else None,
            out=out,
        )
        _require(cfg, "universes", "prices")
        price_table = load_prices(Path(cfg.prices))
        cfg = _with_price_window(cfg, price_table)
        selected = [load_universe(Path(p)) for p in cfg.universes]
        outdir = Path(cfg.out)
        results = _run_backtests(cfg, selected, price_table, outdir, output_format)
        write_effective_config(cfg, outdir)

    if output_format == "json":
        click.echo(json.dumps(_results_dict(results), indent=2))
    else:
        click.echo(_results_text(results))
    if not results.is_success():
        if output_format == "json":
            raise SystemExit(1)
        raise click.ClickException(f"{results.failed} universe(s) failed")


def _results_dict(results: BacktestResults) -> dict[str, Any]:
    return {
        "total": results.total,
        "successful": results.successful,
        "failed": results.failed,
        "universes": {
            key: {
                "success": o.success,
                "duration": round(o.duration, 3),
                **({"error": o.error_context or o.error} if not o.success else {}),
            }
            for key, o in results.outcomes.items()
        },
    }


def _results_text(results: BacktestResults) -> str:
    lines = [f"Backtested {results.successful}/{results.total} universe(s)"]
    for key, outcome in results.outcomes.items():
        if outcome.success and outcome.ledger is not None:
            lines.append(f"  {key}: terminal value {outcome.ledger.values[-1]:,.2f}")
        else:
            lines.append(f"  {key}: FAILED {outcome.error}")
    return "\n".join(lines)


@cli.command("rank")
@click.argument("ledger_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
              help="key=value or YAML config file")
@click.option("--format", "output_format", type=click.Choice(["text", "json"]), default="text",
              help="Output format")
@click.option("--out", "-o", default=None, help="Output directory (default: LEDGER_DIR)")
@logging_options
def rank_command(
    ledger_dir: str,
    config_file: str | None,
    output_format: str,
    out: str | None,
    verbose: int,
    log_level: str | None,
    log_file: str | None,
) -> None:
    """Rank every ``*_ledger.csv`` in LEDGER_DIR by the four metrics.

    The effective config the backtest left in LEDGER_DIR, if any, is the
    base of the one written next to the ranking.

    Examples:
        sectorlab rank out --format json
    """
    setup_logging(verbose, log_level, log_file, output_format)
    with reported_errors():
        cfg = _run_config(
            config_file,
            base=Path(ledger_dir) / EFFECTIVE_CONFIG_FILE,
            defaults={"out": ledger_dir},
            ledgers=(ledger_dir,),
            out=out,
        )
        paths = sorted(Path(ledger_dir).glob(f"*{LEDGER_SUFFIX}"))
        if not paths:
            raise InvalidArgumentError(f"No ledger files in {ledger_dir}", source=ledger_dir)
        report = rank(score(load_ledger(p), strict=False) for p in paths)
        outdir = Path(cfg.out)
        write_ranking(report, outdir)
        write_effective_config(cfg, outdir)
    if output_format == "json":
        click.echo(json.dumps(report.to_dict(), indent=2))
    else:
        click.echo(report.format_text())


@cli.command("compare")
@click.argument("ledger_a", type=click.Path(exists=True, dir_okay=False))
@click.argument("ledger_b", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
              help="key=value or YAML config file")
@click.option("--starting-capital", type=float, default=None,
              help="Outperformance denominator (default: starting capital of LEDGER_B's run, 1e10)")
@click.option("--format", "output_format", type=click.Choice(["text", "json"]), default="text",
              help="Output format")
@click.option("--out", "-o", default=None, help="Output directory (default: out)")
@logging_options
def compare_command(
    ledger_a: str,
    ledger_b: str,
    config_file: str | None,
    starting_capital: float | None,
    output_format: str,
    out: str | None,
    verbose: int,
    log_level: str | None,
    log_file: str | None,
) -> None:
    """Compare two ledgers of the same window and write the panel CSVs.

    Settings not given come from the effective config next to LEDGER_B.

    Examples:
        sectorlab compare out/complete_17_ledger.csv out/benchmark_ledger.csv
    """
    setup_logging(verbose, log_level, log_file, output_format)
    with reported_errors():
        cfg = _run_config(
            config_file,
            base=Path(ledger_b).parent / EFFECTIVE_CONFIG_FILE,
            ledgers=(ledger_a, ledger_b),
            starting_capital=starting_capital,
            out=out,
        )
        a, b = load_ledger(Path(ledger_a)), load_ledger(Path(ledger_b))
        report = compare(
            (score(a, strict=False), a), (score(b, strict=False), b), cfg.starting_capital
        )
        outdir = Path(cfg.out)
        write_comparison(report, outdir)
        write_effective_config(cfg, outdir)
    if output_format == "json":
        click.echo(json.dumps(report.to_dict(), indent=2))
    else:
        click.echo(report.format_text())


@cli.command("transitions")
@click.argument("universe_a", type=click.Path(exists=True, dir_okay=False))
@click.argument("universe_b", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
              help="key=value or YAML config file")
@click.option("--out", "-o", default=None, help="Output directory (default: out)")
@logging_options
def transitions_command(
    universe_a: str,
    universe_b: str,
    config_file: str | None,
    out: str | None,
    verbose: int,
    log_level: str | None,
    log_file: str | None,
) -> None:
    """Count ticker flows from UNIVERSE_A's sectors into UNIVERSE_B's.

    Examples:
        sectorlab transitions out/benchmark.csv out/complete_17.csv
    """
    setup_logging(verbose, log_level, log_file)
    with reported_errors():
        cfg = _run_config(config_file, universes=(universe_a, universe_b), out=out)
        source, target = load_universe(Path(universe_a)), load_universe(Path(universe_b))
        table = build_transitions(source, target)
        outdir = Path(cfg.out)
        path = write_transitions(table, outdir / f"{source.key}_to_{target.key}_transitions.csv")
        write_effective_config(cfg, outdir)
    click.echo(f"{table.total} ticker(s) in {len(table.flows)} flow(s); wrote {path}")


@cli.command()
@click.argument("universe_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "output_format", type=click.Choice(["text", "json"]), default="text",
              help="Output format")
@click.option("--out", "-o", default=None, help="Also write <key>_distribution.csv here")
@logging_options
def distribution(
    universe_file: str,
    output_format: str,
    out: str | None,
    verbose: int,
    log_level: str | None,
    log_file: str | None,
) -> None:
    """Number of tickers per sector of a universe, largest first.

    Examples:
        sectorlab distribution data/benchmark.csv
    """
    setup_logging(verbose, log_level, log_file, output_format)
    with reported_errors():
        universe = load_universe(Path(universe_file))
        counts = sector_distribution(universe)
        if out:
            write_frame(
                _distribution_frame(counts),
                Path(out) / f"{universe.key}_distribution.csv",
            )
    if output_format == "json":
        click.echo(json.dumps(counts, indent=2))
        return
    width = max((len(label) for label in counts), default=0)
    click.echo(f"{universe.key}: {len(universe.assignments)} tickers in {len(counts)} sectors")
    for label, count in counts.items():
        click.echo(f"  {label:<{width}}  {count}")


def _distribution_frame(counts: dict[str, int]) -> pd.DataFrame:
    return pd.DataFrame(list(counts.items()), columns=["sector_label", "count"])


@cli.command("generate")
@click.option("--layout", type=click.Choice(list(LAYOUTS)), default=LAYOUTS[0],
              help="Synthetic layout")
@click.option("--seed", type=int, default=DEFAULT_SEED, help="Random seed")
@click.option("--tickers", "n_tickers", type=int, default=40, help="Number of companies (sectors layout)")
@click.option("--sectors", "n_sectors", type=int, default=4, help="Benchmark sectors (sectors layout)")
@click.option("--start", type=ISO_DATE, default="2012-01-01", help="First price date")
@click.option("--end", type=ISO_DATE, default="2017-12-31", help="Last price date")
@click.option("--out", "-o", default="data", help="Output directory")
@logging_options
def generate_command(
    layout: str,
    seed: int,
    n_tickers: int,
    n_sectors: int,
    start: datetime,
    end: datetime,
    out: str,
    verbose: int,
    log_level: str | None,
    log_file: str | None,
) -> None:
    """Write a seeded synthetic dataset: fundamentals, prices, benchmark.

    Examples:
        sectorlab generate -o data

        sectorlab generate --layout chain-outliers --seed 7 -o pooling
    """
    setup_logging(verbose, log_level, log_file)
    with reported_errors():
        dataset = generate_dataset(
            layout=layout,
            seed=seed,
            n_tickers=n_tickers,
            n_sectors=n_sectors,
            start=start.date(),
            end=end.date(),
        )
        paths = write_synthetic_dataset(dataset, Path(out))
    for name, path in paths.items():
        click.echo(f"{name}: {path}")


@cli.command()
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
              help="key=value or YAML config file")
@click.option("--fundamentals", default=None, help="Fundamentals CSV")
@click.option("--prices", default=None, help="Daily prices CSV")
@click.option("--benchmark", default=None, help="Benchmark universe CSV")
@click.option("--k-min", type=int, default=None, help="Smallest sector count (default: 5)")
@click.option("--k-max", type=int, default=None, help="Largest sector count (default: 19)")
@click.option("--year", type=int, default=None, help="Fiscal year (default: latest)")
@click.option("--start", type=ISO_DATE, default=None, help="Backtest start (default: first price date)")
@click.option("--end", type=ISO_DATE, default=None, help="Backtest end (default: last price date)")
@click.option("--share-mode", type=click.Choice([m.value for m in ShareMode]), default=None,
              help="Whole or fractional shares (default: integer)")
@click.option("--parallel", type=int, default=None, help="Universes backtested at once (default: 1)")
@click.option("--progress", is_flag=True, help="Show progress as universes complete")
@click.option("--format", "output_format", type=click.Choice(["text", "json"]), default="text",
              help="Output format")
@click.option("--out", "-o", default=None, help="Output directory (default: out)")
@logging_options
def pipeline(
    config_file: str | None,
    fundamentals: str | None,
    prices: str | None,
    benchmark: str | None,
    k_min: int | None,
    k_max: int | None,
    year: int | None,
    start: datetime | None,
    end: datetime | None,
    share_mode: str | None,
    parallel: int | None,
    progress: bool,
    output_format: str,
    out: str | None,
    verbose: int,
    log_level: str | None,
    log_file: str | None,
) -> None:
    """Universes, backtests, ranking and benchmark comparison in one run.

    The max-mean-Sharpe universe (max terminal value when no Sharpe is
    defined) is compared with the benchmark, and the benchmark-to-optimum
    transition table is written.

    Examples:
        sectorlab pipeline --fundamentals data/fundamentals.csv \\
            --prices data/prices.csv --benchmark data/benchmark.csv -o out
    """
    setup_logging(verbose, log_level, log_file, output_format)
    with reported_errors():
        cfg = _run_config(
            config_file,
            fundamentals=fundamentals,
            prices=prices,
            benchmark=benchmark,
            k_min=k_min,
            k_max=k_max,
            year=year,
            start=_as_date(start),
            end=_as_date(end),
            share_mode=share_mode,
            parallel=parallel,
            progress=True if progress else None,
            out=out,
        )
        _require(cfg, "fundamentals", "prices", "benchmark")
        optimum, criterion, report, comparison = _run_pipeline(cfg, output_format)

    if output_format == "json":
        summary = {
            "optimum": optimum,
            "criterion": criterion,
            "ranking": report.to_dict(),
            "comparison": comparison.to_dict(),
        }
        click.echo(json.dumps(summary, indent=2))
    else:
        click.echo(f"Optimum: {optimum} ({criterion})")
        click.echo(report.format_text())
        click.echo(comparison.format_text())


def _run_pipeline(
    cfg: RunConfig, output_format: str
) -> tuple[str, str, RankingReport, ComparisonReport]:
    outdir = Path(cfg.out)
    table = load_fundamentals(Path(cfg.fundamentals))
    bench = load_universe(Path(cfg.benchmark))
    price_table = load_prices(Path(cfg.prices))
    cfg = _with_fiscal_year(_with_price_window(cfg, price_table), table)

    with logger.scope("Building search space", fiscal_year=cfg.year):
        space = build_search_space(
            table.for_year(cfg.year), cfg.linkages, (cfg.k_min, cfg.k_max), bench.assignments
        )
        write_search_space(space, outdir / "universes")

    with logger.performance("Pipeline backtests", universes=len(space) + 1):
        results = _run_backtests(
            cfg, [*space, bench], price_table, outdir / "ledgers", output_format
        )
    if results.failed:
        failed = [k for k, o in results.outcomes.items() if not o.success]
        raise SectorLabError(f"Backtest failed for {', '.join(failed)}")

    ledgers = results.ledgers()
    learned = {k: v for k, v in ledgers.items() if k != BENCHMARK}
    with logger.scope("Ranking universes", universes=len(learned)):
        report = rank(score(ledger, strict=False) for ledger in learned.values())
        write_ranking(report, outdir)

    criterion = MAX_MEAN_SHARPE if MAX_MEAN_SHARPE in report.winners else MAX_TERMINAL_VALUE
    optimum = report.winners[criterion].key
    comparison = compare(
        (score(ledgers[optimum], strict=False), ledgers[optimum]),
        (score(ledgers[BENCHMARK], strict=False), ledgers[BENCHMARK]),
        cfg.starting_capital,
    )
    write_comparison(comparison, outdir)

    optimum_universe = next(u for u in space if u.key == optimum)
    write_transitions(
        build_transitions(bench, optimum_universe),
        outdir / f"{BENCHMARK}_to_{optimum}_transitions.csv",
    )
    write_effective_config(cfg, outdir)
    return optimum, criterion, report, comparison


def main() -> None:
    """Package entry point for the sectorlab command-line interface."""
    cli()


if __name__ == "__main__":
    cli()
