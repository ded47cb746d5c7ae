"""Progress reporting for multi-universe backtest runs.

Provides callback-based progress tracking, with text, NDJSON and rich
progress-bar renderings.
"""

import json
import sys
from abc import ABC, abstractmethod
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any

from rich.console import Console
from rich.progress import (
    BarColumn,
    Progress,
    SpinnerColumn,
    TaskID,
    TaskProgressColumn,
    TextColumn,
    TimeElapsedColumn,
)


@dataclass
class ProgressEvent:
    """A progress event during a run.

    Attributes:
        event_type: Type of event (run_start, universe_start, ...)
        universe: Universe key, or "*" for run-level events
        timestamp: When the event occurred
        details: Additional event-specific details
    """

    event_type: str
    universe: str
    timestamp: str
    details: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        result: dict[str, Any] = {
            "event": self.event_type,
            "universe": self.universe,
            "timestamp": self.timestamp,
        }
        result.update(self.details)
        return result

    def to_json(self) -> str:
        """Convert to JSON string (NDJSON format)."""
        return json.dumps(self.to_dict())


class ProgressReporter(ABC):
    """Base class for progress reporters."""

    @abstractmethod
    def on_run_start(self, total: int, stage: str) -> None:
        """Called when a run over ``total`` universes starts."""

    @abstractmethod
    def on_universe_start(self, universe: str) -> None:
        """Called when one universe's backtest starts."""

    @abstractmethod
    def on_universe_complete(
        self,
        universe: str,
        success: bool,
        duration: float,
        error: str | None = None,
    ) -> None:
        """Called when one universe's backtest completes."""

    @abstractmethod
    def on_run_complete(self, total: int, successful: int, failed: int, duration: float) -> None:
        """Called when the run completes."""


class JsonProgressReporter(ProgressReporter):
    """Reports progress as NDJSON (newline-delimited JSON) events."""

    def __init__(self, output: Any = None) -> None:
        """Initialize JSON progress reporter.

        Args:
            output: Output stream (defaults to sys.stderr to not pollute stdout)
        """
        self.output = output or sys.stderr

    def _emit(self, event_type: str, universe: str, **details: Any) -> None:
        event = ProgressEvent(
            event_type=event_type,
            universe=universe,
            timestamp=datetime.now(timezone.utc).isoformat(),
            details=details,
        )
        print(event.to_json(), file=self.output, flush=True)

    def on_run_start(self, total: int, stage: str) -> None:
        self._emit("run_start", "*", total=total, stage=stage)

    def on_universe_start(self, universe: str) -> None:
        self._emit("universe_start", universe)

    def on_universe_complete(
        self,
        universe: str,
        success: bool,
        duration: float,
        error: str | None = None,
    ) -> None:
        details: dict[str, Any] = {"success": success, "duration": round(duration, 3)}
        if error:
            details["error"] = error
        self._emit("universe_complete", universe, **details)

    def on_run_complete(self, total: int, successful: int, failed: int, duration: float) -> None:
        self._emit(
            "run_complete",
            "*",
            total=total,
            successful=successful,
            failed=failed,
            duration=round(duration, 3),
        )


class RichProgressReporter(ProgressReporter):
    """Shows a rich progress bar advancing once per finished universe."""

    def __init__(self, console: Console | None = None) -> None:
        self.console = console or Console(stderr=True)
        self.progress = Progress(
            SpinnerColumn(),
            TextColumn("[bold blue]{task.description}"),
            BarColumn(),
            TaskProgressColumn(),
            TimeElapsedColumn(),
            console=self.console,
            transient=True,
        )
        self._task: TaskID | None = None

    def on_run_start(self, total: int, stage: str) -> None:
        self.progress.start()
        self._task = self.progress.add_task(stage, total=total)

    def on_universe_start(self, universe: str) -> None:
        # Nothing to draw until the universe finishes
        pass

    def on_universe_complete(
        self,
        universe: str,
        success: bool,
        duration: float,
        error: str | None = None,
    ) -> None:
        if self._task is not None:
            self.progress.advance(self._task)
        if not success:
            self.console.print(f"[red]✗ {universe}[/red]: {error or 'failed'}")

    def on_run_complete(self, total: int, successful: int, failed: int, duration: float) -> None:
        self.progress.stop()
        if failed == 0:
            self.console.print(f"Completed: {successful}/{total} universes in {duration:.2f}s")
        else:
            self.console.print(
                f"Completed: {successful}/{total} universes, {failed} failed in {duration:.2f}s"
            )


class NullProgressReporter(ProgressReporter):
    """No-op progress reporter that discards all events."""

    def on_run_start(self, total: int, stage: str) -> None:
        pass

    def on_universe_start(self, universe: str) -> None:
        pass

    def on_universe_complete(
        self,
        universe: str,
        success: bool,
        duration: float,
        error: str | None = None,
    ) -> None:
        pass

    def on_run_complete(self, total: int, successful: int, failed: int, duration: float) -> None:
        pass


def create_progress_reporter(
    enabled: bool,
    json_format: bool = False,
    output: Any = None,
) -> ProgressReporter:
    """Create a progress reporter.

    Args:
        enabled: Whether progress reporting is enabled
        json_format: Use NDJSON events instead of a progress bar
        output: Output stream for NDJSON events (defaults to sys.stderr)
    """
    if not enabled:
        return NullProgressReporter()
    if json_format:
        return JsonProgressReporter(output)
    return RichProgressReporter()
