"""Atomic output file writes.

Every CSV and config file sectorlab produces goes through here so a crashed
or interrupted run never leaves a half-written output behind.
"""

import os
import tempfile
from pathlib import Path

import pandas as pd


def atomic_write_text(path: Path, content: str) -> None:
    """Write text to a file atomically (temp file + fsync + rename).

    Args:
        path: Destination path; parent directories are created
        content: Full file contents
    """
    path.parent.mkdir(parents=True, exist_ok=True)

    fd, temp_path = tempfile.mkstemp(
        dir=path.parent,
        prefix=".sectorlab-",
        suffix=".tmp",
    )
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(content)
            f.flush()
            os.fsync(f.fileno())
        os.replace(temp_path, path)
    except Exception:
        try:
            os.unlink(temp_path)
        except OSError:
            pass
        raise


def frame_to_csv(frame: pd.DataFrame, index: bool = False) -> str:
    """Render a frame as CSV text with ``\\n`` line endings.

    Floats use Python's shortest round-trip repr, so the same numbers always
    produce the same bytes.
    """
    text: str = frame.to_csv(index=index, lineterminator="\n")
    return text


def write_frame(frame: pd.DataFrame, path: Path, index: bool = False) -> Path:
    """Write a frame as CSV atomically and return the path."""
    atomic_write_text(path, frame_to_csv(frame, index=index))
    return path
