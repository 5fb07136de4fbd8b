"""Atomic file writes and the CSV float format shared by the outputs."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

__all__ = ["atomic_write_text", "write_csv", "read_csv", "fmt"]


def fmt(x) -> str:
    """Format a float with 17 significant digits (round-trips exactly)."""
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return "%.17g" % float(x)


def atomic_write_text(path, text: str) -> Path:
    """Write ``text`` to ``path`` via a temporary file and ``os.replace``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return atomic_write_text(path, buf.getvalue())


def read_csv(path):
    """Return ``(header, rows)`` with rows as lists of strings."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV file")
    return rows[0], rows[1:]
