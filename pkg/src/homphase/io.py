"""Two-column trace files.

A trace file is plain text: ``#``-prefixed header lines, then two numeric
columns separated by whitespace, written with 17 significant digits so a
write/read cycle is bit-exact. Header lines of the form ``# key = value``
carry metadata; the keys read back are ``quantity``, ``x``, ``x_unit`` and
``y_unit``. Example::

    # quantity = visibility
    # x = delay
    # x_unit = ps
    # y_unit = 1
    # n_points = 1024
    -250 0
    -249.51171875 1.2e-30
    ...
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class TraceFormatError(ValueError):
    """A trace file could not be parsed."""

    def __init__(self, path: str | Path, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = Path(path)
        self.reason = reason


@dataclass(frozen=True)
class TraceFile:
    x: np.ndarray
    y: np.ndarray
    metadata: dict[str, str] = field(default_factory=dict)

    @property
    def x_unit(self) -> str:
        return self.metadata.get("x_unit", "")


def format_trace(x: np.ndarray, y: np.ndarray, metadata: dict[str, object]) -> str:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D arrays of equal length")
    lines = [f"# {k} = {v}" for k, v in metadata.items()]
    lines += [f"{a:.17g} {b:.17g}" for a, b in zip(x, y)]
    return "\n".join(lines) + "\n"


def write_trace(path: str | Path, x: np.ndarray, y: np.ndarray, /, **metadata) -> Path:
    """Write a two-column trace; ``metadata`` becomes ``# key = value`` header lines."""
    path = Path(path)
    path.write_text(format_trace(x, y, {"n_points": len(x), **metadata}))
    return path


def read_trace(path: str | Path) -> TraceFile:
    """Parse a trace file, raising :class:`TraceFormatError` on malformed content."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise TraceFormatError(path, f"cannot read file ({exc.strerror})") from exc
    metadata: dict[str, str] = {}
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if sep:
                metadata[key.strip()] = value.strip()
            continue
        parts = line.split()
        if len(parts) != 2:
            raise TraceFormatError(path, f"line {lineno}: expected two columns, found {len(parts)}")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise TraceFormatError(path, f"line {lineno}: non-numeric value") from None
    if not rows:
        raise TraceFormatError(path, "no data rows")
    data = np.array(rows)
    if not np.all(np.isfinite(data)):
        raise TraceFormatError(path, "non-finite value")
    return TraceFile(data[:, 0], data[:, 1], metadata)


def write_record(path: str | Path, fields: dict[str, object]) -> Path:
    """Flat ``key = value`` record, one field per line."""
    path = Path(path)
    lines = []
    for key, value in fields.items():
        if isinstance(value, float):
            value = f"{value:.17g}"
        lines.append(f"{key} = {value}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_record(path: str | Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        key, sep, value = line.partition("=")
        if sep and not line.lstrip().startswith("#"):
            out[key.strip()] = value.strip()
    return out
