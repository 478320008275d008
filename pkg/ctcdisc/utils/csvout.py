"""
Byte-stable CSV tables.

Floats are written with 17 significant digits, lines end with '\\n'.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
import csv
import io
import logging
import math
import os
from typing import Any, Optional

__all__ = ['format_value', 'table_str', 'write_table']

_logger = logging.getLogger(__package__)


def format_value(value: Any) -> str:
    """Format one cell. None is an empty cell."""
    if value is None:
        return ''
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float) or hasattr(value, 'dtype'):
        num = float(value)
        if num.is_integer() and not isinstance(value, float) and math.isfinite(num):
            return str(int(num))
        return '%.17g' % num     # pylint: disable=consider-using-f-string
    return str(value)


def table_str(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Return the table as CSV text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(header)
    width = len(header)
    for row in rows:
        if len(row) != width:
            raise ValueError(f"Row has {len(row)} cells, expected {width}")
        writer.writerow([format_value(cell) for cell in row])
    return buf.getvalue()


def write_table(
        path: str | os.PathLike[str],
        header: Sequence[str],
        rows: Iterable[Sequence[Any]],
        directory: Optional[str | os.PathLike[str]] = None,
        ) -> str:
    """Write a CSV file, return its path."""
    if directory is not None:
        os.makedirs(directory, exist_ok=True)
        path = os.path.join(directory, path)
    text = table_str(header, rows)
    with open(path, 'w', encoding='ascii', newline='') as out:
        out.write(text)
    _logger.debug("%d line(s) written to %s", text.count('\n'), path)
    return os.fspath(path)
