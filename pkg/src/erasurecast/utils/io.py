"""CSV and JSON helpers for the command-line front end.

Every CSV file written here starts with one comment line naming its schema
and version, e.g. ``# erasurecast uncoded-lp v1``, followed by the header
row. Floats are written with ``repr`` so values round-trip exactly.
"""

from __future__ import annotations

import csv
import io
import json
import os
import sys
from typing import IO, Any, Dict, Iterable, List, Mapping, Optional, Sequence

from erasurecast.utils.checks import RejectedInputException

__all__ = [
    "SCHEMA_VERSION",
    "format_value",
    "write_csv",
    "csv_text",
    "read_csv",
    "load_json",
    "open_output",
]

SCHEMA_VERSION = 1


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(
    stream: IO[str],
    schema: str,
    columns: Sequence[str],
    rows: Iterable[Mapping[str, Any]],
) -> None:
    """Write a versioned CSV table. Missing row keys are left empty and
    unknown keys are rejected."""
    stream.write(f"# erasurecast {schema} v{SCHEMA_VERSION}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        extra = set(row) - set(columns)
        if extra:
            raise RejectedInputException(
                "Row has columns outside schema {}: {}".format(schema, sorted(extra))
            )
        writer.writerow([format_value(row.get(c)) for c in columns])


def csv_text(schema: str, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> str:
    buffer = io.StringIO()
    write_csv(buffer, schema, columns, rows)
    return buffer.getvalue()


def read_csv(path: str) -> List[Dict[str, str]]:
    """Read a CSV written by :func:`write_csv`, skipping comment lines."""
    with open(path, newline="") as f:
        lines = [line for line in f if not line.startswith("#")]
    return list(csv.DictReader(lines))


def load_json(path: str) -> Dict[str, Any]:
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise RejectedInputException(f"Invalid JSON in {path}: {e}") from e
    if not isinstance(data, dict):
        raise RejectedInputException(f"{path} must contain a JSON object.")
    return data


class open_output:
    """Context manager yielding a text stream for `path`, or stdout for
    None and "-"."""

    def __init__(self, path: Optional[str]) -> None:
        self._path = path
        self._file: Optional[IO[str]] = None

    def __enter__(self) -> IO[str]:
        if self._path in (None, "-"):
            return sys.stdout
        directory = os.path.dirname(os.path.abspath(str(self._path)))
        os.makedirs(directory, exist_ok=True)
        self._file = open(str(self._path), "w", newline="")
        return self._file

    def __exit__(self, *exc: Any) -> None:
        if self._file is not None:
            self._file.close()
