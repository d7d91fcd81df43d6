"""Small deterministic file helpers shared by ingest, synth and the pipeline.

All writers emit byte-stable output for identical inputs: floats are
formatted with ``repr`` (shortest round-trip form), JSON keys keep
insertion order, and files are written atomically (temp file + rename).
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from pathlib import Path
from typing import Any, Iterable, Sequence

from .errors import MissingPropertyError

__all__ = [
    "fmt_value",
    "write_csv",
    "read_csv_strict",
    "write_json",
    "read_json",
    "sha256_file",
]


def fmt_value(value: Any) -> str:
    """Render a cell value for CSV output; empty string for missing."""
    if value is None:
        return ""
    # numpy scalars carry their own repr; unwrap before formatting
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        value = value.item()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str | os.PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([fmt_value(v) for v in row])
    os.replace(tmp, path)


def read_csv_strict(path: str | os.PathLike, expected_header: Sequence[str]) -> list[dict[str, str]]:
    """Read a CSV whose header must match ``expected_header`` exactly."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingPropertyError(f"{path}: empty file, expected header {','.join(expected_header)}")
        if header != list(expected_header):
            raise MissingPropertyError(
                f"{path}: header must be exactly '{','.join(expected_header)}', got '{','.join(header)}'"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise MissingPropertyError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            rows.append(dict(zip(header, row)))
    return rows


def write_json(path: str | os.PathLike, obj: Any) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, ensure_ascii=False, allow_nan=False)
        fh.write("\n")
    os.replace(tmp, path)


def read_json(path: str | os.PathLike) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def sha256_file(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
