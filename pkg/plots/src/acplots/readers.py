"""Artifact parsing with line-accurate error reporting."""

from __future__ import annotations

import csv
import json
from pathlib import Path


class ParseError(ValueError):
    """Malformed artifact; carries the offending path and line number."""

    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


def read_table(path):
    """CSV -> (header, columns dict of float lists). Raises ParseError."""
    path = Path(path)
    if not path.exists():
        raise ParseError(path, 0, "file not found")
    rows = []
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = None
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if header is None:
                header = [c.strip() for c in row]
                if not header or any(not h for h in header):
                    raise ParseError(path, lineno, "empty or unnamed header column")
                continue
            if len(row) != len(header):
                raise ParseError(
                    path, lineno, f"expected {len(header)} columns, found {len(row)}"
                )
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise ParseError(path, lineno, f"non-numeric value: {exc}") from None
    if header is None:
        raise ParseError(path, 1, "empty file: no header row")
    if not rows:
        raise ParseError(path, 2, "no data rows")
    cols = {h: [r[i] for r in rows] for i, h in enumerate(header)}
    return header, cols


def read_report(path):
    """JSON report -> dict. Raises ParseError with the failing line."""
    path = Path(path)
    if not path.exists():
        raise ParseError(path, 0, "file not found")
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, exc.msg) from None
