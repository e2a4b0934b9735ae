"""Deterministic CSV emission: header row, comma separator, `.` decimals,
LF newlines, shortest round-trip float formatting (so re-parsing a file
reproduces the written float64 values bit for bit)."""
from __future__ import annotations

import csv
from pathlib import Path


def format_value(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, header: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")
    return path


def read_csv(path) -> tuple[list[str], list[list[float]]]:
    """Read a numeric CSV back; every cell is parsed as float."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(c) for c in row] for row in reader if row]
    return header, rows
