"""CSV and manifest I/O with round-trip-exact number formatting."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

SIGNIFICANT_DIGITS = 17


def format_number(v) -> str:
    """17 significant digits for floats; integers, strings and ``None`` pass through."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float) or hasattr(v, "dtype"):
        f = float(v)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return format(f, f".{SIGNIFICANT_DIGITS}g")
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_number(v) for v in row])
    return buf.getvalue()


def write_csv(path: Path, header, rows) -> dict:
    """Write a CSV and return its manifest entry (relative name filled in by the caller)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    text = csv_text(header, rows)
    data = text.encode("utf-8")
    path.write_bytes(data)
    return {"sha256": hashlib.sha256(data).hexdigest(), "rows": text.count("\n") - 1}


def write_json(path: Path, obj) -> dict:
    path.parent.mkdir(parents=True, exist_ok=True)
    data = (json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n").encode("utf-8")
    path.write_bytes(data)
    return {"sha256": hashlib.sha256(data).hexdigest()}


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def read_csv(path: Path) -> tuple:
    """``(header, rows)`` with every cell as a string."""
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def parse_cell(s: str):
    """Inverse of :func:`format_number` for numeric cells; other text is returned unchanged."""
    if s == "":
        return None
    try:
        return float(s)
    except ValueError:
        return s
