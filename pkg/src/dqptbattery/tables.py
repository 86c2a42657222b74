"""CSV and JSON serialization of sweep tables with exact float round trips."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .sweep import SweepResult


def format_float(x: float) -> str:
    """17 significant digits in scientific notation, e.g. ``5.0000000000000000e-1``."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    mantissa, exponent = f"{x:.16e}".split("e")
    return f"{mantissa}e{int(exponent)}"


def _json_value(x):
    x = float(x)
    return None if math.isnan(x) else (repr(x) if math.isinf(x) else x)


def _from_json(x):
    if x is None:
        return math.nan
    return float(x)


def table_meta(result: SweepResult, include_timing: bool = False) -> dict:
    meta = dict(result.meta)
    if not include_timing:
        meta.pop("wall_time", None)
    return meta


def to_csv(result: SweepResult) -> str:
    lines = [",".join(result.columns)]
    lines.extend(",".join(format_float(v) for v in row) for row in result.rows)
    return "\n".join(lines) + "\n"


def to_json(result: SweepResult, include_timing: bool = False) -> str:
    doc = {
        "columns": list(result.columns),
        "rows": [[_json_value(v) for v in row] for row in result.rows],
        "meta": table_meta(result, include_timing),
    }
    return json.dumps(doc, allow_nan=False) + "\n"


def write_table(result: SweepResult, fmt: str, path, include_timing: bool = False) -> Path:
    """Write ``result`` as ``csv`` or ``json`` to ``path`` (LF line endings)."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown table format {fmt!r}")
    path = Path(path)
    text = to_csv(result) if fmt == "csv" else to_json(result, include_timing)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def parse_csv(text: str) -> SweepResult:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ValueError("empty CSV document")
    columns = tuple(lines[0].split(",")) if lines[0] else ()
    rows = np.array([[float(v) for v in line.split(",")] for line in lines[1:]], dtype=float)
    return SweepResult(columns, rows.reshape(len(lines) - 1, len(columns)), {})


def parse_json(text: str) -> SweepResult:
    doc = json.loads(text)
    columns = tuple(doc["columns"])
    rows = np.array([[_from_json(v) for v in row] for row in doc["rows"]], dtype=float)
    return SweepResult(columns, rows.reshape(len(doc["rows"]), len(columns)), doc.get("meta", {}))


def read_table(path, fmt: str | None = None) -> SweepResult:
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".")
    text = path.read_text(encoding="utf-8")
    if fmt == "csv":
        return parse_csv(text)
    if fmt == "json":
        return parse_json(text)
    raise ValueError(f"unknown table format {fmt!r}")
