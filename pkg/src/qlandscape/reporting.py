"""Deterministic JSON and CSV report writers."""
from __future__ import annotations

import csv
import io
import json
import sys

import numpy as np

from .system import write_text_atomic


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, set):
        return sorted(_plain(v) for v in obj)
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    return obj


def to_json(result) -> str:
    return json.dumps(_plain(result), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def emit_report(result, fmt: str = "json", path=None) -> str:
    """Serialize ``result`` and write it to ``path`` (stdout when None).

    JSON has sorted keys and shortest round-trip floats; CSV floats use 17
    significant digits. ``result`` for CSV is an iterable of rows or an
    object with ``csv_rows()``.
    """
    if fmt == "json":
        text = to_json(result)
    elif fmt == "csv":
        rows = result.csv_rows() if hasattr(result, "csv_rows") else result
        text = to_csv(rows)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if path is None:
        sys.stdout.write(text)
    else:
        write_text_atomic(path, text)
    return text
