"""Deterministic text output: 17-significant-digit floats in CSV and JSON."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    """Format a scalar for output files (floats with 17 significant digits)."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return format(x, ".17g")
    if x is None:
        return ""
    return str(x)


def _json_value(x, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(x, dict):
        if not x:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json_value(v, indent, level + 1)}" for k, v in x.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(x, (list, tuple, np.ndarray)):
        x = list(x)
        if not x:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in x):
            return "[" + ", ".join(_json_value(v, indent, level + 1) for v in x) + "]"
        return "[\n" + ",\n".join(pad + _json_value(v, indent, level + 1) for v in x) + "\n" + end + "]"
    if x is None:
        return "null"
    if isinstance(x, (bool, np.bool_, int, np.integer, float, np.floating)):
        return fmt(x)
    if isinstance(x, (complex, np.complexfloating)):
        return "[" + fmt(x.real) + ", " + fmt(x.imag) + "]"
    return json.dumps(str(x))


def dumps_json(obj, indent: int = 2) -> str:
    return _json_value(obj, indent, 0) + "\n"


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(dumps_json(obj))


def write_csv(path: str | Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
