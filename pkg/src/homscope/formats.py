"""Byte-stable CSV, JSON and PGM writers.

Floats are printed with 17 significant digits so that values round-trip
exactly and output bytes do not depend on platform.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    x = float(value)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def write_table(path, columns: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(v) if not isinstance(v, str) else v for v in row])


def write_matrix(path, matrix) -> None:
    """One CSV row per image row; no header, since the values carry the units in the filename."""
    m = np.atleast_2d(np.asarray(matrix))
    with open(path, "w", newline="") as fh:
        for row in m:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def read_matrix(path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for line in csv.reader(fh):
            if line:
                rows.append([float(v) for v in line])
    if not rows:
        raise ValueError(f"{path}: empty matrix")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"{path}: ragged rows")
    return np.array(rows, dtype=float)


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def write_json(path, doc) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True, default=_json_default, allow_nan=True)
    Path(path).write_text(text + "\n")


def write_pgm16(path, matrix) -> None:
    """16-bit binary PGM, linearly scaled from the finite min..max; NaN maps to 0."""
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    finite = np.isfinite(m)
    out = np.zeros(m.shape, dtype=">u2")
    if finite.any():
        lo, hi = m[finite].min(), m[finite].max()
        span = hi - lo if hi > lo else 1.0
        out[finite] = np.round(1 + (m[finite] - lo) / span * 65534).astype(np.uint16)
    header = f"P5\n{m.shape[1]} {m.shape[0]}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + out.tobytes())
