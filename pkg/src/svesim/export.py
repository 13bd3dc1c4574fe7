"""Deterministic text artifacts: RFC-4180 CSV with 17 significant digits and key/value summaries."""
import csv
import json
import math
from pathlib import Path

import numpy as np


def fmt(v):
    """Round-trippable text form of a number; integers and strings pass through."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.17g}"
    if v is None:
        return ""
    if isinstance(v, (dict, list, tuple)):
        return json.dumps(v, default=float)
    return str(v)


def write_csv(path, header, rows):
    """Write ``rows`` under ``header`` with CRLF line ends and minimal quoting."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_columns(path, columns):
    """Write a dict of equal-length 1-D arrays as columns."""
    names = list(columns)
    data = [np.asarray(columns[n]).ravel() for n in names]
    n = {d.size for d in data}
    if len(n) != 1:
        raise ValueError("columns must have equal length")
    return write_csv(path, names, zip(*data))


def write_ensemble(path, ensemble):
    """One row per path; the header holds the grid times ``t_1 .. t_N``."""
    header = [fmt(t) for t in ensemble.grid]
    return write_csv(path, header, ensemble.values)


def read_csv(path):
    """Header and float matrix of a file written by :func:`write_csv`."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)


def write_summary(path, entries):
    """``key = value`` lines in insertion order."""
    lines = [f"{k} = {fmt(v)}" for k, v in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return Path(path)


def read_summary(path):
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if " = " in line:
            k, v = line.split(" = ", 1)
            out[k] = v
    return out
