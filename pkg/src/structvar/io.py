"""File formats: transition JSON, series CSV and Granger edge lists.

Floats are written with 17 significant digits (CSV) or the shortest
round-tripping representation (JSON), so every file reloads to bit-equal
arrays.
"""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from .exceptions import ParameterError
from .model import GroupPartition, StructuredTransition

FLOAT_FORMAT = ".17g"


class DataFormatError(ParameterError):
    """A data file is malformed; ``row`` and ``column`` are 1-based when known."""

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.row = row
        self.column = column


def _fmt(x):
    return format(float(x), FLOAT_FORMAT)


# -- transition JSON ---------------------------------------------------------------


def transition_to_dict(T: StructuredTransition):
    return {
        "p": T.p,
        "L": T.L.tolist(),
        "S": T.S.tolist(),
        "G": T.G.tolist(),
        "partition": T.partition.to_list(),
    }


def transition_from_dict(doc):
    try:
        p = int(doc["p"])
        mats = [np.array(doc[k], dtype=float) for k in "LSG"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"invalid transition document: {exc}") from exc
    for name, m in zip("LSG", mats):
        if m.shape != (p, p):
            raise DataFormatError(f"component {name} has shape {m.shape}, expected ({p}, {p})")
    part = doc.get("partition")
    partition = GroupPartition(p, part) if part is not None else None
    return StructuredTransition(*mats, partition)


def write_transition(path, T: StructuredTransition):
    with open(path, "w") as fh:
        json.dump(transition_to_dict(T), fh)


def read_transition(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from exc
    return transition_from_dict(doc)


# -- series CSV ---------------------------------------------------------------------


def write_series(path, series, header=None):
    """Rows are time points and columns series."""
    series = np.asarray(series, dtype=float)
    if series.ndim != 2:
        raise ParameterError("series must be 2-d")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header is not None:
            if len(header) != series.shape[1]:
                raise ParameterError("header length does not match the number of series")
            w.writerow(header)
        for row in series:
            w.writerow([_fmt(x) for x in row])


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_series(path):
    """Parse a series CSV; returns ``(array, header or None)``.

    A first row with any non-numeric cell is taken as the header.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh)]
    # drop trailing blank lines only
    while rows and not any(c.strip() for c in rows[-1]):
        rows.pop()
    if not rows:
        raise DataFormatError("empty file")
    header = None
    if not all(_is_number(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        body, offset = rows[1:], 2
    else:
        body, offset = rows, 1
    if not body:
        raise DataFormatError("no data rows", offset)
    width = len(header) if header is not None else len(body[0])
    out = np.empty((len(body), width))
    for i, row in enumerate(body):
        if len(row) != width:
            raise DataFormatError(f"expected {width} fields, found {len(row)}", i + offset)
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataFormatError(f"not a number: {cell!r}", i + offset, j + 1) from None
            if not math.isfinite(v):
                raise DataFormatError(f"non-finite value {cell!r}", i + offset, j + 1)
            out[i, j] = v
    return out, header


# -- edge list and reports ---------------------------------------------------------------


def edge_list(M, threshold=0.0, names=None):
    """Directed edges ``(source, target, weight)`` with ``|weight| > threshold``.

    Entry ``(i, j)`` of a row-form transition matrix drives series ``j``
    from the lagged series ``i``, so it is reported as the edge ``i -> j``.
    """
    M = np.asarray(M, dtype=float)
    idx = np.argwhere(np.abs(M) > threshold)
    label = (lambda k: names[k]) if names is not None else (lambda k: int(k))
    return [(label(i), label(j), float(M[i, j])) for i, j in idx]


def write_edge_list(path, M, threshold=0.0, names=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["source", "target", "weight"])
        for s, t, v in edge_list(M, threshold, names):
            w.writerow([s, t, _fmt(v)])


def to_jsonable(obj):
    """Plain-Python copy of ``obj`` with non-finite floats mapped to ``None``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(obj, indent=2):
    return json.dumps(to_jsonable(obj), indent=indent, allow_nan=False)


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dumps(obj))
        fh.write("\n")
