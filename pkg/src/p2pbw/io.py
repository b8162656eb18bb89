"""CSV/JSON readers and writers.

Series are stored as two-column CSV with a header (``time,value`` for traces,
``lag,value`` for autocovariance input).  Floats are written with ``repr``,
i.e. the shortest decimal that round-trips, so files are byte-reproducible.
Every write goes to a temporary file in the target directory and is then
renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .exceptions import DataError
from .ou import Trace

__all__ = [
    "atomic_write_text",
    "write_trace_csv",
    "write_columns_csv",
    "read_series_csv",
    "read_trace_csv",
    "write_json",
    "to_jsonable",
]


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _fmt(value) -> str:
    value = float(value)
    if math.isnan(value):
        return "nan"
    return repr(value)


def write_columns_csv(path, header, columns) -> Path:
    columns = [np.asarray(c) for c in columns]
    lengths = {c.size for c in columns}
    if len(lengths) != 1:
        raise ValueError("columns differ in length")
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in zip(*(c.tolist() for c in columns)):
        buf.write(",".join("" if v is None else _fmt(v) for v in row) + "\n")
    return atomic_write_text(path, buf.getvalue())


def write_trace_csv(path, trace: Trace) -> Path:
    return write_columns_csv(path, ("time", "value"), (trace.times, trace.values))


def read_series_csv(path, header=("time", "value")) -> tuple[np.ndarray, np.ndarray]:
    """Read a two-column CSV; parse failures name the offending line."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    first, second = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            got = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if [h.strip() for h in got] != list(header):
            raise DataError(f"{path}:1: expected header {','.join(header)!r}, got {','.join(got)!r}")
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{line}: expected 2 fields, got {len(row)}")
            try:
                a, b = float(row[0]), float(row[1])
            except ValueError:
                raise DataError(f"{path}:{line}: cannot parse {','.join(row)!r} as numbers") from None
            if not (math.isfinite(a) and math.isfinite(b)):
                raise DataError(f"{path}:{line}: non-finite value")
            first.append(a)
            second.append(b)
    if not first:
        raise DataError(f"{path}: no data rows")
    return np.array(first), np.array(second)


def read_trace_csv(path, dt: float | None = None) -> Trace:
    """Read a ``time,value`` CSV into a :class:`Trace`.

    The step is inferred from the time column unless ``dt`` is given; the
    column must then be uniformly spaced.
    """
    times, values = read_series_csv(path)
    if dt is None:
        if times.size < 2:
            raise DataError(f"{path}: cannot infer the time step from a single row; pass dt")
        dt = float(times[1] - times[0])
        expected = times[0] + dt * np.arange(times.size)
        if dt <= 0 or np.max(np.abs(times - expected)) > 1e-6 * dt:
            raise DataError(f"{path}: time column is not uniformly increasing")
    return Trace(dt, values)


def to_jsonable(obj):
    """Recursively convert numpy types and non-finite floats (to ``None``)."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def write_json(path, payload) -> Path:
    text = json.dumps(to_jsonable(payload), indent=2, sort_keys=True, allow_nan=False) + "\n"
    return atomic_write_text(path, text)
