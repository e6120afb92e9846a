"""Raster and statistics writers.

Rasters are CSV with a header line and one ``tick,address[,count]`` record
per line. Statistics are JSON with sorted keys and a trailing newline. Both
are written to a temporary file in the target directory and renamed into
place, so a reader never sees a partial file.
"""

from __future__ import annotations

import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable

import numpy as np

from ..errors import ValidationError


def _atomic_write(path, data: bytes) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def format_raster(records, with_count: bool | None = None) -> bytes:
    """Render records as CSV bytes.

    ``records`` is an iterable of ``(tick, address)`` or ``(tick, address,
    count)`` tuples, or a 2-D integer array with 2 or 3 columns. Ticks must
    be non-decreasing.
    """
    arr = _as_array(records, with_count)
    if arr.shape[0] > 1 and np.any(np.diff(arr[:, 0]) < 0):
        raise ValidationError("raster records must be in non-decreasing tick order")
    header = "tick,address,count\n" if arr.shape[1] == 3 else "tick,address\n"
    if arr.shape[0] == 0:
        return header.encode()
    line = "{},{},{}\n" if arr.shape[1] == 3 else "{},{}\n"
    return (header + "".join(line.format(*r) for r in arr.tolist())).encode()


def _as_array(records, with_count):
    if isinstance(records, np.ndarray):
        arr = records.astype(np.int64, copy=False)
        if arr.ndim != 2 or arr.shape[1] not in (2, 3):
            if arr.size == 0:
                return np.zeros((0, 3 if with_count else 2), dtype=np.int64)
            raise ValidationError("raster array needs 2 or 3 columns")
        return arr
    rows = list(records)
    if not rows:
        return np.zeros((0, 3 if with_count else 2), dtype=np.int64)
    widths = {len(r) for r in rows}
    if len(widths) != 1 or widths.pop() not in (2, 3):
        raise ValidationError("raster records must all have 2 or 3 fields")
    return np.asarray(rows, dtype=np.int64)


def emit_raster(records, sink, with_count: bool | None = None) -> int:
    """Write a raster to ``sink`` (path or binary file object); returns the record count."""
    data = format_raster(records, with_count)
    if hasattr(sink, "write"):
        sink.write(data)
    else:
        _atomic_write(sink, data)
    return data.count(b"\n") - 1


def format_stats(stats: dict) -> bytes:
    return (json.dumps(_plain(stats), sort_keys=True, indent=2) + "\n").encode()


def emit_stats(stats: dict, sink) -> None:
    data = format_stats(stats)
    if hasattr(sink, "write"):
        sink.write(data)
    else:
        _atomic_write(sink, data)


def emit_table(rows: Iterable[dict], columns: list[str], sink) -> None:
    """Small CSV table (used for sweep results)."""
    lines = [",".join(columns)]
    for r in rows:
        lines.append(",".join(repr(float(r[c])) if isinstance(r[c], float) else str(r[c]) for c in columns))
    data = ("\n".join(lines) + "\n").encode()
    if hasattr(sink, "write"):
        sink.write(data)
    else:
        _atomic_write(sink, data)


def read_raster(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        body = fh.read()
    if not body.strip():
        return np.zeros((0, len(header)), dtype=np.int64)
    return np.loadtxt(io.StringIO(body), delimiter=",", dtype=np.int64, ndmin=2)


def _plain(obj):
    """Convert numpy scalars/arrays to JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
