"""Snapshot files and diagnostics tables.

Snapshot format: one JSON header line ``{"dim", "N", "L", "t", "field_name"}``
followed by the raw values as little-endian float64 in row-major order.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .grid import GridSpec, ScalarField


def write_snapshot(path, field: ScalarField, t: float = 0.0) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    g = field.grid
    header = {"dim": g.dim, "N": list(g.N), "L": list(g.L), "t": float(t),
              "field_name": field.name or "field"}
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("utf-8"))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes(order="C"))
    return path


def read_snapshot(path) -> tuple[ScalarField, float]:
    path = Path(path)
    with open(path, "rb") as fh:
        line = fh.readline()
        try:
            header = json.loads(line.decode("utf-8"))
            grid = GridSpec(int(header["dim"]), header["L"], header["N"])
        except (ValueError, KeyError, TypeError) as exc:
            raise SchemaError(str(path), f"bad snapshot header: {exc}", line=1) from exc
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != int(np.prod(grid.shape)):
        raise SchemaError(str(path), f"expected {int(np.prod(grid.shape))} values, found {data.size}")
    field = ScalarField(grid, data.reshape(grid.shape).astype(np.float64), header.get("field_name", ""))
    return field, float(header.get("t", 0.0))


def write_rows(path, rows) -> Path:
    """Write dataclass instances or dicts as a CSV with a header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [dataclasses.asdict(r) if dataclasses.is_dataclass(r) else dict(r) for r in rows]
    with open(path, "w", newline="") as fh:
        if not rows:
            return path
        flat = [_flatten(r) for r in rows]
        writer = csv.DictWriter(fh, fieldnames=list(flat[0].keys()))
        writer.writeheader()
        writer.writerows(flat)
    return path


def _flatten(row: dict) -> dict:
    out = {}
    for k, v in row.items():
        if isinstance(v, (tuple, list)):
            for i, x in enumerate(v):
                out[f"{k}_{i}"] = x
        else:
            out[k] = v
    return out


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
