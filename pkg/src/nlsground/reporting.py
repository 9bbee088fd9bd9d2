"""Deterministic JSON and CSV writers for reports, profiles and trajectories.

Floats are written with 17 significant digits, which round-trips every
IEEE double exactly; JSON keys are sorted so identical inputs give identical
bytes.
"""
from __future__ import annotations

import csv
import json
import math
import os
from enum import Enum
from pathlib import Path

import numpy as np

from .grid import GridMismatchError, RadialGrid

SCHEMA_VERSION = "nlsground-report/1"


def fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, Enum):
        return _encode(obj.value, indent, level)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        s = fmt_float(obj)
        return f'"{s}"' if s in ("NaN", "Infinity", "-Infinity") else s
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=True)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_encode(str(k), indent, level + 1)}: {_encode(obj[k], indent, level + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in seq) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(payload: dict, kind: str) -> str:
    """Serialize ``payload`` with the schema tag; stable key order."""
    doc = dict(payload)
    doc["schema_version"] = SCHEMA_VERSION
    doc["report"] = kind
    return _encode(doc, 2, 0) + "\n"


def write_json(path, payload: dict, kind: str) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(payload, kind))
    return path


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def write_profile_csv(path, grid: RadialGrid, u) -> Path:
    u = np.asarray(u, dtype=float)
    return write_csv(path, ["r", "value"], zip(grid.r.tolist(), u.tolist()))


def read_profile_csv(path, grid: RadialGrid) -> np.ndarray:
    """Load a profile written by :func:`write_profile_csv`; radii must match ``grid``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["r", "value"]:
        raise ValueError(f"{path}: expected header 'r,value'")
    data = np.array([[float(a), float(b)] for a, b in rows[1:]], dtype=float).reshape(-1, 2)
    if data.shape[0] != grid.M:
        raise GridMismatchError(f"{path}: {data.shape[0]} rows for a grid of {grid.M} nodes")
    if not np.allclose(data[:, 0], grid.r, rtol=0.0, atol=1e-9 * grid.r_max):
        raise GridMismatchError(f"{path}: radii do not match the grid")
    return data[:, 1].copy()


def write_trajectory_csv(path, grid: RadialGrid, times, snapshots) -> Path:
    def rows():
        for t, psi in zip(times, snapshots):
            for r, z in zip(grid.r.tolist(), np.asarray(psi, dtype=complex).tolist()):
                yield (float(t), r, z.real, z.imag)

    return write_csv(path, ["t", "r", "re", "im"], rows())


def write_scan_csv(path, scan) -> Path:
    rows = zip(scan.rho_values, scan.i_values, scan.lambda_values, scan.verdicts)
    return write_csv(path, ["rho", "I", "lambda", "verdict"], rows)


def write_stability_csv(path, result) -> Path:
    rows = zip(result.times, result.mass_series, result.energy_series, result.orbit_distance_series)
    return write_csv(path, ["t", "mass", "energy", "orbit_distance"], rows)


def ensure_dir(path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise PermissionError(f"output directory {path} is not writable")
    return path
