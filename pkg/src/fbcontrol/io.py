"""CSV and JSON writers. Floats always go out at 17 significant digits so a
round trip through text reproduces every double exactly."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.17g"


def write_csv(path, header: str, columns) -> Path:
    """Write equal-length columns under a comma-separated ``header``."""
    path = Path(path)
    cols = [np.asarray(c, dtype=float).ravel() for c in columns]
    names = header.split(",")
    if len(names) != len(cols):
        raise ValueError(f"header names {len(names)} columns, got {len(cols)}")
    if len({c.size for c in cols}) > 1:
        raise ValueError("columns must have equal length")
    table = np.column_stack(cols) if cols[0].size else np.empty((0, len(cols)))
    np.savetxt(path, table, fmt=FLOAT_FMT, delimiter=",", header=header, comments="")
    return path


def write_field_csv(path, value_name: str, data, t, zeta) -> Path:
    """Space-time field in long format: one ``t,zeta,<value>`` row per node."""
    data = np.asarray(data, dtype=float)
    tt, zz = np.meshgrid(t, zeta, indexing="ij")
    return write_csv(path, f"t,zeta,{value_name}", [tt, zz, data])


def write_trajectory_csv(path, t, l) -> Path:
    return write_csv(path, "t,l,dl", [t, l.values, l.derivs])


def read_csv(path):
    """Header names and a 2-D float array."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path
