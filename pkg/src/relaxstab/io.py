"""Report emission: time-series CSV, JSON summaries and raw grid snapshots."""

import csv
import json
from pathlib import Path

import numpy as np

CSV_COLUMNS = ("step", "t", "norm2", "lyapunov", "bc_term")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else None
    return obj


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def dumps_json(payload):
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True)


def write_timeseries(path, report):
    """CSV with columns ``step, t, norm2, lyapunov, bc_term`` (``repr`` precision)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in zip(report.steps, report.t, report.norm2, report.lyapunov, report.bc_term):
            writer.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])
    return path


def read_timeseries(path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return {col: np.array([float(r[col]) for r in rows]) for col in CSV_COLUMNS}


def write_snapshot(path, U, domain, t=0.0):
    """Flat little-endian float64 grid, y-outer row-major, plus a ``.json`` sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    U = np.asarray(U, dtype="<f8")
    nx, ny, N = U.shape
    np.ascontiguousarray(U.transpose(1, 0, 2)).tofile(path)
    sidecar = {
        "shape": [ny, nx, N],
        "order": "row-major, y-outer: index [j][i][k] for y-cell j, x-cell i, component k",
        "dtype": "float64 little-endian",
        "t": t,
        "domain": [domain.x_min, domain.x_max, domain.y_min, domain.y_max],
    }
    write_json(path.with_suffix(path.suffix + ".json"), sidecar)
    return path


def read_snapshot(path):
    """Inverse of :func:`write_snapshot`; returns the grid as ``(nx, ny, N)``."""
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text(encoding="utf-8"))
    ny, nx, N = meta["shape"]
    data = np.fromfile(path, dtype="<f8").reshape(ny, nx, N)
    return np.ascontiguousarray(data.transpose(1, 0, 2)), meta
