"""CSV and JSON artefacts.  Floats are written with 17 significant digits."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .grid import Grid, StateField


def fmt(value):
    return format(float(value), ".17g")


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if np.isfinite(value) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_steady(directory, grid, steady, extra=None):
    """``steady.csv`` (x, u_1..u_m, v_1..v_k, branch_label) and ``steady.meta.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    state = steady.field
    labels = steady.branch_labels or [""] * grid.n
    header = (["x"] + [f"u_{i + 1}" for i in range(state.m)]
              + [f"v_{i + 1}" for i in range(state.k)] + ["branch_label"])
    with open(directory / "steady.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, x in enumerate(grid.nodes):
            writer.writerow([fmt(x)] + [fmt(val) for val in state.u[:, i]]
                            + [fmt(val) for val in state.v[:, i]] + [labels[i]])
    meta = {"residual_sup": steady.residual_sup, "jump_points": steady.jump_points,
            "tolerance": steady.tolerance, "iterations": steady.iterations, "grid_n": grid.n,
            "m": state.m, "k": state.k}
    meta.update(steady.meta)
    if extra:
        meta.update(extra)
    write_json(directory / "steady.meta.json", meta)
    return directory / "steady.csv"


def read_steady(path):
    """Load ``steady.csv``; returns ``(grid, StateField, labels)``."""
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read steady state file {path}: {exc}") from exc
    header, body = rows[0], rows[1:]
    m = sum(1 for h in header if h.startswith("u_"))
    k = sum(1 for h in header if h.startswith("v_"))
    if not body or m < 1 or k < 1:
        raise ConfigError(f"{path} is not a steady state CSV")
    data = np.array([[float(c) for c in row[1:1 + m + k]] for row in body])
    labels = [row[1 + m + k] if len(row) > 1 + m + k else "" for row in body]
    grid = Grid(len(body))
    x = np.array([float(row[0]) for row in body])
    if not np.allclose(x, grid.nodes, rtol=0, atol=1e-12):
        raise ConfigError(f"{path}: x column is not the cell-centred grid with n={grid.n}")
    state = StateField(data[:, :m].T.copy(), data[:, m:].T.copy())
    return grid, state, (labels if any(labels) else None)


def write_spectrum(path, report):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["re", "im", "kind"])
        for re, im, kind in report.to_rows():
            writer.writerow([fmt(re), fmt(im), kind])
    return path


def write_trace(path, trace):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "sup_norm", "l2_norm"])
        for t, s, l2 in trace.rows():
            writer.writerow([fmt(t), fmt(s), fmt(l2)])
    return path


def write_field(path, grid, state):
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x"] + [f"u_{i + 1}" for i in range(state.m)] + [f"v_{i + 1}" for i in range(state.k)])
        for i, x in enumerate(grid.nodes):
            writer.writerow([fmt(x)] + [fmt(v) for v in state.u[:, i]] + [fmt(v) for v in state.v[:, i]])
    return path


def write_matrix(path, matrix):
    np.savetxt(path, matrix, delimiter=",", fmt="%.17g")
    return Path(path)
