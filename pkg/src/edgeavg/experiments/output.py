"""CSV, summary and snapshot-grid writers.

Floats are written in Python's shortest round-trip form (``repr``), so the
files are byte-identical across reruns and parse back losslessly.
"""

from __future__ import annotations

import csv
import math
import os

import numpy as np

from .runner import ExperimentResult, tkey


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return repr(x) if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    return str(x)


def write_timeseries(path: str, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def write_summary(path: str, summary: dict) -> None:
    with open(path, "w") as fh:
        for key, value in summary.items():
            fh.write(f"{key}={fmt(value)}\n")


def write_grid(path: str, values: np.ndarray, shape: tuple) -> None:
    grid = np.asarray(values).reshape(shape)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in grid:
            w.writerow([fmt(x) for x in row.tolist()])


def write_outputs(out_dir: str, result: ExperimentResult) -> list[str]:
    """Write every output file of one experiment; returns the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    paths = [os.path.join(out_dir, "timeseries.csv"), os.path.join(out_dir, "summary.txt")]
    write_timeseries(paths[0], result.columns, result.rows)
    write_summary(paths[1], result.summary)
    for t, values in sorted(result.snapshots.items()):
        path = os.path.join(out_dir, f"snapshot_t{tkey(t)}.csv")
        write_grid(path, values, result.grid_shape)
        paths.append(path)
    return paths


def read_summary(path: str) -> dict[str, str]:
    with open(path) as fh:
        return dict(line.rstrip("\n").split("=", 1) for line in fh if "=" in line)


def read_grid(path: str) -> np.ndarray:
    with open(path, newline="") as fh:
        return np.array([[float(x) for x in row] for row in csv.reader(fh)])
