"""Trajectory file ingestion and writing.

Two interchangeable encodings:

* CSV with header ``trajectory_id,time_index,x0,..,x{n-1}`` (row order free);
* JSON object mapping each trajectory id to its list of state vectors.

Ingestion validates a contiguous integer time grid starting at 0, uniform
length and dimension across trajectories, and numeric cells.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

__all__ = ["ingest_trajectories", "write_trajectories"]


def _detect_format(path: Path, fmt: str | None) -> str:
    if fmt is not None:
        if fmt not in ("csv", "json"):
            raise ValueError(f"unknown trajectory format {fmt!r}")
        return fmt
    return "json" if path.suffix.lower() == ".json" else "csv"


def ingest_trajectories(path, fmt: str | None = None) -> dict[str, np.ndarray]:
    """Load trajectories grouped by id and sorted by time index.

    Returns a dict keyed by trajectory id (sorted) with (T, n) float arrays.
    Raises ValueError on ragged lengths, duplicate (id, time) pairs, or
    non-numeric cells.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"trajectory file not found: {path}")
    fmt = _detect_format(path, fmt)
    if fmt == "json":
        rows = json.loads(path.read_text())
        if not isinstance(rows, dict):
            raise ValueError("trajectory JSON must map ids to lists of states")
        table = {}
        for tid, states in rows.items():
            arr = np.asarray(states, dtype=float)
            if arr.ndim == 1:
                arr = arr[:, None]
            if arr.ndim != 2 or arr.shape[0] < 1:
                raise ValueError(f"trajectory {tid!r} is not a nonempty list of states")
            table[str(tid)] = arr
    else:
        table = _ingest_csv(path)
    _validate_uniform(table)
    return {tid: table[tid] for tid in sorted(table)}


def _ingest_csv(path: Path) -> dict[str, np.ndarray]:
    entries: dict[str, dict[int, tuple[float, ...]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 3 or header[0] != "trajectory_id":
            raise ValueError(
                "trajectory CSV must start with header trajectory_id,time_index,x0,.."
            )
        width = len(header)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ValueError(f"line {lineno}: expected {width} cells, got {len(row)}")
            tid = row[0]
            try:
                time_index = int(row[1])
                values = tuple(float(v) for v in row[2:])
            except ValueError:
                raise ValueError(f"line {lineno}: non-numeric cell") from None
            if not all(np.isfinite(values)):
                raise ValueError(f"line {lineno}: non-finite state component")
            slot = entries.setdefault(tid, {})
            if time_index in slot:
                raise ValueError(f"duplicate (id, time) pair ({tid!r}, {time_index})")
            slot[time_index] = values
    table = {}
    for tid, by_time in entries.items():
        times = sorted(by_time)
        if times != list(range(len(times))):
            raise ValueError(
                f"trajectory {tid!r}: time indices must form 0..{len(times) - 1}"
            )
        table[tid] = np.asarray([by_time[t] for t in times])
    return table


def _validate_uniform(table: dict[str, np.ndarray]) -> None:
    if not table:
        raise ValueError("no trajectories found")
    shapes = {arr.shape for arr in table.values()}
    if len({s[1] for s in shapes}) > 1:
        raise ValueError(f"inconsistent state dimensions: {sorted(s[1] for s in shapes)}")
    if len({s[0] for s in shapes}) > 1:
        raise ValueError(f"ragged trajectory lengths: {sorted(s[0] for s in shapes)}")
    for tid, arr in table.items():
        if not np.isfinite(arr).all():
            raise ValueError(f"trajectory {tid!r} contains non-finite values")


def write_trajectories(table: dict[str, np.ndarray], path, fmt: str | None = None) -> None:
    """Write trajectories in either encoding (chosen from the extension by default)."""
    path = Path(path)
    fmt = _detect_format(path, fmt)
    if fmt == "json":
        payload = {tid: np.asarray(arr).tolist() for tid, arr in table.items()}
        path.write_text(json.dumps(payload))
        return
    dims = {np.atleast_2d(arr).shape[1] for arr in table.values()}
    if len(dims) != 1:
        raise ValueError("all trajectories must share one dimension")
    n = dims.pop()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trajectory_id", "time_index"] + [f"x{i}" for i in range(n)])
        for tid, arr in table.items():
            for time_index, state in enumerate(np.atleast_2d(arr)):
                writer.writerow([tid, time_index] + [repr(float(v)) for v in state])
