"""CSV and JSON emission with round-trippable floats."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .core import Interval
from .discrete import ParticleState
from .flow import COLUMNS, Trajectory


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def _plain(obj):
    """Convert numpy containers and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def write_json(path: Path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n")
    return path


def trajectory_rows(traj: Trajectory):
    for k, t in enumerate(traj.times):
        yield [t, *(traj.diagnostics[c][k] for c in COLUMNS[1:]), *traj.positions[k]]


def write_trajectory(out: Path, traj: Trajectory, stem: str | None = None) -> tuple[Path, Path]:
    out = Path(out)
    stem = stem or f"trajectory_N{traj.n}"
    header = list(COLUMNS) + [f"x{i}" for i in range(1, traj.n + 1)]
    csv_path = write_csv(out / f"{stem}.csv", header, trajectory_rows(traj))
    domain = {"type": "interval", "halfwidth": traj.domain.halfwidth} if isinstance(traj.domain, Interval) \
        else {"type": "line"}
    meta = {k: v for k, v in traj.meta.items() if k != "dissipated_at"}
    json_path = write_json(out / f"{stem}.json", {
        "N": traj.n, "domain": domain, "steps": traj.steps, "meta": meta,
        "times": traj.times, "positions": traj.positions,
        "diagnostics": traj.diagnostics, "dissipation": traj.dissipation(),
    })
    return csv_path, json_path


def read_positions(path: Path) -> np.ndarray:
    """Positions from a JSON list, a JSON object with "positions", or one number per line."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        return np.array([float(tok) for tok in text.replace(",", " ").split()])
    if isinstance(data, dict):
        data = data["positions"]
    return np.asarray(data, dtype=float)


def write_state(path: Path, state: ParticleState) -> Path:
    return write_csv(path, ["i", "x"], ((i + 1, x) for i, x in enumerate(state.positions)))
