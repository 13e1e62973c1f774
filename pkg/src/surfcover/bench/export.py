"""Trajectory and report serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from ..planners import Trajectory
from .harness import RunReport

__all__ = ["ExportError", "export_trajectory", "import_trajectory", "export_report", "trajectory_to_dict", "trajectory_from_dict"]


class ExportError(OSError):
    pass


def _write(text: str, path) -> str:
    if path is not None:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise ExportError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return text


def trajectory_to_dict(traj: Trajectory) -> dict:
    return {
        "order": [int(t) for t in traj.order],
        "configs": traj.configs.tolist(),
        "breakpoints": sorted(int(b) for b in traj.breakpoints),
    }


def trajectory_from_dict(data: dict) -> Trajectory:
    try:
        configs = np.array(data["configs"], dtype=float)
        if configs.ndim == 1 and configs.size == 0:
            configs = configs.reshape(0, 0)
        return Trajectory(tuple(int(t) for t in data["order"]), configs, frozenset(int(b) for b in data["breakpoints"]))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed trajectory document: {exc}") from None


def export_trajectory(traj: Trajectory, format: str = "json", path=None) -> str:
    """Serialize to ``csv`` or ``json``; also written to ``path`` if given.

    CSV columns: step, target_index, theta_1..theta_k, breakpoint_after.
    """
    fmt = format.lower()
    if fmt == "json":
        return _write(json.dumps(trajectory_to_dict(traj), indent=1) + "\n", path)
    if fmt != "csv":
        raise ValueError(f"unknown trajectory format {format!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    k = traj.configs.shape[1] if traj.configs.ndim == 2 else 0
    w.writerow(["step", "target_index"] + [f"theta_{j + 1}" for j in range(k)] + ["breakpoint_after"])
    for step, (t, q) in enumerate(zip(traj.order, traj.configs)):
        w.writerow([step, t] + [repr(float(v)) for v in q] + [int(step in traj.breakpoints)])
    return _write(buf.getvalue(), path)


def import_trajectory(source: Union[str, Path], format: Optional[str] = None) -> Trajectory:
    """Read a trajectory from a file path (format from the suffix by default)."""
    p = Path(source)
    fmt = (format or p.suffix.lstrip(".")).lower()
    try:
        text = p.read_text()
    except OSError as exc:
        raise ExportError(f"cannot read {p}: {exc.strerror or exc}") from exc
    if fmt == "json":
        try:
            return trajectory_from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ValueError(f"{p}: invalid JSON: {exc}") from None
    if fmt == "csv":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ValueError(f"{p}: no trajectory rows")
        thetas = sorted((c for c in rows[0] if c.startswith("theta_")), key=lambda c: int(c[6:]))
        try:
            order = tuple(int(r["target_index"]) for r in rows)
            configs = np.array([[float(r[c]) for c in thetas] for r in rows])
            bps = frozenset(int(r["step"]) for r in rows if int(r["breakpoint_after"]))
        except (KeyError, ValueError) as exc:
            raise ValueError(f"{p}: malformed CSV: {exc}") from None
        return Trajectory(order, configs, bps)
    raise ValueError(f"unknown trajectory format {fmt!r}")


COLUMNS = (
    "Method",
    "Mean Num of Reconfig",
    "Mean Joint Movements (rad)",
    "Mean Computation Time (s)",
    "Max Position Error (m)",
    "Max Rotation Error (rad)",
    "Number of End-Effector Targets n",
)


def _pm(mean: float, std: float, digits: int) -> str:
    if math.isnan(mean):
        return "failed"
    return f"{mean:.{digits}f}±{std:.{digits}f}"


def _row(r: RunReport):
    rot = "-" if r.max_rotation_error is None else f"{r.max_rotation_error:.2e}"
    pos = "-" if math.isnan(r.max_position_error) else f"{r.max_position_error:.2e}"
    method = r.method if r.ok else f"{r.method} ({r.failures}/{r.repeats} failed)"
    return (
        method,
        _pm(r.mean_reconfigurations, r.std_reconfigurations, 2),
        _pm(r.mean_movement, r.std_movement, 2),
        _pm(r.mean_time, r.std_time, 2),
        pos,
        rot,
        str(r.n),
    )


def export_report(reports: Sequence[RunReport], format: str = "table-text", path=None) -> str:
    """One row per report, in the given order."""
    fmt = format.lower()
    if fmt == "json":
        return _write(json.dumps([r.to_dict() for r in reports], indent=1) + "\n", path)
    if fmt != "table-text":
        raise ValueError(f"unknown report format {format!r}")
    rows = [COLUMNS] + [_row(r) for r in reports]
    widths = [max(len(row[c]) for row in rows) for c in range(len(COLUMNS))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return _write("\n".join(lines) + "\n", path)
