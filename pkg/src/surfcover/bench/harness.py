"""Repeated planning runs, per-run metrics and aggregated reports."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..kinematics import KinematicChain, ToleranceSpec, pose_error_batch
from ..planners import METHODS, Trajectory
from ..solvers import InfeasibleError
from ..surface import EndEffectorTarget, compute_targets
from .config import BenchConfig

log = logging.getLogger(__name__)

__all__ = ["RunMetrics", "RunReport", "compute_metrics", "aggregate", "run_benchmark", "scaling_sweep"]


@dataclass(frozen=True)
class RunMetrics:
    reconfigurations: int
    movement: float
    max_position_error: float
    max_rotation_error: Optional[float]
    time: float = 0.0
    seed: int = 0


def compute_metrics(
    traj: Trajectory, targets: Sequence[EndEffectorTarget], chain: KinematicChain, tol: ToleranceSpec
) -> RunMetrics:
    """Table-style metrics of one trajectory.

    Movement skips the steps marked as breakpoints; pose errors only count
    constrained DoF, and rotation error is None when rotation is free.
    """
    pos, rot = chain.fk_batch(traj.configs)
    pmax, rmax = 0.0, None
    for k, t in enumerate(traj.order):
        pe, re = pose_error_batch(pos[k : k + 1], rot[k : k + 1], targets[t], tol)
        pmax = max(pmax, float(pe[0]))
        if re is not None:
            rmax = max(rmax or 0.0, float(re[0]))
    return RunMetrics(traj.reconfigurations, traj.movement(), pmax, rmax)


@dataclass(frozen=True)
class RunReport:
    """Aggregate of one method over the repeats of one benchmark.

    Standard deviations are population-style (ddof = 0).  Failed repeats
    are counted in ``failures`` and left out of every statistic.
    """

    method: str
    repeats: int
    n: int
    mean_reconfigurations: float
    std_reconfigurations: float
    mean_movement: float
    std_movement: float
    mean_time: float
    std_time: float
    max_position_error: float
    max_rotation_error: Optional[float]
    failures: int = 0
    runs: tuple = field(default=(), compare=False)

    @property
    def ok(self) -> bool:
        return self.failures == 0

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "runs"}
        d["runs"] = [r.__dict__ for r in self.runs]
        return d


def _stats(values):
    if not values:
        return math.nan, math.nan
    a = np.asarray(values, dtype=float)
    return float(a.mean()), float(a.std())


def aggregate(method: str, n: int, runs: Sequence[RunMetrics], failures: int = 0) -> RunReport:
    runs = tuple(runs)
    mr, sr = _stats([r.reconfigurations for r in runs])
    mm, sm = _stats([r.movement for r in runs])
    mt, st = _stats([r.time for r in runs])
    pmax = max((r.max_position_error for r in runs), default=math.nan)
    rots = [r.max_rotation_error for r in runs if r.max_rotation_error is not None]
    return RunReport(
        method, len(runs) + failures, n, mr, sr, mm, sm, mt, st, pmax, max(rots) if rots else None, failures, runs
    )


def run_benchmark(config: BenchConfig) -> List[RunReport]:
    """Every configured method, ``repeats`` times, seeds master_seed + i.

    Time covers target derivation, IK sampling and search up to the
    solver's convergence; mesh loading is excluded.
    """
    mesh = config.mesh()
    chain = config.chain()
    tol = config.tolerance_spec()
    targets = compute_targets(mesh)
    reports = []
    for method in config.methods:
        planner = METHODS[method]
        runs, failures = [], 0
        for i in range(config.repeats):
            seed = config.master_seed + i
            params = config.params(seed)
            t0 = time.perf_counter()
            try:
                traj = planner(mesh, chain, tol, params)
            except InfeasibleError as exc:
                failures += 1
                log.warning("%s seed %d failed: %s", method, seed, exc)
                continue
            elapsed = time.perf_counter() - t0
            m = compute_metrics(traj, targets, chain, tol)
            runs.append(RunMetrics(m.reconfigurations, m.movement, m.max_position_error, m.max_rotation_error, elapsed, seed))
            log.info("%s n=%d seed %d: %d bp, %.3f rad, %.2f s", method, mesh.n, seed, m.reconfigurations, m.movement, elapsed)
        reports.append(aggregate(method, mesh.n, runs, failures))
    return reports


def scaling_sweep(config: BenchConfig, n_values: Sequence[int]) -> List[RunReport]:
    """run_benchmark at each density; reports ordered by n, then method."""
    if not n_values:
        raise ValueError("n_values must not be empty")
    out = []
    for n in sorted(set(int(v) for v in n_values)):
        out.extend(run_benchmark(config.with_density(n)))
    return out
