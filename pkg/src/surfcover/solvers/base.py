"""Solver result types, budgets and the cycle-to-path conversion."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Hashable, List, Optional, Sequence, Tuple


class InfeasibleError(RuntimeError):
    """No tour exists under the given (sparse) edge set, or none was found."""


@dataclass(frozen=True)
class SolverBudget:
    """Stopping rule for the iterative solvers.

    The search is declared converged when the incumbent has not improved
    for ``stagnation_secs`` seconds or for ``stagnation_iters`` consecutive
    perturbation rounds, whichever comes first; ``time_cap`` bounds the
    whole run.  Only the iteration rule is reproducible across machines.
    """

    time_cap: float = 60.0
    stagnation_secs: float = 2.0
    stagnation_iters: Optional[int] = 30
    seed: int = 0

    def __post_init__(self):
        if self.time_cap <= 0 or self.stagnation_secs <= 0:
            raise ValueError("budget caps must be positive")
        if self.stagnation_iters is not None and self.stagnation_iters < 1:
            raise ValueError("stagnation_iters must be >= 1")

    def with_seed(self, seed: int) -> "SolverBudget":
        return SolverBudget(self.time_cap, self.stagnation_secs, self.stagnation_iters, seed)


@dataclass(frozen=True)
class Tour:
    """A cycle; the first node is implicitly repeated at the end.

    For TSP the nodes are ints; for GTSP they are ``(set, node)`` pairs.
    """

    nodes: Tuple[Hashable, ...]
    weight: float
    history: Tuple[Tuple[float, float], ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class PathSolution:
    nodes: Tuple[Hashable, ...]
    weight: float


def _is_dummy(node, dummy) -> bool:
    if isinstance(node, tuple):
        return node[0] == dummy
    return node == dummy


def cycle_to_path(tour: Tour, dummy_index) -> PathSolution:
    """Cut the cycle at the dummy node and drop it."""
    nodes = list(tour.nodes)
    hits = [k for k, v in enumerate(nodes) if _is_dummy(v, dummy_index)]
    if not hits:
        raise ValueError("tour does not contain the dummy node")
    if len(hits) > 1:
        raise ValueError("tour visits the dummy node more than once")
    k = hits[0]
    return PathSolution(tuple(nodes[k + 1 :] + nodes[:k]), tour.weight)


class Stopwatch:
    """Tracks stagnation against a :class:`SolverBudget`."""

    def __init__(self, budget: SolverBudget):
        self.budget = budget
        self.start = time.perf_counter()
        self.last_improvement = self.start
        self.stalled_rounds = 0
        self.history: List[Tuple[float, float]] = []

    def elapsed(self) -> float:
        return time.perf_counter() - self.start

    def improved(self, weight: float):
        now = time.perf_counter()
        self.last_improvement = now
        self.stalled_rounds = 0
        self.history.append((now - self.start, weight))

    def stalled(self):
        self.stalled_rounds += 1

    def done(self) -> bool:
        now = time.perf_counter()
        b = self.budget
        if now - self.start >= b.time_cap:
            return True
        if now - self.last_improvement >= b.stagnation_secs:
            return True
        return b.stagnation_iters is not None and self.stalled_rounds >= b.stagnation_iters


def improves(new: float, old: float) -> bool:
    if math.isinf(old):
        return not math.isinf(new)
    return new < old - 1e-9 * max(1.0, abs(old))
