"""Iterated local search for the GTSP on a sparse joint graph.

A solution is a cyclic order of the node sets plus one chosen node per
set.  Three move classes are combined:

* set-order 2-opt and Or-opt, evaluated with the current node choices;
* node re-choice: each set picks its best node given both neighbors;
* cluster optimization: for a fixed order, the exact best node per set by
  dynamic programming over the layered graph.
"""

from __future__ import annotations

import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from ..graphs import JointGraph
from . import _local
from .base import InfeasibleError, SolverBudget, Stopwatch, Tour, improves

log = logging.getLogger(__name__)

__all__ = ["solve_gtsp", "cluster_optimize", "tour_cost"]

# Instances with sets * max_set_size**2 at or below this are searched with
# every order move scored by exact cluster optimization.
EXACT_EVAL_LIMIT = 100


def cluster_optimize(graph: JointGraph, order: List[int]) -> Tuple[float, np.ndarray]:
    """Best node per set for a fixed cyclic set order.

    Returns ``(cost, choice)`` where ``choice[s]`` is the node index chosen
    in set ``s``; cost is ``inf`` when no feasible assignment exists.
    """
    S = graph.set_count
    choice = np.zeros(S, dtype=int)
    if len(order) <= 1:
        return 0.0, choice
    sizes = graph.set_sizes
    k0 = min(range(len(order)), key=lambda k: (sizes[order[k]], k))
    seq = order[k0:] + order[:k0]
    s0 = seq[0]
    F = graph.block(s0, seq[1])
    if F is None:
        return math.inf, choice
    back = []
    for a, b in zip(seq[1:-1], seq[2:]):
        W = graph.block(a, b)
        if W is None:
            return math.inf, choice
        tot = F[:, :, None] + W[None, :, :]
        arg = tot.argmin(axis=1)
        F = np.take_along_axis(tot, arg[:, None, :], axis=1)[:, 0, :]
        back.append(arg)
    close = graph.block(seq[-1], s0)
    if close is None:
        return math.inf, choice
    final = F + close.T
    r, x = np.unravel_index(int(np.argmin(final)), final.shape)
    cost = float(final[r, x])
    if not math.isfinite(cost):
        return math.inf, choice
    choice[seq[-1]] = x
    for pos in range(len(back) - 1, -1, -1):
        x = back[pos][r, x]
        choice[seq[pos + 1]] = x
    choice[s0] = r
    return cost, choice


def tour_cost(graph: JointGraph, order: List[int], choice: np.ndarray) -> float:
    if len(order) <= 1:
        return 0.0
    total = 0.0
    for a, b in zip(order, order[1:] + order[:1]):
        W = graph.block(a, b)
        if W is None:
            return math.inf
        total += float(W[choice[a], choice[b]])
    return total


class _Search:
    def __init__(self, graph: JointGraph, rng: np.random.Generator):
        self.g = graph
        self.rng = rng
        S = graph.set_count
        self.S = S
        self.adj = graph.neighbors()
        lb = np.full((S, S), np.inf)
        for (a, b), (W, _) in graph.blocks.items():
            lb[a, b] = lb[b, a] = float(W.min())
        self.lb = lb
        d = graph.dummy
        self.hub = d if d is not None and len(self.adj[d]) == S - 1 else None
        self.exact = S * max(graph.set_sizes) ** 2 <= EXACT_EVAL_LIMIT
        self._pairs = [(a, b, W) for (a, b), (W, _) in graph.blocks.items()]

    def chosen_matrix(self, choice: np.ndarray) -> np.ndarray:
        WC = np.full((self.S, self.S), np.inf)
        for a, b, W in self._pairs:
            WC[a, b] = WC[b, a] = W[choice[a], choice[b]]
        return WC

    def rechoose(self, order: List[int], choice: np.ndarray) -> None:
        N = len(order)
        if N < 3:
            return
        for k in range(N):
            u, s, v = order[k - 1], order[k], order[(k + 1) % N]
            vec = self.g.block(u, s)[choice[u], :] + self.g.block(s, v)[:, choice[v]]
            best = int(np.argmin(vec))
            if vec[best] < vec[choice[s]] - 1e-12:
                choice[s] = best

    def construct(self) -> Optional[Tuple[List[int], np.ndarray, float]]:
        for _ in range(20):
            order = _local.construct_cycle(self.adj, self.lb, self.rng, hub=self.hub)
            if order is None:
                continue
            cost, choice = cluster_optimize(self.g, order)
            if math.isfinite(cost):
                return order, choice, cost
        return None

    def _exact_descent(self, order, cost, choice):
        N = len(order)
        improved = True
        while improved:
            improved = False
            candidates = []
            for i in range(N - 1):
                for j in range(i + 1, N):
                    candidates.append(order[: i] + order[i : j + 1][::-1] + order[j + 1 :])
            for i in range(N):
                rest = order[:i] + order[i + 1 :]
                for k in range(len(rest) + 1):
                    candidates.append(rest[:k] + [order[i]] + rest[k:])
            for cand in candidates:
                c, ch = cluster_optimize(self.g, cand)
                if improves(c, cost):
                    order, cost, choice = cand, c, ch
                    improved = True
                    break
        return order, cost, choice

    def descend(self, order: List[int], choice: np.ndarray, cost: float):
        """Local search to a local optimum of all three move classes."""
        order = list(order)
        choice = choice.copy()
        c, ch = cluster_optimize(self.g, order)
        if improves(c, cost):
            cost, choice = c, ch
        if self.exact:
            return self._exact_descent(order, cost, choice)
        while True:
            WC = self.chosen_matrix(choice)
            t = list(order)
            while _local.two_opt(t, WC) | _local.or_opt(t, WC):
                pass
            ch = choice.copy()
            self.rechoose(t, ch)
            c, ch2 = cluster_optimize(self.g, t)
            fixed = tour_cost(self.g, t, ch)
            if c > fixed:
                c, ch2 = fixed, ch
            if improves(c, cost):
                order, choice, cost = t, ch2, c
                continue
            return order, cost, choice

    def perturb(self, order: List[int]) -> Optional[Tuple[List[int], np.ndarray, float]]:
        for _ in range(10):
            t = list(order)
            if _local.kick(t, self.lb, self.rng) == 0 and len(t) >= 5:
                continue
            cost, choice = cluster_optimize(self.g, t)
            if math.isfinite(cost):
                return t, choice, cost
        return None


def _from_hint(graph: JointGraph, hint: Tour):
    try:
        order = [int(s) for s, _ in hint.nodes]
        choice = np.zeros(graph.set_count, dtype=int)
        for s, i in hint.nodes:
            choice[int(s)] = int(i)
    except (TypeError, ValueError):
        return None
    if sorted(order) != list(range(graph.set_count)):
        return None
    cost = tour_cost(graph, order, choice)
    if not math.isfinite(cost):
        return None
    return order, choice, cost


def solve_gtsp(
    graph: JointGraph,
    budget: SolverBudget = SolverBudget(),
    initial_hint: Optional[Tour] = None,
    ils: bool = True,
    restarts: Optional[bool] = None,
    max_rounds: Optional[int] = None,
) -> Tour:
    """Visit one node of every set on a cycle of minimum total weight.

    Missing edges are never used.  The incumbent is feasible at every
    step and its weight never increases.  With ``ils=False`` only a single
    local-search descent from the start tour is run.  Every tenth round
    restarts from a fresh construction; by default only when no hint is
    given.  ``max_rounds`` caps the number of perturbation rounds.
    """
    S = graph.set_count
    if S == 0:
        return Tour((), 0.0)
    if any(sz == 0 for sz in graph.set_sizes):
        raise InfeasibleError("every set needs at least one node")
    rng = np.random.default_rng(budget.seed)
    watch = Stopwatch(budget)
    search = _Search(graph, rng)
    if S == 1:
        return Tour(((0, 0),), 0.0)

    start = _from_hint(graph, initial_hint) if initial_hint is not None else None
    if initial_hint is not None and start is None:
        log.warning("ignoring infeasible GTSP hint")
    if start is None:
        start = search.construct()
    if start is None:
        from .brute import brute_force_gtsp, gtsp_enumeration_size

        if gtsp_enumeration_size(graph) <= 1e6:
            tour = brute_force_gtsp(graph)
            if math.isinf(tour.weight):
                raise InfeasibleError("exhaustive search found no feasible GTSP tour")
            return tour
        raise InfeasibleError("no feasible GTSP tour found")

    order, choice, cost = start
    order, cost, choice = search.descend(order, choice, cost)
    best = (order, choice, cost)
    watch.improved(cost)
    if restarts is None:
        restarts = initial_hint is None
    rounds = 0
    while ils and not watch.done() and (max_rounds is None or rounds < max_rounds):
        rounds += 1
        cand = None
        if restarts and rounds % 10 == 0:
            cand = search.construct()
        if cand is None:
            cand = search.perturb(best[0])
        if cand is None:
            watch.stalled()
            continue
        o, ch, c = cand
        o, c, ch = search.descend(o, ch, c)
        if improves(c, best[2]):
            best = (o, ch, c)
            watch.improved(c)
        else:
            watch.stalled()
    order, choice, cost = best
    return Tour(tuple((s, int(choice[s])) for s in order), cost, tuple(watch.history))
