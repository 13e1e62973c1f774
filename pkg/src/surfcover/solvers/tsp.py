"""Iterated local search for the (sparse) symmetric TSP."""

from __future__ import annotations

import logging
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.sparse.csgraph import shortest_path

from ..graphs import CartesianGraph
from . import _local
from .base import InfeasibleError, SolverBudget, Stopwatch, Tour, improves

log = logging.getLogger(__name__)

__all__ = ["solve_tsp"]


def _adjacency(D: np.ndarray):
    n = len(D)
    finite = np.isfinite(D)
    np.fill_diagonal(finite, False)
    return [np.nonzero(finite[v])[0].tolist() for v in range(n)]


def _hub(D: np.ndarray, dummy: Optional[int]) -> Optional[int]:
    if dummy is None:
        return None
    others = np.delete(np.arange(len(D)), dummy)
    return dummy if np.all(np.isfinite(D[dummy, others])) else None


def _construct(D, adj, hub, rng, complete: bool):
    n = len(D)
    if complete and n > 2:
        # nearest neighbor from a random start
        start = int(rng.integers(n))
        t = [start]
        seen = np.zeros(n, dtype=bool)
        seen[start] = True
        for _ in range(n - 1):
            row = np.where(seen, np.inf, D[t[-1]])
            nxt = int(np.argmin(row))
            t.append(nxt)
            seen[nxt] = True
        return t
    return _local.construct_cycle(adj, D, rng, hub=hub)


def _expand_missing(D: np.ndarray) -> np.ndarray:
    """Fill missing edges with graph shortest-path distances."""
    W = np.where(np.isfinite(D), D, 0.0)
    np.fill_diagonal(W, 0.0)
    from scipy.sparse import csr_matrix

    mask = np.isfinite(D) & ~np.eye(len(D), dtype=bool)
    G = csr_matrix((W[mask], np.nonzero(mask)), shape=D.shape)
    return shortest_path(G, directed=False)


def solve_tsp(
    graph: CartesianGraph,
    budget: SolverBudget = SolverBudget(),
    initial: Optional[Tour] = None,
    complete_missing: bool = False,
    on_improve: Optional[Callable[[Tuple[int, ...]], None]] = None,
    ils: bool = True,
) -> Tour:
    """Nearest-neighbor / Warnsdorff construction, then 2-opt + Or-opt ILS.

    With ``complete_missing`` the weight of a non-edge is the shortest-path
    distance through the graph, so the returned cycle may contain hops
    that are not mesh edges.  ``on_improve`` sees every new incumbent;
    ``ils=False`` stops after the first local optimum.
    """
    D = np.array(graph.weights, dtype=float)
    n = len(D)
    if complete_missing:
        D = _expand_missing(D)
    rng = np.random.default_rng(budget.seed)
    watch = Stopwatch(budget)
    if n <= 1:
        return Tour(tuple(range(n)), 0.0)
    adj = _adjacency(D)
    if any(len(a) == 0 for a in adj):
        raise InfeasibleError("graph has an isolated node")
    hub = _hub(D, graph.dummy_index)
    complete = bool(np.all(np.isfinite(D)))

    def local_search(t):
        while True:
            a = _local.two_opt(t, D)
            b = _local.or_opt(t, D)
            if not (a or b):
                return t

    t = None
    if initial is not None:
        t = [int(v) for v in initial.nodes]
        if sorted(t) != list(range(n)) or not np.isfinite(_local.tour_weight(t, D)):
            log.warning("ignoring infeasible initial tour")
            t = None
    for _attempt in range(20):
        if t is not None:
            break
        t = _construct(D, adj, hub, rng, complete)
    if t is None:
        raise InfeasibleError("no Hamiltonian cycle found under the sparse edge set")

    best = local_search(list(t))
    best_w = _local.tour_weight(best, D)
    watch.improved(best_w)
    if on_improve is not None:
        on_improve(tuple(best))
    current = list(best)
    rounds = 0
    while ils and not watch.done():
        rounds += 1
        cand = list(current)
        if rounds % 10 == 0:
            fresh = _construct(D, adj, hub, rng, complete)
            if fresh is not None:
                cand = fresh
        else:
            _local.kick(cand, D, rng)
        cand = local_search(cand)
        w = _local.tour_weight(cand, D)
        if improves(w, best_w):
            best, best_w = list(cand), w
            current = list(cand)
            watch.improved(w)
            if on_improve is not None:
                on_improve(tuple(best))
        else:
            current = list(best)
            watch.stalled()
    return Tour(tuple(best), best_w, tuple(watch.history))
