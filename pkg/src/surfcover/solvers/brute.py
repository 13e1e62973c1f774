"""Exhaustive reference solvers for tiny instances (test oracles)."""

from __future__ import annotations

import itertools
import math

import numpy as np

from ..graphs import CartesianGraph, JointGraph
from .base import Tour

__all__ = ["brute_force_tsp", "brute_force_gtsp", "gtsp_enumeration_size"]

MAX_TSP_NODES = 10
MAX_GTSP_ENUMERATION = 1e7


def brute_force_tsp(graph: CartesianGraph) -> Tour:
    """Optimal cycle by enumerating every permutation with node 0 fixed."""
    D = np.asarray(graph.weights, dtype=float)
    n = len(D)
    if n > MAX_TSP_NODES:
        raise ValueError(f"brute force is limited to {MAX_TSP_NODES} nodes")
    if n <= 1:
        return Tour(tuple(range(n)), 0.0)
    perms = np.array(list(itertools.permutations(range(1, n))), dtype=int)
    full = np.hstack([np.zeros((len(perms), 1), dtype=int), perms])
    costs = D[full, np.roll(full, -1, axis=1)].sum(axis=1)
    k = int(np.argmin(costs))
    return Tour(tuple(int(v) for v in full[k]), float(costs[k]))


def gtsp_enumeration_size(graph: JointGraph) -> float:
    S = graph.set_count
    return math.factorial(max(S - 1, 0)) * math.prod(graph.set_sizes)


def brute_force_gtsp(graph: JointGraph) -> Tour:
    """Optimal GTSP cycle over all set orders and node choices.

    Returns weight ``inf`` (and an empty tour) if no feasible cycle exists.
    """
    S = graph.set_count
    if gtsp_enumeration_size(graph) > MAX_GTSP_ENUMERATION:
        raise ValueError("instance too large for exhaustive search")
    if S == 0:
        return Tour((), 0.0)
    if S == 1:
        return Tour(((0, 0),), 0.0)
    choices = np.array(list(itertools.product(*[range(s) for s in graph.set_sizes])), dtype=int)
    best_cost, best = math.inf, None
    for rest in itertools.permutations(range(1, S)):
        order = (0,) + rest
        cost = np.zeros(len(choices))
        for a, b in zip(order, order[1:] + order[:1]):
            W = graph.block(a, b)
            if W is None:
                cost[:] = np.inf
                break
            cost += W[choices[:, a], choices[:, b]]
        k = int(np.argmin(cost))
        if cost[k] < best_cost:
            best_cost = float(cost[k])
            best = tuple((s, int(choices[k, s])) for s in order)
    if best is None:
        return Tour((), math.inf)
    return Tour(best, best_cost)
