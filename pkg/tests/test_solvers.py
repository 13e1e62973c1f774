import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from surfcover.graphs import CartesianGraph, JointGraph, add_dummy
from surfcover.solvers import (
    InfeasibleError,
    SolverBudget,
    Tour,
    brute_force_gtsp,
    brute_force_tsp,
    cluster_optimize,
    cycle_to_path,
    solve_gtsp,
    solve_tsp,
)
from surfcover.solvers.gtsp import tour_cost

FAST = SolverBudget(stagnation_iters=10)


def _tsp_weight(D, nodes):
    return sum(D[a, b] for a, b in zip(nodes, nodes[1:] + nodes[:1]))


def _polygon(n, r=1.0):
    ang = 2 * math.pi * np.arange(n) / n
    P = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
    return np.linalg.norm(P[:, None] - P[None], axis=2)


@pytest.mark.parametrize("n", [3, 5, 8])
def test_tsp_regular_polygon_is_its_perimeter(n):
    D = _polygon(n)
    perimeter = 2 * n * math.sin(math.pi / n)
    # shuffled labels so the identity order is not a giveaway
    p = np.random.default_rng(n).permutation(n)
    D = D[np.ix_(p, p)]
    assert brute_force_tsp(CartesianGraph(D)).weight == pytest.approx(perimeter)
    tour = solve_tsp(CartesianGraph(D), FAST)
    assert tour.weight == pytest.approx(perimeter)
    assert sorted(tour.nodes) == list(range(n))
    assert tour.weight == pytest.approx(_tsp_weight(D, list(tour.nodes)))


def test_tsp_unique_hamiltonian_cycle_on_sparse_graph():
    # a ring of 7 with chords that never close a shorter Hamiltonian cycle
    n = 7
    D = np.full((n, n), np.inf)
    np.fill_diagonal(D, 0)
    for i in range(n):
        D[i, (i + 1) % n] = D[(i + 1) % n, i] = 1.0
    D[0, 3] = D[3, 0] = 0.1
    tour = solve_tsp(CartesianGraph(D), FAST)
    assert tour.weight == 7.0
    nodes = list(tour.nodes)
    for a, b in zip(nodes, nodes[1:] + nodes[:1]):
        assert np.isfinite(D[a, b])


def test_tsp_infeasible_star():
    D = np.full((4, 4), np.inf)
    np.fill_diagonal(D, 0)
    for i in range(1, 4):
        D[0, i] = D[i, 0] = 1.0
    with pytest.raises(InfeasibleError):
        solve_tsp(CartesianGraph(D), FAST)


def test_tsp_complete_missing_uses_shortest_paths():
    # a path graph has no Hamiltonian cycle; completion allows the hop back
    D = np.full((4, 4), np.inf)
    np.fill_diagonal(D, 0)
    for i in range(3):
        D[i, i + 1] = D[i + 1, i] = 1.0
    tour = solve_tsp(CartesianGraph(D), FAST, complete_missing=True)
    assert tour.weight == pytest.approx(6.0)


def test_tsp_open_path_via_dummy():
    P = np.array([0.0, 1.0, 3.0, 6.0])
    D = np.abs(P[:, None] - P[None])
    g = add_dummy(CartesianGraph(D))
    path = cycle_to_path(solve_tsp(g, FAST), g.dummy_index)
    assert path.nodes in ((0, 1, 2, 3), (3, 2, 1, 0))
    assert path.weight == pytest.approx(6.0)


def test_tsp_trivial_sizes():
    assert solve_tsp(CartesianGraph(np.zeros((1, 1)))).nodes == (0,)
    assert brute_force_tsp(CartesianGraph(np.zeros((1, 1)))).weight == 0.0
    with pytest.raises(ValueError):
        brute_force_tsp(CartesianGraph(np.zeros((11, 11))))


def test_tsp_seed_determinism():
    rng = np.random.default_rng(0)
    P = rng.random((30, 2))
    g = CartesianGraph(np.linalg.norm(P[:, None] - P[None], axis=2))
    a = solve_tsp(g, SolverBudget(stagnation_iters=15, seed=3))
    b = solve_tsp(g, SolverBudget(stagnation_iters=15, seed=3))
    assert a.nodes == b.nodes and a.weight == b.weight


# ---------------------------------------------------------------- GTSP

# three sets; cost(i, j, k) = W01[i,j] + W12[j,k] + W02[i,k]
# hand-solved optimum: (1, 1, 0) -> 4 + 0.5 + 0.2 = 4.7
HAND = {
    (0, 1): [[1.0, 5.0], [4.0, 4.0]],
    (1, 2): [[3.0, 9.0], [0.5, 2.0]],
    (0, 2): [[1.0, 7.0], [0.2, 6.0]],
}


def test_gtsp_hand_instance():
    g = JointGraph.from_blocks([2, 2, 2], HAND)
    best = min(
        HAND[(0, 1)][i][j] + HAND[(1, 2)][j][k] + HAND[(0, 2)][i][k]
        for i in range(2)
        for j in range(2)
        for k in range(2)
    )
    assert best == pytest.approx(4.7)
    assert brute_force_gtsp(g).weight == pytest.approx(4.7)
    tour = solve_gtsp(g, FAST)
    assert tour.weight == pytest.approx(4.7)
    assert sorted(s for s, _ in tour.nodes) == [0, 1, 2]
    cost, choice = cluster_optimize(g, [0, 1, 2])
    assert cost == pytest.approx(4.7) and list(choice) == [1, 1, 0]


def test_gtsp_avoids_missing_edges():
    inf = np.inf
    blocks = {
        (0, 1): [[1.0, inf], [inf, 1.0]],
        (1, 2): [[inf, 1.0], [inf, inf]],
        (0, 2): [[inf, inf], [2.0, 0.0]],
    }
    g = JointGraph.from_blocks([2, 2, 2], blocks)
    # every node choice hits at least one missing edge
    assert math.isinf(brute_force_gtsp(g).weight)
    with pytest.raises(InfeasibleError):
        solve_gtsp(g, FAST)
    blocks[(1, 2)] = [[inf, 1.0], [inf, 3.0]]
    g = JointGraph.from_blocks([2, 2, 2], blocks)
    assert brute_force_gtsp(g).weight == 4.0
    assert solve_gtsp(g, FAST).weight == 4.0


def test_gtsp_empty_set_rejected():
    g = JointGraph.from_blocks([2, 0], {(0, 1): np.zeros((2, 0))})
    with pytest.raises(InfeasibleError):
        solve_gtsp(g)


def test_gtsp_hint_is_never_worsened():
    rng = np.random.default_rng(7)
    S = 12
    blocks = {(a, b): rng.random((3, 3)) for a in range(S) for b in range(a + 1, S)}
    g = JointGraph.from_blocks([3] * S, blocks)
    hint = Tour(tuple((s, 0) for s in range(S)), 0.0)
    hint_cost = tour_cost(g, list(range(S)), np.zeros(S, dtype=int))
    tour = solve_gtsp(g, FAST, initial_hint=hint, ils=False)
    assert tour.weight <= hint_cost
    weights = [w for _, w in tour.history]
    assert weights == sorted(weights, reverse=True)


def _random_instance(seed, S, sparse):
    rng = np.random.default_rng(seed)
    sizes = [int(rng.integers(1, 4)) for _ in range(S)]
    blocks = {}
    for a in range(S):
        for b in range(a + 1, S):
            if sparse and rng.random() < 0.3:
                continue
            W = rng.random((sizes[a], sizes[b]))
            if sparse:
                W[rng.random(W.shape) < 0.2] = np.inf
            blocks[(a, b)] = W
    return JointGraph.from_blocks(sizes, blocks)


@given(st.integers(0, 10**6), st.integers(3, 5), st.booleans())
def test_gtsp_tour_is_consistent(seed, S, sparse):
    g = _random_instance(seed, S, sparse)
    bf = brute_force_gtsp(g)
    try:
        tour = solve_gtsp(g, SolverBudget(stagnation_iters=5, seed=seed))
    except InfeasibleError:
        assert math.isinf(bf.weight)
        return
    order = [s for s, _ in tour.nodes]
    choice = np.zeros(S, dtype=int)
    for s, i in tour.nodes:
        choice[s] = i
    assert sorted(order) == list(range(S))
    assert tour.weight == pytest.approx(tour_cost(g, order, choice))
    assert tour.weight >= bf.weight - 1e-12


def test_gtsp_seed_determinism():
    g = _random_instance(3, 25, sparse=False)
    a = solve_gtsp(g, SolverBudget(stagnation_iters=10, seed=2))
    b = solve_gtsp(g, SolverBudget(stagnation_iters=10, seed=2))
    assert a.nodes == b.nodes and a.weight == b.weight


def test_budget_validation_and_cycle_to_path():
    with pytest.raises(ValueError):
        SolverBudget(time_cap=0)
    with pytest.raises(ValueError):
        SolverBudget(stagnation_iters=0)
    assert SolverBudget(seed=1).with_seed(5).seed == 5
    with pytest.raises(ValueError):
        cycle_to_path(Tour((0, 1, 2), 1.0), 7)
    assert cycle_to_path(Tour((1, 3, 0, 2), 1.0), 3).nodes == (0, 2, 1)
    assert cycle_to_path(Tour(((1, 0), (2, 1), (0, 0)), 1.0), 2).nodes == ((0, 0), (1, 0))
