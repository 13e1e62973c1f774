import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from surfcover.graphs import default_reconfig_params
from surfcover.kinematics import ToleranceSpec, bundled_chain
from surfcover.planners import (
    METHODS,
    PlannerParams,
    PlanningError,
    Trajectory,
    iklink_dp,
    plan,
    plan_h_joint_gtsp,
    validate_trajectory,
)
from surfcover.solvers import SolverBudget
from surfcover.surface import compute_targets, generate_benchmark_surface

FREE = ToleranceSpec.preset("free-spin")
QUICK = PlannerParams(samples=24, budget=SolverBudget(stagnation_iters=8, stagnation_secs=1.0))


def test_trajectory_movement_skips_breakpoints():
    q = np.array([[0.0, 0.0], [0.3, 0.4], [0.6, 0.8]])
    t = Trajectory((0, 1, 2), q, frozenset({0}))
    assert t.reconfigurations == 1
    assert t.movement() == pytest.approx(0.5)
    assert Trajectory((0, 1, 2), q).movement() == pytest.approx(1.0)


def test_trajectory_identical_configs_move_zero():
    q = np.ones((4, 3))
    assert Trajectory((0, 1, 2, 3), q).movement() == 0.0


def test_trajectory_hand_listed_deltas():
    deltas = np.array([[1.0, 2.0, 2.0], [0.0, 3.0, 4.0], [1.0, 1.0, 1.0]])
    q = np.vstack([np.zeros(3), np.cumsum(deltas, axis=0)])
    assert Trajectory((3, 1, 0, 2), q).movement() == pytest.approx(3.0 + 5.0 + np.sqrt(3.0))


def test_trajectory_validation_and_equality():
    with pytest.raises(ValueError):
        Trajectory((0, 1), np.zeros((3, 2)))
    with pytest.raises(ValueError, match="out of range"):
        Trajectory((0, 1), np.zeros((2, 2)), frozenset({1}))
    a = Trajectory((0, 1), np.zeros((2, 2)))
    assert a == Trajectory([0, 1], [[0, 0], [0, 0]])
    assert a != Trajectory((1, 0), np.zeros((2, 2)))


def test_planner_params_validation():
    for bad in (dict(samples=0), dict(alpha=-1), dict(segment=5, overlap=5), dict(refine_rounds=-1)):
        with pytest.raises(ValueError):
            PlannerParams(**bad)


# ---------------------------------------------------------------- IKLink DP

def _flags_from(table):
    return lambda i, j: np.asarray(table[(i, j)], dtype=bool)


def test_dp_hand_instance():
    samples = {0: np.array([[0.0], [1.0]]), 1: np.array([[0.2], [5.0]]), 2: np.array([[0.0], [5.1]])}
    flags = {
        (0, 1): [[0, 1], [0, 1]],
        (1, 2): [[1, 0], [0, 0]],
    }
    configs, bps, cost, choice = iklink_dp([0, 1, 2], samples, _flags_from(flags))
    # zero reconfigurations forces 0.2 -> 5.1 (4.9) from 0.0 (0.2) or 1.0 (0.8)
    assert cost == (0, pytest.approx(5.1))
    assert choice == [0, 0, 1]
    assert bps == frozenset()
    assert configs.tolist() == [[0.0], [0.2], [5.1]]


def test_dp_prefers_fewer_reconfigurations_over_movement():
    samples = {0: np.array([[0.0]]), 1: np.array([[0.0], [3.0]])}
    flags = {(0, 1): [[1, 0]]}
    _, bps, cost, choice = iklink_dp([0, 1], samples, _flags_from(flags))
    assert cost == (0, 3.0) and choice == [0, 1] and not bps


def test_dp_ties_pick_lower_index():
    samples = {0: np.array([[0.0]]), 1: np.array([[1.0], [-1.0]])}
    _, _, cost, choice = iklink_dp([0, 1], samples, lambda i, j: np.zeros((1, 2), bool))
    assert cost == (0, 1.0) and choice == [0, 0]


def test_dp_reports_empty_waypoints():
    with pytest.raises(PlanningError) as err:
        iklink_dp([0, 1], {0: np.zeros((1, 1)), 1: np.zeros((0, 1))}, None)
    assert err.value.unreachable == (1,)


def exhaustive_dp(order, samples, reconfig):
    best = None
    for choice in itertools.product(*[range(len(samples[t])) for t in order]):
        r, mv = 0, 0.0
        for k in range(len(order) - 1):
            if reconfig(order[k], order[k + 1])[choice[k], choice[k + 1]]:
                r += 1
            else:
                mv += float(np.linalg.norm(samples[order[k]][choice[k]] - samples[order[k + 1]][choice[k + 1]]))
        if best is None or (r, mv) < best:
            best = (r, mv)
    return best


@st.composite
def dp_instances(draw):
    n = draw(st.integers(1, 6))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    sizes = [int(rng.integers(1, 5)) for _ in range(n)]
    samples = {t: rng.normal(size=(sizes[t], 3)) for t in range(n)}
    p = rng.random()
    flags = {}
    for a in range(n - 1):
        F = rng.random((sizes[a], sizes[a + 1])) < p
        flags[(a, a + 1)] = F
    return list(range(n)), samples, _flags_from(flags)


@given(dp_instances())
def test_dp_matches_exhaustive(inst):
    order, samples, reconfig = inst
    configs, bps, cost, choice = iklink_dp(order, samples, reconfig)
    r, mv = exhaustive_dp(order, samples, reconfig)
    assert cost[0] == r and cost[1] == pytest.approx(mv, abs=1e-9)
    assert len(bps) == r
    t = Trajectory(tuple(order), configs, bps)
    assert t.movement() == pytest.approx(mv, abs=1e-9)


# ---------------------------------------------------------------- planners


@pytest.fixture(scope="module")
def grid():
    mesh = generate_benchmark_surface("floor-grid", nx=3, ny=4)
    return mesh, compute_targets(mesh), bundled_chain("arm7")


@pytest.mark.parametrize("method", sorted(METHODS))
def test_planners_produce_valid_trajectories(grid, method):
    mesh, targets, chain = grid
    traj = plan(method, mesh, chain, FREE, QUICK)
    rp = default_reconfig_params(mesh, targets)
    assert validate_trajectory(traj, targets, chain, FREE, rp) == []
    assert sorted(traj.order) == list(range(mesh.n))


@pytest.mark.parametrize("method", sorted(METHODS))
def test_planners_are_seed_deterministic(grid, method):
    mesh, _, chain = grid
    a = plan(method, mesh, chain, FREE, QUICK)
    b = plan(method, mesh, chain, FREE, QUICK)
    assert a == b


def test_h_joint_gtsp_with_windows(grid):
    mesh = generate_benchmark_surface("floor-grid", nx=4, ny=4)
    targets = compute_targets(mesh)
    chain = grid[2]
    params = PlannerParams(samples=24, segment=6, overlap=2, budget=QUICK.budget)
    traj = plan_h_joint_gtsp(mesh, chain, FREE, params)
    assert validate_trajectory(traj, targets, chain, FREE, default_reconfig_params(mesh, targets)) == []
    no_refine = plan_h_joint_gtsp(mesh, chain, FREE, PlannerParams(samples=24, segment=6, overlap=2, global_refine=False, budget=QUICK.budget))
    assert validate_trajectory(no_refine, targets, chain, FREE, default_reconfig_params(mesh, targets)) == []
    assert (traj.reconfigurations, traj.movement()) <= (no_refine.reconfigurations, no_refine.movement() + 1e-9)


def test_unreachable_targets_are_reported(grid):
    _, _, chain = grid
    far = generate_benchmark_surface("floor-grid", nx=2, ny=2, origin=(3.0, 0.0, 0.0))
    with pytest.raises(PlanningError) as err:
        plan("joint-gtsp", far, chain, FREE, QUICK)
    assert err.value.unreachable == (0, 1, 2, 3)


def test_unknown_method(grid):
    mesh, _, chain = grid
    with pytest.raises(ValueError, match="unknown method"):
        plan("greedy", mesh, chain, FREE, QUICK)


def test_validator_catches_tampering(grid):
    mesh, targets, chain = grid
    traj = plan("cart-tsp-iklink", mesh, chain, FREE, QUICK)
    rp = default_reconfig_params(mesh, targets)
    dup = Trajectory((traj.order[0],) + traj.order[:-1], traj.configs, traj.breakpoints)
    assert "permutation" in validate_trajectory(dup, targets, chain, FREE, rp)[0]
    bent = traj.configs.copy()
    bent[3, 1] += 0.05
    problems = validate_trajectory(Trajectory(traj.order, bent, traj.breakpoints), targets, chain, FREE, rp)
    assert any("step 3: position error" in p for p in problems)
    marked = Trajectory(traj.order, traj.configs, traj.breakpoints | {0})
    if 0 not in traj.breakpoints:
        assert any("breakpoint without reconfiguration" in p for p in validate_trajectory(marked, targets, chain, FREE, rp))
    out = traj.configs.copy()
    out[0, 0] = chain.upper[0] + 1.0
    assert any("joint limits" in p for p in validate_trajectory(Trajectory(traj.order, out, traj.breakpoints), targets, chain, FREE, rp))
