import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from surfcover.graphs import (
    CartesianGraph,
    GraphError,
    JointGraph,
    ReconfigParams,
    add_dummy,
    build_cartesian_graph,
    build_joint_graph,
    default_big_m,
    reconfig_matrix,
    reconfig_required,
)
from surfcover.kinematics import ToleranceSpec, bundled_chain
from surfcover.sampling import IKSampleSet, sample_targets
from surfcover.solvers import Tour, cycle_to_path
from surfcover.surface import EndEffectorTarget, compute_targets, generate_benchmark_surface


def test_floor_grid_weights_are_euclidean():
    mesh = generate_benchmark_surface("floor-grid", nx=2, ny=2, spacing=0.1)
    g = build_cartesian_graph(mesh, compute_targets(mesh))
    for i, j in mesh.edges:
        d = np.linalg.norm(mesh.vertices[i] - mesh.vertices[j])
        assert g.weights[i, j] == pytest.approx(d, abs=1e-15)
    # the 2x2 grid has one diagonal, so exactly one pair is missing
    assert np.isinf(g.weights).sum() == 2
    assert len(g.edges()) == 5


def test_cartesian_graph_mismatch():
    mesh = generate_benchmark_surface("floor-grid", nx=2, ny=2)
    with pytest.raises(GraphError):
        build_cartesian_graph(mesh, compute_targets(mesh)[:3])


def test_add_dummy_cartesian():
    W = np.array([[0, 1, np.inf], [1, 0, 2], [np.inf, 2, 0]], float)
    g = add_dummy(CartesianGraph(W))
    assert g.dummy_index == 3
    assert np.array_equal(g.weights[:3, :3], W)
    assert np.all(g.weights[3, :3] == 0)
    with pytest.raises(GraphError):
        add_dummy(g)
    partial = add_dummy(CartesianGraph(W), connect_to=[0, 2])
    assert np.isinf(partial.weights[3, 1])


@given(st.integers(3, 8), st.integers(0, 10**6))
def test_dummy_preserves_path_weight(n, seed):
    rng = np.random.default_rng(seed)
    W = rng.random((n, n))
    W = W + W.T
    g = add_dummy(CartesianGraph(W))
    perm = [int(v) for v in rng.permutation(n + 1)]
    cycle_w = sum(g.weights[a, b] for a, b in zip(perm, perm[1:] + perm[:1]))
    path = cycle_to_path(Tour(tuple(perm), cycle_w), n).nodes
    path_w = sum(W[a, b] for a, b in zip(path, path[1:]))
    assert sorted(path) == list(range(n))
    assert path_w == pytest.approx(cycle_w, rel=1e-12)


def test_add_dummy_joint_graph():
    g = JointGraph.from_blocks([2, 3], {(0, 1): np.ones((2, 3))})
    d = add_dummy(g, connect_to=[1])
    assert d.dummy == 2 and d.set_sizes == [2, 3, 1]
    assert d.block(1, 2).shape == (3, 1) and d.block(0, 2) is None
    assert np.all(d.block(2, 1) == 0)
    with pytest.raises(TypeError):
        add_dummy(object())


def test_from_blocks_orientation():
    W = np.arange(6.0).reshape(3, 2)
    g = JointGraph.from_blocks([2, 3], {(1, 0): W})
    assert np.array_equal(g.block(1, 0), W)
    assert np.array_equal(g.block(0, 1), W.T)
    assert g.weight(1, 2, 0, 1) == 5.0
    assert g.neighbors() == [[1], [0]]
    assert g.edge_count() == 6


def _params():
    return ReconfigParams(tau1=0.2, tau2=math.pi / 2, tau3=0.05)


def _setup():
    chain = bundled_chain("arm7")
    mesh = generate_benchmark_surface("floor-grid", nx=3, ny=3)
    targets = compute_targets(mesh)
    samples = sample_targets(chain, targets, ToleranceSpec.preset("free-spin"), 20, seed=0)
    return chain, mesh, targets, samples


def test_reconfig_rules():
    chain, mesh, targets, samples = _setup()
    p = _params()
    a, b = 0, 1
    Qa, Qb = samples[a].configs, samples[b].configs
    # identical configuration at the same target never needs a reconfiguration
    assert not reconfig_required(chain, (targets[a], Qa[0]), (targets[a], Qa[0]), p)
    # tau1: far apart targets always need one
    far = EndEffectorTarget(targets[a].position + [1.0, 0, 0], targets[a].normal)
    assert reconfig_matrix(chain, targets[a], Qa, far, Qb, p).all()
    # tau2: a joint jump larger than tau2
    q2 = Qa[0].copy()
    q2[0] += 1.7 if q2[0] < 0 else -1.7
    assert reconfig_required(chain, (targets[a], Qa[0]), (targets[a], q2), p)
    # the test is symmetric in its endpoints
    F = reconfig_matrix(chain, targets[a], Qa, targets[b], Qb, p)
    G = reconfig_matrix(chain, targets[b], Qb, targets[a], Qa, p)
    assert np.array_equal(F, G.T)


def test_tau3_catches_a_swinging_interpolant():
    chain, mesh, targets, samples = _setup()
    q = samples[0].configs[0]
    # a large but sub-tau2 move in the elbow lifts the tool far off the surface midway
    q2 = q.copy()
    q2[3] = np.clip(q[3] + 1.4, chain.lower[3], chain.upper[3])
    loose = ReconfigParams(tau1=10.0, tau2=10.0, tau3=1e-4)
    assert reconfig_required(chain, (targets[0], q), (targets[0], q2), loose)
    assert not reconfig_required(chain, (targets[0], q), (targets[0], q2), ReconfigParams(10.0, 10.0, 10.0))


def test_joint_graph_weights():
    chain, mesh, targets, samples = _setup()
    p = _params()
    g = build_joint_graph(chain, targets, samples, mesh.sorted_edges(), p)
    M = default_big_m(chain)
    assert g.M == M
    assert g.set_sizes == [len(s) for s in samples]
    for (a, b), (W, F) in g.blocks.items():
        assert (a, b) in mesh.edges
        L2 = np.linalg.norm(samples[a].configs[:, None] - samples[b].configs[None], axis=2)
        assert np.array_equal(W, np.where(F, M, L2))
        assert np.array_equal(F, reconfig_matrix(chain, targets[a], samples[a].configs, targets[b], samples[b].configs, p))
    non_edge = next((i, j) for i in range(mesh.n) for j in range(i + 1, mesh.n) if (i, j) not in mesh.edges)
    assert g.block(*non_edge) is None


def test_joint_graph_rejects_empty_sets():
    chain, mesh, targets, samples = _setup()
    samples = list(samples)
    samples[2] = IKSampleSet(2, np.zeros((0, 7)))
    with pytest.raises(GraphError, match=r"\[2\]"):
        build_joint_graph(chain, targets, samples, mesh.sorted_edges(), _params())


def test_reconfig_params_validation():
    with pytest.raises(ValueError):
        ReconfigParams(0.0, 1.0, 1.0)
