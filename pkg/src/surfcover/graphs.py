"""Cartesian TSP graphs, joint-space GTSP graphs and the reconfiguration test."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .kinematics import KinematicChain
from .sampling import IKSampleSet
from .surface import EndEffectorTarget, SurfaceMesh, cartesian_distance, cartesian_distance_arrays, target_arrays

__all__ = [
    "GraphError",
    "CartesianGraph",
    "JointGraph",
    "ReconfigParams",
    "build_cartesian_graph",
    "add_dummy",
    "reconfig_required",
    "reconfig_matrix",
    "EdgeEvaluator",
    "build_joint_graph",
    "default_reconfig_params",
    "default_big_m",
]


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class CartesianGraph:
    """Dense symmetric weight matrix; ``inf`` marks a missing edge."""

    weights: np.ndarray
    dummy_index: Optional[int] = None

    @property
    def node_count(self) -> int:
        return len(self.weights)

    def edges(self) -> List[Tuple[int, int, float]]:
        n = self.node_count
        iu = np.triu_indices(n, 1)
        w = self.weights[iu]
        mask = np.isfinite(w)
        return [(int(i), int(j), float(x)) for i, j, x in zip(iu[0][mask], iu[1][mask], w[mask])]


@dataclass(frozen=True)
class ReconfigParams:
    tau1: float
    tau2: float
    tau3: float
    interp_steps: int = 10

    def __post_init__(self):
        if min(self.tau1, self.tau2, self.tau3) <= 0 or self.interp_steps < 1:
            raise ValueError("reconfiguration thresholds must be positive")


@dataclass
class JointGraph:
    """GTSP instance: node sets with dense weight blocks between set pairs.

    ``blocks[(a, b)]`` (always ``a < b``) holds an ``|a| x |b|`` weight
    matrix (``inf`` = no edge) and a matching boolean reconfiguration-flag
    matrix.  Set pairs without a key share no edges.
    """

    configs: List[np.ndarray]
    set_targets: List[int]
    blocks: Dict[Tuple[int, int], Tuple[np.ndarray, np.ndarray]]
    M: float
    dummy: Optional[int] = None
    _neighbors: Optional[List[List[int]]] = field(default=None, repr=False)

    @property
    def set_count(self) -> int:
        return len(self.configs)

    @property
    def set_sizes(self) -> List[int]:
        return [len(c) for c in self.configs]

    @property
    def node_count(self) -> int:
        return sum(self.set_sizes)

    def edge_count(self) -> int:
        return int(sum(np.isfinite(W).sum() for W, _ in self.blocks.values()))

    def neighbors(self) -> List[List[int]]:
        if self._neighbors is None:
            adj = [[] for _ in range(self.set_count)]
            for (a, b), (W, _) in self.blocks.items():
                if np.isfinite(W).any():
                    adj[a].append(b)
                    adj[b].append(a)
            self._neighbors = [sorted(x) for x in adj]
        return self._neighbors

    def block(self, a: int, b: int) -> Optional[np.ndarray]:
        """Weights oriented from set ``a`` to set ``b``, or None."""
        if a < b:
            entry = self.blocks.get((a, b))
            return None if entry is None else entry[0]
        entry = self.blocks.get((b, a))
        return None if entry is None else entry[0].T

    def flags(self, a: int, b: int) -> Optional[np.ndarray]:
        if a < b:
            entry = self.blocks.get((a, b))
            return None if entry is None else entry[1]
        entry = self.blocks.get((b, a))
        return None if entry is None else entry[1].T

    def weight(self, a: int, i: int, b: int, j: int) -> float:
        W = self.block(a, b)
        return math.inf if W is None else float(W[i, j])

    @classmethod
    def from_blocks(cls, set_sizes: Sequence[int], blocks: dict, M: float = 1e6, flags: Optional[dict] = None):
        """Build an abstract instance (no kinematics) from weight blocks."""
        configs = [np.zeros((s, 0)) for s in set_sizes]
        norm = {}
        for (a, b), W in blocks.items():
            W = np.asarray(W, dtype=float)
            F = np.asarray(flags[(a, b)], dtype=bool) if flags and (a, b) in flags else W >= M
            if a > b:
                a, b, W, F = b, a, W.T, F.T
            norm[(a, b)] = (W, F)
        return cls(configs, list(range(len(set_sizes))), norm, M)


# ---------------------------------------------------------------- Cartesian


def build_cartesian_graph(mesh: SurfaceMesh, targets: Sequence[EndEffectorTarget], alpha: float = 0.1) -> CartesianGraph:
    if len(targets) != mesh.n:
        raise GraphError("targets must align with mesh vertices")
    n = mesh.n
    W = np.full((n, n), np.inf)
    np.fill_diagonal(W, 0.0)
    for i, j in mesh.edges:
        d = cartesian_distance(targets[i], targets[j], alpha)
        W[i, j] = W[j, i] = d
    W.setflags(write=False)
    return CartesianGraph(W)


def add_dummy(graph, connect_to: Optional[Iterable[int]] = None):
    """Append a node (own set for joint graphs) joined by zero-weight edges.

    ``connect_to`` restricts which nodes/sets the dummy touches; by default
    it touches all of them.
    """
    if isinstance(graph, CartesianGraph):
        if graph.dummy_index is not None:
            raise GraphError("graph already has a dummy node")
        n = graph.node_count
        W = np.full((n + 1, n + 1), np.inf)
        W[:n, :n] = graph.weights
        targets = range(n) if connect_to is None else list(connect_to)
        for i in targets:
            W[i, n] = W[n, i] = 0.0
        W[n, n] = 0.0
        W.setflags(write=False)
        return CartesianGraph(W, dummy_index=n)
    if isinstance(graph, JointGraph):
        if graph.dummy is not None:
            raise GraphError("graph already has a dummy set")
        d = graph.set_count
        k = graph.configs[0].shape[1] if graph.configs else 0
        blocks = dict(graph.blocks)
        sets = range(d) if connect_to is None else list(connect_to)
        for s in sets:
            size = len(graph.configs[s])
            blocks[(s, d)] = (np.zeros((size, 1)), np.zeros((size, 1), dtype=bool))
        return JointGraph(
            list(graph.configs) + [np.zeros((1, k))],
            list(graph.set_targets) + [-1],
            blocks,
            graph.M,
            dummy=d,
        )
    raise TypeError(f"cannot add a dummy to {type(graph).__name__}")


# ---------------------------------------------------------------- reconfiguration


def _interp_weights(steps: int) -> List[Tuple[float, float]]:
    """Interior lerp weights ordered from t=0.5 outward.

    Both weights are exact integer ratios so that swapping the endpoints
    reproduces the same interpolants bit for bit.
    """
    d = steps + 1
    ls = sorted(range(1, d), key=lambda l: (abs(2 * l - d), l))
    return [((d - l) / d, l / d) for l in ls]


def reconfig_matrix(
    chain: KinematicChain,
    ta: EndEffectorTarget,
    Qa: np.ndarray,
    tb: EndEffectorTarget,
    Qb: np.ndarray,
    params: ReconfigParams,
    alpha: float = 0.1,
    chunk: int = 40000,
) -> np.ndarray:
    """Reconfiguration flags for every config pair, shape (|Qa|, |Qb|)."""
    Qa = np.asarray(Qa, dtype=float).reshape(-1, chain.dof)
    Qb = np.asarray(Qb, dtype=float).reshape(-1, chain.dof)
    flags = np.zeros((len(Qa), len(Qb)), dtype=bool)
    if flags.size == 0:
        return flags
    if cartesian_distance(ta, tb, alpha) > params.tau1:
        flags[:] = True
        return flags
    jump = np.abs(Qa[:, None, :] - Qb[None, :, :]).max(axis=2)
    flags |= jump > params.tau2
    ia, ib = np.nonzero(~flags)
    for w0, w1 in _interp_weights(params.interp_steps):
        if len(ia) == 0:
            break
        still = np.ones(len(ia), dtype=bool)
        for start in range(0, len(ia), chunk):
            sl = slice(start, start + chunk)
            theta = w0 * Qa[ia[sl]] + w1 * Qb[ib[sl]]
            pos, rot = chain.fk_batch(theta)
            nrm = -rot[:, :, 2]
            da = cartesian_distance_arrays(pos, nrm, ta.position, ta.normal, alpha)
            db = cartesian_distance_arrays(pos, nrm, tb.position, tb.normal, alpha)
            off = np.minimum(da, db) > params.tau3
            still[sl] = ~off
        flags[ia[~still], ib[~still]] = True
        ia, ib = ia[still], ib[still]
    return flags


def reconfig_required(chain: KinematicChain, a, b, params: ReconfigParams, alpha: float = 0.1) -> bool:
    """``a`` and ``b`` are ``(EndEffectorTarget, config)`` pairs."""
    (ta, qa), (tb, qb) = a, b
    return bool(reconfig_matrix(chain, ta, np.atleast_2d(qa), tb, np.atleast_2d(qb), params, alpha)[0, 0])


def default_big_m(chain: KinematicChain) -> float:
    return 10.0 * chain.diameter()


def default_reconfig_params(mesh: SurfaceMesh, targets: Sequence[EndEffectorTarget], alpha: float = 0.1) -> ReconfigParams:
    """Thresholds scaled to the mesh: tau1 = 3x and tau3 = 1x the mean edge distance."""
    P, N = target_arrays(targets)
    e = np.array(sorted(mesh.edges))
    mean_edge = float(cartesian_distance_arrays(P[e[:, 0]], N[e[:, 0]], P[e[:, 1]], N[e[:, 1]], alpha).mean())
    return ReconfigParams(tau1=3.0 * mean_edge, tau2=math.pi / 2, tau3=mean_edge, interp_steps=10)


# ---------------------------------------------------------------- joint graph


class EdgeEvaluator:
    """Lazily computes and caches joint-space weight/flag blocks per target pair."""

    def __init__(self, chain, targets, samples: Sequence[IKSampleSet], params: ReconfigParams, alpha=0.1, M=None):
        self.chain = chain
        self.targets = targets
        self.samples = samples
        self.params = params
        self.alpha = alpha
        self.M = default_big_m(chain) if M is None else float(M)
        self._cache: Dict[Tuple[int, int], Tuple[np.ndarray, np.ndarray]] = {}

    def __call__(self, i: int, j: int) -> Tuple[np.ndarray, np.ndarray]:
        """(weights, flags) oriented from target ``i`` to target ``j``."""
        key = (i, j) if i < j else (j, i)
        if key not in self._cache:
            a, b = key
            Qa, Qb = self.samples[a].configs, self.samples[b].configs
            F = reconfig_matrix(self.chain, self.targets[a], Qa, self.targets[b], Qb, self.params, self.alpha)
            W = np.linalg.norm(Qa[:, None, :] - Qb[None, :, :], axis=2)
            W[F] = self.M
            self._cache[key] = (W, F)
        W, F = self._cache[key]
        return (W, F) if i < j else (W.T, F.T)


def build_joint_graph(
    chain: KinematicChain,
    targets: Sequence[EndEffectorTarget],
    samples: Sequence[IKSampleSet],
    edges: Iterable[Tuple[int, int]],
    params: ReconfigParams,
    M: Optional[float] = None,
    alpha: float = 0.1,
    evaluator: Optional[EdgeEvaluator] = None,
) -> JointGraph:
    """One set per target; every config pair of mesh-adjacent targets is an edge.

    Edge weight is the joint-space L2 distance, or ``M`` when a
    reconfiguration is required.  Non-adjacent target pairs get no edge.
    """
    empty = [s.target_index for s in samples if len(s.configs) == 0]
    if empty:
        raise GraphError(f"targets without IK solutions: {empty}")
    ev = evaluator or EdgeEvaluator(chain, targets, samples, params, alpha, M)
    blocks = {}
    for i, j in edges:
        if i == j:
            continue
        a, b = (i, j) if i < j else (j, i)
        blocks[(a, b)] = ev(a, b)
    return JointGraph([s.configs for s in samples], [s.target_index for s in samples], blocks, ev.M)
