"""End-to-end coverage planners: Cart-TSP-IKLink, Joint-GTSP and H-Joint-GTSP."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .graphs import (
    EdgeEvaluator,
    JointGraph,
    ReconfigParams,
    add_dummy,
    build_cartesian_graph,
    build_joint_graph,
    default_reconfig_params,
    reconfig_matrix,
)
from .kinematics import POS_ACCURACY, ROT_ACCURACY, KinematicChain, ToleranceSpec, pose_error_batch
from .sampling import MERGE_EPS, IKSampleSet, sample_targets
from .solvers import InfeasibleError, SolverBudget, Tour, cycle_to_path, solve_gtsp, solve_tsp
from .solvers.gtsp import tour_cost
from .surface import EndEffectorTarget, SurfaceMesh, compute_targets

log = logging.getLogger(__name__)

__all__ = [
    "Trajectory",
    "PlanningError",
    "PlannerParams",
    "iklink_dp",
    "plan_cart_tsp_iklink",
    "plan_joint_gtsp",
    "plan_h_joint_gtsp",
    "plan",
    "validate_trajectory",
    "METHODS",
]


class PlanningError(InfeasibleError):
    """Planning cannot cover every target."""

    def __init__(self, message: str, unreachable: Sequence[int] = ()):
        super().__init__(message)
        self.unreachable = tuple(unreachable)


@dataclass(frozen=True)
class Trajectory:
    """Joint-space path: ``configs[i]`` reaches target ``order[i]``.

    ``breakpoints`` holds each step index ``i`` where moving from
    ``configs[i]`` to ``configs[i + 1]`` needs a reconfiguration.
    """

    order: Tuple[int, ...]
    configs: np.ndarray
    breakpoints: FrozenSet[int] = frozenset()

    def __post_init__(self):
        q = np.asarray(self.configs, dtype=float)
        if q.ndim != 2 or len(q) != len(self.order):
            raise ValueError("need one configuration per visited target")
        object.__setattr__(self, "order", tuple(int(i) for i in self.order))
        object.__setattr__(self, "configs", q)
        object.__setattr__(self, "breakpoints", frozenset(int(b) for b in self.breakpoints))
        bad = [b for b in self.breakpoints if not 0 <= b < len(q) - 1]
        if bad:
            raise ValueError(f"breakpoint indices out of range: {sorted(bad)}")

    def __len__(self) -> int:
        return len(self.order)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.order == other.order
            and self.breakpoints == other.breakpoints
            and self.configs.shape == other.configs.shape
            and bool(np.array_equal(self.configs, other.configs))
        )

    __hash__ = None

    @property
    def reconfigurations(self) -> int:
        return len(self.breakpoints)

    def movement(self) -> float:
        """Total joint L2 movement, excluding reconfiguration steps."""
        if len(self.configs) < 2:
            return 0.0
        steps = np.linalg.norm(np.diff(self.configs, axis=0), axis=1)
        keep = np.ones(len(steps), dtype=bool)
        keep[list(self.breakpoints)] = False
        return float(steps[keep].sum())


@dataclass(frozen=True)
class PlannerParams:
    """Knobs shared by the three planners.

    ``reconfig`` and ``M`` default to mesh/robot-scaled values when None.
    ``window``, ``segment``, ``overlap`` and the ``refine_*`` knobs only
    affect H-Joint-GTSP.  ``refine_rounds`` caps the perturbation rounds
    of the final pass (None: run to the budget's stagnation rule; 0:
    descent only).  ``refine_window`` is the guide distance used for the final
    pass (None: every mesh edge).  ``window_rounds`` caps the
    perturbation rounds per window the same way.
    """

    samples: int = 100
    alpha: float = 0.1
    seed: int = 0
    merge_eps: float = MERGE_EPS
    min_pts: int = 1
    ik_budget: int = 150
    reconfig: Optional[ReconfigParams] = None
    M: Optional[float] = None
    budget: SolverBudget = field(default_factory=SolverBudget)
    window: int = 3
    segment: int = 50
    overlap: int = 10
    global_refine: bool = True
    refine_rounds: Optional[int] = None
    refine_window: Optional[int] = None
    window_rounds: Optional[int] = None
    complete_missing: bool = False
    tsp_candidates: int = 5

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.window < 1 or self.segment < 2 or not 0 <= self.overlap < self.segment:
            raise ValueError("need window >= 1, segment >= 2 and 0 <= overlap < segment")
        if self.tsp_candidates < 1:
            raise ValueError("tsp_candidates must be >= 1")
        if self.refine_rounds is not None and self.refine_rounds < 0:
            raise ValueError("refine_rounds must be non-negative")
        if self.window_rounds is not None and self.window_rounds < 0:
            raise ValueError("window_rounds must be non-negative")
        if self.refine_window is not None and self.refine_window < 1:
            raise ValueError("refine_window must be >= 1")

    def solver_budget(self) -> SolverBudget:
        return self.budget.with_seed(self.seed)


# ---------------------------------------------------------------- DP


def iklink_dp(
    order: Sequence[int],
    samples: Sequence[np.ndarray],
    reconfig: Callable[[int, int], np.ndarray],
) -> Tuple[np.ndarray, FrozenSet[int], Tuple[int, float], List[int]]:
    """Pick one sample per waypoint minimizing (reconfigurations, movement).

    ``samples[t]`` is the candidate array of target ``t``;
    ``reconfig(i, j)`` returns the boolean flag matrix oriented from target
    ``i`` to target ``j``.  A reconfiguration step costs one and no
    movement.  Ties go to smaller movement, then to the lower index.

    Returns ``(configs, breakpoints, (reconfigs, movement), choice)``.
    """
    order = list(order)
    if not order:
        return np.zeros((0, 0)), frozenset(), (0, 0.0), []
    Q = [np.asarray(samples[t], dtype=float) for t in order]
    empty = [t for t, q in zip(order, Q) if len(q) == 0]
    if empty:
        raise PlanningError(f"targets without IK solutions: {empty}", empty)
    r = np.zeros(len(Q[0]), dtype=int)
    mv = np.zeros(len(Q[0]))
    back = []
    for k in range(1, len(order)):
        F = np.asarray(reconfig(order[k - 1], order[k]), dtype=bool)
        dist = np.linalg.norm(Q[k - 1][:, None, :] - Q[k][None, :, :], axis=2)
        r_tot = r[:, None] + F
        mv_tot = mv[:, None] + np.where(F, 0.0, dist)
        best_r = r_tot.min(axis=0)
        masked = np.where(r_tot == best_r[None, :], mv_tot, np.inf)
        arg = masked.argmin(axis=0)
        cols = np.arange(len(Q[k]))
        r, mv = r_tot[arg, cols], mv_tot[arg, cols]
        back.append(arg)
    best_r = r.min()
    x = int(np.argmin(np.where(r == best_r, mv, np.inf)))
    cost = (int(r[x]), float(mv[x]))
    choice = [x]
    for arg in reversed(back):
        x = int(arg[x])
        choice.append(x)
    choice.reverse()
    configs = np.array([Q[k][c] for k, c in enumerate(choice)])
    bps = frozenset(
        k for k in range(len(order) - 1) if reconfig(order[k], order[k + 1])[choice[k], choice[k + 1]]
    )
    return configs, bps, cost, choice


# ---------------------------------------------------------------- shared setup


@dataclass
class _Context:
    mesh: SurfaceMesh
    chain: KinematicChain
    tol: ToleranceSpec
    params: PlannerParams
    targets: List[EndEffectorTarget]
    samples: List[IKSampleSet]
    rparams: ReconfigParams
    evaluator: EdgeEvaluator

    def flags(self, i: int, j: int) -> np.ndarray:
        return self.evaluator(i, j)[1]


def _prepare(mesh: SurfaceMesh, chain: KinematicChain, tol: ToleranceSpec, params: PlannerParams) -> _Context:
    targets = compute_targets(mesh)
    samples = sample_targets(
        chain, targets, tol, params.samples, params.seed, params.merge_eps, params.min_pts, params.ik_budget
    )
    unreachable = [s.target_index for s in samples if len(s) == 0]
    if unreachable:
        raise PlanningError(f"unreachable targets: {unreachable}", unreachable)
    rparams = params.reconfig or default_reconfig_params(mesh, targets, params.alpha)
    ev = EdgeEvaluator(chain, targets, samples, rparams, params.alpha, params.M)
    return _Context(mesh, chain, tol, params, targets, samples, rparams, ev)


def _single(ctx: _Context) -> Trajectory:
    return Trajectory((0,), ctx.samples[0].configs[:1], frozenset())


def _cartesian_path(ctx: _Context, on_improve=None, ils: bool = True) -> List[int]:
    g = add_dummy(build_cartesian_graph(ctx.mesh, ctx.targets, ctx.params.alpha))
    tour = solve_tsp(
        g, ctx.params.solver_budget(), complete_missing=ctx.params.complete_missing, on_improve=on_improve, ils=ils
    )
    return [int(v) for v in cycle_to_path(tour, g.dummy_index).nodes]


def _tracked_guide(ctx: _Context, rough: bool = False):
    """Cartesian TSP path(s) tracked by the IKLink DP.

    The DP runs on the last few improving TSP paths, reusing the same IK
    samples, and the lexicographically best tracking wins.  A ``rough``
    guide stops at the first TSP local optimum.  Returns
    ``(order, configs, breakpoints, cost, choice)``.
    """
    candidates: List[Tuple[int, ...]] = []

    def keep(cycle):
        candidates.append(cycle)
        del candidates[: -ctx.params.tsp_candidates]

    _cartesian_path(ctx, on_improve=keep, ils=not rough)
    best = None
    for cycle in reversed(candidates):
        order = [int(v) for v in cycle_to_path(Tour(cycle, 0.0), ctx.mesh.n).nodes]
        configs, bps, cost, choice = iklink_dp(order, [s.configs for s in ctx.samples], ctx.flags)
        if best is None or cost < best[3]:
            best = (order, configs, bps, cost, choice)
    return best


def _from_gtsp_path(ctx: _Context, graph: JointGraph, nodes: Sequence[Tuple[int, int]]) -> Trajectory:
    order = [graph.set_targets[s] for s, _ in nodes]
    configs = np.array([graph.configs[s][i] for s, i in nodes])
    bps = []
    for k in range(len(nodes) - 1):
        (a, i), (b, j) = nodes[k], nodes[k + 1]
        if graph.flags(a, b)[i, j]:
            bps.append(k)
    return Trajectory(tuple(order), configs, frozenset(bps))


# ---------------------------------------------------------------- planners


def plan_cart_tsp_iklink(mesh: SurfaceMesh, chain: KinematicChain, tol: ToleranceSpec, params: PlannerParams = PlannerParams()) -> Trajectory:
    """Cartesian TSP path, then IKLink DP over the shared IK samples."""
    ctx = _prepare(mesh, chain, tol, params)
    if mesh.n == 1:
        return _single(ctx)
    order, configs, bps, _, _ = _tracked_guide(ctx)
    return Trajectory(tuple(order), configs, bps)


def plan_joint_gtsp(mesh: SurfaceMesh, chain: KinematicChain, tol: ToleranceSpec, params: PlannerParams = PlannerParams()) -> Trajectory:
    """GTSP over every IK sample of every mesh-adjacent target pair."""
    ctx = _prepare(mesh, chain, tol, params)
    if mesh.n == 1:
        return _single(ctx)
    g = build_joint_graph(chain, ctx.targets, ctx.samples, mesh.sorted_edges(), ctx.rparams, evaluator=ctx.evaluator)
    g = add_dummy(g)
    tour = solve_gtsp(g, params.solver_budget())
    return _from_gtsp_path(ctx, g, cycle_to_path(tour, g.dummy).nodes)


def _sparse_edges(mesh: SurfaceMesh, guide: Sequence[int], w: int) -> List[Tuple[int, int]]:
    pos = np.empty(mesh.n, dtype=int)
    pos[list(guide)] = np.arange(len(guide))
    edges = {(i, j) for i, j in mesh.edges if abs(pos[i] - pos[j]) <= w}
    # guide hops are always kept so the guide itself stays feasible
    for a, b in zip(guide, guide[1:]):
        edges.add((min(a, b), max(a, b)))
    return sorted(edges)


def _window_graph(ctx, members, edges, anchor, end):
    """Sub-GTSP over ``members`` (targets); anchor is a fixed (target, config)."""
    index = {t: k for k, t in enumerate(members)}
    configs = [ctx.samples[t].configs for t in members]
    set_targets = list(members)
    blocks = {}
    for i, j in edges:
        if i in index and j in index:
            a, b = index[i], index[j]
            W, F = ctx.evaluator(i, j)
            blocks[(a, b) if a < b else (b, a)] = (W, F) if a < b else (W.T, F.T)
    links = []
    if anchor is not None:
        t0, c0 = anchor
        s0 = len(configs)
        configs.append(ctx.samples[t0].configs[c0 : c0 + 1])
        set_targets.append(t0)
        for i, j in edges:
            other = j if i == t0 else i if j == t0 else None
            if other is not None and other in index:
                W, F = ctx.evaluator(t0, other)
                blocks[(index[other], s0)] = (W[c0 : c0 + 1].T, F[c0 : c0 + 1].T)
        links.append(s0)
    g = JointGraph(configs, set_targets, blocks, ctx.evaluator.M)
    if end is None:
        return add_dummy(g)
    start = links[0] if links else index[members[0]]
    return add_dummy(g, connect_to=[start, index[end]])


def _choice_array(graph: JointGraph, nodes) -> np.ndarray:
    choice = np.zeros(graph.set_count, dtype=int)
    for s, c in nodes:
        choice[s] = c
    return choice


def _oriented_path(graph: JointGraph, tour: Tour, first_set: Optional[int]) -> List[Tuple[int, int]]:
    nodes = list(cycle_to_path(tour, graph.dummy).nodes)
    if first_set is not None and nodes and nodes[0][0] != first_set:
        nodes.reverse()
    return nodes


def _solve_window(ctx, members, guide_edges_fn, w, anchor, end, hint_nodes):
    """Solve one window, doubling the window width on infeasibility."""
    for attempt in range(5):
        edges = guide_edges_fn(w)
        g = _window_graph(ctx, members, edges, anchor, end)
        index = {t: k for k, t in enumerate(members)}
        hint = None
        if hint_nodes is not None:
            seq = [(g.dummy, 0)]
            if anchor is not None:
                seq.append((len(members), 0))
            seq += [(index[t], c) for t, c in hint_nodes]
            hint = Tour(tuple(seq), 0.0)
        try:
            rounds = ctx.params.window_rounds
            tour = solve_gtsp(g, ctx.params.solver_budget(), initial_hint=hint, ils=rounds != 0, max_rounds=rounds)
        except InfeasibleError:
            w *= 2
            log.info("window infeasible under sparsification; widening to w=%d", w)
            continue
        first = None
        if end is not None:
            first = len(members) if anchor is not None else index[members[0]]
        path = _oriented_path(g, tour, first)
        if anchor is not None:
            path = path[1:]
        return [(g.set_targets[s], c) for s, c in path], w
    raise PlanningError("window stayed infeasible after widening")


def plan_h_joint_gtsp(mesh: SurfaceMesh, chain: KinematicChain, tol: ToleranceSpec, params: PlannerParams = PlannerParams()) -> Trajectory:
    """Guide path, sparsified joint graph and a sequence of window GTSPs.

    1. Guide: a rough Cartesian TSP path (first local optimum), tracked
       by the IKLink DP to get a starting node per target.
    2. Sparsify: keep mesh edges whose endpoints are at most ``window``
       apart along the guide.
    3. Windows of ``segment`` targets are solved in guide order.  Each
       starts from the last committed node and must end at the last guide
       target it covers; the final ``overlap`` targets of its path are
       re-solved with the next window.  A surface that fits in one
       segment skips straight to step 4.
    4. One refinement pass over the whole graph, warm-started from
       the better of the concatenation and the tracked guide.
    """
    ctx = _prepare(mesh, chain, tol, params)
    n = mesh.n
    if n == 1:
        return _single(ctx)
    guide, _, _, _, guide_choice = _tracked_guide(ctx, rough=True)
    tracked = list(zip(guide, guide_choice))

    edge_cache: Dict[int, List[Tuple[int, int]]] = {}

    def edges_for(w):
        w = min(w, n)
        if w not in edge_cache:
            edge_cache[w] = _sparse_edges(mesh, guide, w)
        return edge_cache[w]

    nodes = tracked
    if n > params.segment:
        nodes = _solve_windows(ctx, guide, guide_choice, edges_for)

    refine_w = n if params.refine_window is None else params.refine_window
    g = build_joint_graph(chain, ctx.targets, ctx.samples, edges_for(refine_w), ctx.rparams, evaluator=ctx.evaluator)
    g = add_dummy(g)
    order_of = lambda seq: [g.dummy] + [t for t, _ in seq]
    if tour_cost(g, order_of(tracked), _choice_array(g, tracked)) < tour_cost(g, order_of(nodes), _choice_array(g, nodes)):
        nodes = tracked
    if params.global_refine and n > 2:
        rounds = params.refine_rounds
        hint = Tour(((g.dummy, 0),) + tuple(nodes), 0.0)
        tour = solve_gtsp(g, params.solver_budget(), initial_hint=hint, ils=rounds != 0, max_rounds=rounds)
        nodes = list(cycle_to_path(tour, g.dummy).nodes)
    return _from_gtsp_path(ctx, g, nodes)


def _solve_windows(ctx: _Context, guide, guide_choice, edges_for) -> List[Tuple[int, int]]:
    params = ctx.params
    n = len(guide)
    s, o = params.segment, params.overlap
    committed: List[Tuple[int, int]] = []
    pending: List[Tuple[int, int]] = []
    anchor = None
    pos = 0
    while pos < n:
        step = max(1, s - len(pending))
        block = guide[pos : pos + step]
        block_nodes = [(t, guide_choice[pos + k]) for k, t in enumerate(block)]
        pos += len(block)
        last = pos >= n
        members = [t for t, _ in pending] + list(block)
        # each window runs from the anchor (or the guide start) to the last
        # guide target it covers, so the guide stays a feasible solution
        path, _ = _solve_window(ctx, members, edges_for, params.window, anchor, block[-1], pending + block_nodes)
        if last:
            committed += path
            pending = []
            break
        keep = max(1, len(path) - o)
        committed += path[:keep]
        pending = path[keep:]
        anchor = committed[-1]
    return committed + pending


METHODS = {
    "cart-tsp-iklink": plan_cart_tsp_iklink,
    "joint-gtsp": plan_joint_gtsp,
    "h-joint-gtsp": plan_h_joint_gtsp,
}


def plan(method: str, mesh, chain, tol, params: PlannerParams = PlannerParams()) -> Trajectory:
    try:
        fn = METHODS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; expected one of {sorted(METHODS)}") from None
    return fn(mesh, chain, tol, params)


# ---------------------------------------------------------------- validation


def validate_trajectory(
    traj: Trajectory,
    targets: Sequence[EndEffectorTarget],
    chain: KinematicChain,
    tol: ToleranceSpec,
    rparams: ReconfigParams,
    alpha: float = 0.1,
    pos_accuracy: float = POS_ACCURACY,
    rot_accuracy: float = ROT_ACCURACY,
) -> List[str]:
    """Independent re-check of a trajectory; returns a list of problems."""
    problems = []
    n = len(targets)
    if sorted(traj.order) != list(range(n)):
        problems.append("order is not a permutation of the targets")
        return problems
    if traj.configs.shape[1] != chain.dof:
        problems.append(f"configs have {traj.configs.shape[1]} joints, chain has {chain.dof}")
        return problems
    out = (traj.configs < chain.lower - 1e-9) | (traj.configs > chain.upper + 1e-9)
    for k in np.nonzero(out.any(axis=1))[0]:
        problems.append(f"step {k}: configuration outside joint limits")
    pos, rot = chain.fk_batch(traj.configs)
    for k, t in enumerate(traj.order):
        pe, re = pose_error_batch(pos[k : k + 1], rot[k : k + 1], targets[t], tol)
        if pe[0] > pos_accuracy:
            problems.append(f"step {k}: position error {pe[0]:.3g} m at target {t}")
        if re is not None and re[0] > rot_accuracy:
            problems.append(f"step {k}: rotation error {re[0]:.3g} rad at target {t}")
    for k in range(len(traj) - 1):
        a, b = traj.order[k], traj.order[k + 1]
        flag = bool(reconfig_matrix(chain, targets[a], traj.configs[k], targets[b], traj.configs[k + 1], rparams, alpha)[0, 0])
        if flag != (k in traj.breakpoints):
            what = "unmarked reconfiguration" if flag else "breakpoint without reconfiguration"
            problems.append(f"step {k}->{k + 1}: {what}")
    return problems
