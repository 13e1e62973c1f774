"""Per-target IK solution sets: random-restart IK followed by DBSCAN merging."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from sklearn.cluster import DBSCAN

from .kinematics import KinematicChain, ToleranceSpec, solve_ik_batch, solve_ik_rows
from .surface import EndEffectorTarget, target_arrays

__all__ = ["IKSampleSet", "sample_ik", "merge_clusters", "sample_targets", "MERGE_EPS"]

MERGE_EPS = 0.05


@dataclass(frozen=True)
class IKSampleSet:
    target_index: int
    configs: np.ndarray  # (c, k)

    def __len__(self) -> int:
        return len(self.configs)


def sample_ik(
    chain: KinematicChain,
    target: EndEffectorTarget,
    tol: ToleranceSpec,
    m: int,
    rng_seed,
    budget: int = 150,
) -> np.ndarray:
    """Run IK from ``m`` uniformly random seeds; keep the successes.

    Failed restarts are dropped, so fewer than ``m`` rows may come back.
    """
    if m < 0:
        raise ValueError("m must be non-negative")
    if m == 0:
        return np.zeros((0, chain.dof))
    rng = np.random.default_rng(rng_seed)
    seeds = chain.random_configs(rng, m)
    q, ok = solve_ik_batch(chain, target, tol, seeds, budget=budget)
    return q[ok]


def merge_clusters(configs, eps: float = MERGE_EPS, min_pts: int = 1) -> np.ndarray:
    """Collapse each DBSCAN cluster (joint-space L2) to its medoid.

    With ``min_pts == 1`` nothing is discarded.  Representatives keep the
    relative order of their original indices.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    X = np.asarray(configs, dtype=float)
    if len(X) == 0:
        return X.reshape(0, X.shape[-1] if X.ndim == 2 else 0)
    labels = DBSCAN(eps=eps, min_samples=min_pts).fit(X).labels_
    keep = []
    for label in np.unique(labels):
        if label < 0:
            continue
        members = np.nonzero(labels == label)[0]
        if len(members) == 1:
            keep.append(members[0])
            continue
        pts = X[members]
        dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1).sum(axis=1)
        keep.append(members[int(np.argmin(dist))])
    return X[np.sort(np.array(keep, dtype=int))]


def target_seed(master_seed: int, target_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), int(target_index)])


def sample_targets(
    chain: KinematicChain,
    targets: Sequence[EndEffectorTarget],
    tol: ToleranceSpec,
    m: int,
    seed: int,
    eps: float = MERGE_EPS,
    min_pts: int = 1,
    budget: int = 150,
    chunk: int = 4096,
) -> List[IKSampleSet]:
    """Sample and merge IK solutions for every target.

    Each target draws from its own seed stream and IK rows never interact,
    so the result for a target does not depend on the other targets.
    All restarts are solved together in large batches.
    """
    if m < 1:
        raise ValueError("m must be positive")
    n = len(targets)
    if n == 0:
        return []
    P, N = target_arrays(targets)
    seeds = np.concatenate([chain.random_configs(np.random.default_rng(target_seed(seed, i)), m) for i in range(n)])
    rows = np.repeat(np.arange(n), m)
    q = np.empty_like(seeds)
    ok = np.empty(len(seeds), dtype=bool)
    for start in range(0, len(seeds), chunk):
        sl = slice(start, start + chunk)
        q[sl], ok[sl] = solve_ik_rows(chain, P[rows[sl]], N[rows[sl]], tol, seeds[sl], budget=budget)
    out = []
    for i in range(n):
        raw = q[i * m : (i + 1) * m][ok[i * m : (i + 1) * m]]
        merged = merge_clusters(raw, eps, min_pts) if len(raw) else raw
        out.append(IKSampleSet(i, merged))
    return out
