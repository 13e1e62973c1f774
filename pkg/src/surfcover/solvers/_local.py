"""Tour construction and local-search moves on a dense weight matrix.

Missing edges are ``inf`` in the matrix.  All moves keep the incumbent
feasible: a move whose new edges include an ``inf`` has an infinite
delta and is never applied.
"""

from __future__ import annotations

from typing import List, Optional, Sequence

import numpy as np

EPS = 1e-12


def tour_weight(t: Sequence[int], D: np.ndarray) -> float:
    if len(t) < 2:
        return 0.0
    arr = np.asarray(t)
    return float(D[arr, np.roll(arr, -1)].sum())


def construct_cycle(
    adj: List[List[int]],
    tie: Optional[np.ndarray],
    rng: np.random.Generator,
    hub: Optional[int] = None,
    start: Optional[int] = None,
    max_expansions: Optional[int] = None,
) -> Optional[List[int]]:
    """Randomized Warnsdorff depth-first search for a Hamiltonian cycle.

    ``hub`` is a node adjacent to every other node (the dummy); the search
    starts there, so it only has to find a Hamiltonian path through the
    rest.  Neighbors are tried by fewest unvisited neighbors first, then
    by ``tie`` weight.  Returns None when the expansion budget runs out or
    the search space is exhausted.
    """
    n = len(adj)
    if n == 0:
        return []
    if n == 1:
        return [0]
    adjsets = [set(a) for a in adj]
    noise = rng.random(n)
    deg = np.array([sum(1 for w in adj[v] if w != hub) for v in range(n)])
    if start is None:
        if hub is not None:
            start = hub
        else:
            start = int(min(range(n), key=lambda v: (deg[v], noise[v])))
    if max_expansions is None:
        max_expansions = 200 * n + 20000
    visited = np.zeros(n, dtype=bool)

    def visit(v):
        visited[v] = True
        for w in adj[v]:
            if w != hub:
                deg[w] -= 1

    def unvisit(v):
        visited[v] = False
        for w in adj[v]:
            if w != hub:
                deg[w] += 1

    def candidates(v):
        cand = [w for w in adj[v] if not visited[w] and w != hub]
        if tie is not None:
            return sorted(cand, key=lambda w: (deg[w], tie[v, w], noise[w]))
        return sorted(cand, key=lambda w: (deg[w], noise[w]))

    path = [start]
    visit(start)
    stack = [candidates(start)]
    target = n if hub is None or hub == start else n
    expansions = 0
    while stack:
        if len(path) == target:
            if hub is not None or start in adjsets[path[-1]]:
                return path
        cands = stack[-1]
        if not cands:
            stack.pop()
            unvisit(path.pop())
            continue
        u = cands.pop(0)
        expansions += 1
        if expansions > max_expansions:
            return None
        visit(u)
        # prune: unvisited nodes with no unvisited neighbors can only be
        # reached as the very next node (or be the end of an open path)
        dead = [w for w in np.nonzero((~visited) & (deg == 0))[0] if w != hub]
        remaining = n - len(path) - 1
        ok = True
        if remaining > 1:
            stranded = [w for w in dead if w not in adjsets[u]]
            limit = 1 if hub is not None else 0
            if len(stranded) > limit:
                ok = False
        if not ok:
            unvisit(u)
            continue
        path.append(u)
        stack.append(candidates(u))
    return None


def two_opt(t: List[int], D: np.ndarray) -> bool:
    """Best-improvement 2-opt to a local optimum (in place)."""
    N = len(t)
    if N < 4:
        return False
    arr = np.asarray(t)
    idx = np.arange(N)
    # pairs (i, j) with j >= i + 2, excluding the pair that shares an edge
    valid = idx[None, :] >= idx[:, None] + 2
    valid[0, N - 1] = False
    any_improved = False
    with np.errstate(invalid="ignore"):
        while True:
            a, b = arr, np.roll(arr, -1)
            cur = D[a, b]
            delta = D[a[:, None], a[None, :]] + D[b[:, None], b[None, :]] - cur[:, None] - cur[None, :]
            delta = np.where(valid, delta, np.inf)
            k = int(np.argmin(delta))
            i, j = divmod(k, N)
            if not delta[i, j] < -EPS:
                break
            arr[i + 1 : j + 1] = arr[i + 1 : j + 1][::-1].copy()
            any_improved = True
    t[:] = arr.tolist()
    return any_improved


def _or_moves(arr: np.ndarray, D: np.ndarray, L: int):
    """Deltas for moving every length-L segment next to every tour edge.

    Returns ``(fwd, rev)``, each (N, N): row = segment start position,
    column = position of the edge's first node.
    """
    N = len(arr)
    i = np.arange(N)
    s0, sL = arr, arr[(i + L - 1) % N]
    p, nx = arr[(i - 1) % N], arr[(i + L) % N]
    gain = D[p, nx] - D[p, s0] - D[sL, nx]
    X, Y = arr, np.roll(arr, -1)
    cur = D[X, Y]
    # edges touching the segment or its two boundary edges are excluded
    valid = ((i[None, :] - (i[:, None] - 1)) % N) > L
    fwd = gain[:, None] + D[X[None, :], s0[:, None]] + D[sL[:, None], Y[None, :]] - cur[None, :]
    rev = gain[:, None] + D[X[None, :], sL[:, None]] + D[s0[:, None], Y[None, :]] - cur[None, :]
    return np.where(valid, fwd, np.inf), np.where(valid, rev, np.inf)


def _move_segment(arr: np.ndarray, i: int, L: int, k: int, reverse: bool) -> np.ndarray:
    N = len(arr)
    seg = arr[(i + np.arange(L)) % N]
    rest = arr[(i + L + np.arange(N - L)) % N]
    kk = (k - (i + L)) % N
    ins = seg[::-1] if reverse else seg
    return np.concatenate([rest[: kk + 1], ins, rest[kk + 1 :]])


def or_opt(t: List[int], D: np.ndarray, max_len: int = 3) -> bool:
    """Move segments of 1..max_len nodes (optionally reversed), in place."""
    N = len(t)
    if N < 4:
        return False
    arr = np.asarray(t)
    any_improved = False
    with np.errstate(invalid="ignore"):
        while True:
            best = (-EPS, None)
            for L in range(1, min(max_len, N - 2) + 1):
                fwd, rev = _or_moves(arr, D, L)
                for reverse, M in ((False, fwd), (True, rev)):
                    k = int(np.argmin(M))
                    if M.flat[k] < best[0]:
                        best = (M.flat[k], (L, reverse) + divmod(k, N))
            if best[1] is None:
                break
            L, reverse, i, k = best[1]
            arr = _move_segment(arr, i, L, k, reverse)
            any_improved = True
    t[:] = arr.tolist()
    return any_improved


def kick(t: List[int], D: np.ndarray, rng: np.random.Generator, moves: int = 3, samples: int = 64) -> int:
    """Apply up to ``moves`` random feasible perturbations; returns how many.

    Each move is a double bridge, a segment reversal or a segment shift,
    drawn uniformly from candidates whose new edges all exist.
    """
    N = len(t)
    if N < 5:
        if N >= 3:
            # tiny cycles: a random rotation keeps it feasible
            k = int(rng.integers(N))
            t[:] = t[k:] + t[:k]
        return 0
    arr = np.asarray(t)
    done = 0
    for _ in range(3 * moves):
        if done >= moves:
            break
        kind = rng.random()
        if kind < 0.3 and N >= 8:
            cuts = np.sort(np.argsort(rng.random((samples, N - 1)), axis=1)[:, :3] + 1, axis=1)
            p1, p2, p3 = cuts.T
            ok = (
                np.isfinite(D[arr[p1 - 1], arr[p2]])
                & np.isfinite(D[arr[p3 - 1], arr[p1]])
                & np.isfinite(D[arr[p2 - 1], arr[p3 % N]])
            )
            hits = np.nonzero(ok)[0]
            if len(hits):
                a, b, c = (int(x) for x in cuts[hits[0]])
                arr = np.concatenate([arr[:a], arr[b:c], arr[a:b], arr[c:]])
                done += 1
        elif kind < 0.65:
            a, b = arr, np.roll(arr, -1)
            idx = np.arange(N)
            valid = idx[None, :] >= idx[:, None] + 2
            valid[0, N - 1] = False
            ok = valid & np.isfinite(D[a[:, None], a[None, :]]) & np.isfinite(D[b[:, None], b[None, :]])
            cand = np.flatnonzero(ok)
            if len(cand):
                i, j = divmod(int(rng.choice(cand)), N)
                arr[i + 1 : j + 1] = arr[i + 1 : j + 1][::-1].copy()
                done += 1
        else:
            L = int(rng.integers(1, 4))
            if L > N - 3:
                continue
            fwd, _ = _or_moves(arr, D, L)
            cand = np.flatnonzero(np.isfinite(fwd))
            if len(cand):
                i, k = divmod(int(rng.choice(cand)), N)
                arr = _move_segment(arr, i, L, k, False)
                done += 1
    t[:] = arr.tolist()
    return done
