"""Exhaustive reference solvers.

Every routine here is exact and slow.  Size guards raise instead of falling
back to anything approximate.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Sequence

import numpy as np

from .metric import Backend, MetricPoint, pairwise_matrix


class OracleGuardError(ValueError):
    """Instance too large for exhaustive search."""


@dataclass
class OracleResult:
    value: float
    witness: Any


def _locs(P) -> list:
    return [p.loc if isinstance(p, MetricPoint) else p for p in P]


def fn_exact(P: Sequence[MetricPoint], C: Sequence, backend: Backend) -> tuple[int, float]:
    """Exact furthest point of ``P`` from the set ``C``; ties to the smallest id."""
    if not P:
        raise ValueError("point set is empty")
    C = _locs(C)
    if not C:
        raise ValueError("query set is empty")
    best_id, best = None, -1.0
    for p in sorted(P, key=lambda p: p.id):
        d = min(backend.distance(p.loc, c) for c in C)
        if d > best:
            best_id, best = p.id, d
    return best_id, best


def furthest_set(P: Sequence[MetricPoint], C: Sequence, backend: Backend) -> tuple[float, list[int]]:
    """Maximum distance to ``C`` and every point attaining it."""
    C = _locs(C)
    ds = {p.id: min(backend.distance(p.loc, c) for c in C) for p in P}
    m = max(ds.values())
    return m, sorted(i for i, d in ds.items() if d == m)


def check_metric(matrix, tol: float = 0.0) -> tuple[bool, str | None]:
    """Check symmetry, zero diagonal, nonnegativity and the triangle inequality."""
    D = np.asarray(matrix, dtype=float)
    n = D.shape[0]
    if D.shape != (n, n):
        return False, "matrix is not square"
    if (np.diag(D) != 0).any():
        return False, "nonzero diagonal"
    if (D != D.T).any():
        return False, "not symmetric"
    if (D < 0).any():
        return False, "negative entry"
    for k in range(n):
        viol = D > D[:, k, None] + D[None, k, :] + tol * np.abs(D)
        if viol.any():
            i, j = np.argwhere(viol)[0]
            return False, f"triangle inequality fails: d({i},{j}) > d({i},{k}) + d({k},{j})"
    return True, None


# -- metric k-center ---------------------------------------------------------

def kcenter_exact_metric(P: Sequence[MetricPoint], k: int, backend: Backend,
                         max_n: int = 40, max_k: int = 3) -> OracleResult:
    """Optimal radius over all center sets ``C`` drawn from ``P`` with ``|C| <= k``.

    The witness is the tuple of center ids.
    """
    n = len(P)
    if n == 0:
        raise ValueError("point set is empty")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    ids = [p.id for p in P]
    if k >= n:
        return OracleResult(0.0, tuple(sorted(ids)))
    if n > max_n or k > max_k:
        raise OracleGuardError(f"exhaustive metric k-center limited to n <= {max_n}, "
                               f"k <= {max_k}; got n={n}, k={k}")
    D = pairwise_matrix(_locs(P), backend)
    best, wit = math.inf, None
    # with k < n, using exactly k centers is never worse
    for combo in itertools.combinations(range(n), k):
        r = float(D[list(combo)].min(axis=0).max())
        if r < best:
            best, wit = r, combo
    return OracleResult(best, tuple(ids[i] for i in wit))


def _set_partitions(n: int, k: int):
    """All partitions of ``range(n)`` into at most ``k`` non-empty blocks."""
    def rec(i, blocks):
        if i == n:
            yield [list(b) for b in blocks]
            return
        for b in blocks:
            b.append(i)
            yield from rec(i + 1, blocks)
            b.pop()
        if len(blocks) < k:
            blocks.append([i])
            yield from rec(i + 1, blocks)
            blocks.pop()
    yield from rec(0, [])


def kcenter_partition_metric(P: Sequence[MetricPoint], k: int, backend: Backend,
                             max_n: int = 12) -> OracleResult:
    """Second enumeration: partitions into at most ``k`` groups, best in-group center."""
    n = len(P)
    if n > max_n:
        raise OracleGuardError(f"partition enumeration limited to n <= {max_n}")
    D = pairwise_matrix(_locs(P), backend)
    best, wit = math.inf, None
    for part in _set_partitions(n, k):
        r = max(float(D[np.ix_(b, b)].max(axis=1).min()) for b in part)
        if r < best:
            best, wit = r, part
    return OracleResult(best, [[P[i].id for i in b] for b in wit])


# -- minimum enclosing ball ----------------------------------------------------

def _circumballs(X: np.ndarray, subsets: np.ndarray):
    """Centers and radii of the smallest balls through each row-subset of ``X``.

    The center of the smallest ball through affinely independent points lies in
    their affine hull; solve ``G a = b`` with ``G`` the Gram matrix of edge
    vectors.  Degenerate subsets come back with ``nan`` radius.
    """
    base = X[subsets[:, 0]]                       # (m, D)
    m, s = subsets.shape
    if s == 1:
        return base.copy(), np.zeros(m)
    V = X[subsets[:, 1:]] - base[:, None, :]      # (m, s-1, D)
    G = np.einsum("mid,mjd->mij", V, V)
    b = 0.5 * np.einsum("mid,mid->mi", V, V)
    det = np.linalg.det(G)
    scale = np.prod(np.einsum("mid,mid->mi", V, V), axis=1)
    ok = np.abs(det) > 1e-12 * np.maximum(scale, 1e-300)
    a = np.full((m, s - 1), np.nan)
    if ok.any():
        a[ok] = np.linalg.solve(G[ok], b[ok][..., None])[..., 0]
    centers = base + np.einsum("mi,mid->md", a, V)
    radii = np.sqrt(np.einsum("md,md->m", centers - base, centers - base))
    return centers, radii


def _hull_candidates(X: np.ndarray) -> np.ndarray:
    n, D = X.shape
    if D == 1 or n <= D + 1:
        return np.arange(n) if D > 1 else np.array(sorted({int(X[:, 0].argmin()),
                                                           int(X[:, 0].argmax())}))
    from scipy.spatial import ConvexHull, QhullError
    try:
        return np.asarray(sorted(ConvexHull(X).vertices))
    except QhullError:  # flat input: hull is lower dimensional
        return np.arange(n)


def meb_exact(P, max_dim: int = 3, max_n: int = 500, chunk: int = 200_000) -> OracleResult:
    """Smallest enclosing ball by support-subset enumeration.

    The optimal ball is the smallest ball through some affinely independent
    subset of at most ``D + 1`` points that covers everything.  Support points
    are extreme points, so only convex-hull vertices are enumerated.  Witness is
    ``(center, support_indices)``.
    """
    X = np.asarray(_locs(P), dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("need a non-empty (n, D) point array")
    n, D = X.shape
    if D > max_dim or n > max_n:
        raise OracleGuardError(f"exact MEB limited to D <= {max_dim}, n <= {max_n}; "
                               f"got D={D}, n={n}")
    if n == 1:
        return OracleResult(0.0, (tuple(X[0]), (0,)))
    H = _hull_candidates(X)
    cands = []
    for s in range(2, min(D + 1, len(H)) + 1):
        combos = np.array(list(itertools.combinations(H, s)), dtype=np.intp)
        for lo in range(0, len(combos), chunk):
            sub = combos[lo:lo + chunk]
            c, r = _circumballs(X, sub)
            keep = np.isfinite(r)
            cands.append((r[keep], c[keep], sub[keep], s))
    # test candidate balls in increasing radius until one covers
    radii = np.concatenate([r for r, _, _, _ in cands])
    order = np.argsort(radii, kind="stable")
    offsets = np.cumsum([0] + [len(r) for r, _, _, _ in cands])
    for idx in order:
        blk = int(np.searchsorted(offsets, idx, side="right") - 1)
        r, c, sub, _ = cands[blk]
        j = idx - offsets[blk]
        center = c[j]
        far = np.sqrt(((X - center) ** 2).sum(axis=1)).max()
        if far <= r[j] * (1 + 1e-12) + 1e-300:
            # report the exact covering radius of this center
            return OracleResult(float(far), (tuple(center), tuple(int(i) for i in sub[j])))
    raise RuntimeError("no support subset covers the point set")


def _ball_candidates(X: np.ndarray):
    """Smallest ball through each subset of size <= D+1, keyed by the points it covers."""
    n, D = X.shape
    best = {}
    for s in range(1, min(D + 1, n) + 1):
        combos = np.array(list(itertools.combinations(range(n), s)), dtype=np.intp)
        c, r = _circumballs(X, combos)
        for ci, ri in zip(c, r):
            if not np.isfinite(ri):
                continue
            dist = np.sqrt(((X - ci) ** 2).sum(axis=1))
            mask = int(sum(1 << i for i in np.nonzero(dist <= ri * (1 + 1e-12))[0]))
            if mask not in best or ri < best[mask][1]:
                best[mask] = (mask, float(ri), tuple(ci))
    return list(best.values())


def kcenter_exact_euclidean(P, k: int, max_n: int = 20, max_k: int = 3) -> OracleResult:
    """Optimal Euclidean k-center radius with free centers.

    Every cluster of an optimal solution is covered by its own minimum
    enclosing ball, which is the smallest ball through at most ``D + 1`` of the
    points.  So the optimum equals the best choice of ``k`` such balls covering
    everything; this is searched by recursion on the lowest uncovered point,
    then each group's radius is recomputed exactly with :func:`meb_exact`.
    Witness is the list of groups (point indices).
    """
    X = np.asarray(_locs(P), dtype=float)
    n = len(X)
    if n == 0:
        raise ValueError("point set is empty")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k == 1:
        res = meb_exact(X)
        return OracleResult(res.value, [list(range(n))])
    if n > max_n or k > max_k:
        raise OracleGuardError(f"exact Euclidean k-center limited to n <= {max_n}, "
                               f"k <= {max_k}; got n={n}, k={k}")
    balls = sorted(_ball_candidates(X), key=lambda b: b[1])
    full = (1 << n) - 1

    @lru_cache(maxsize=None)
    def solve(rem: int, kk: int):
        if rem == 0:
            return 0.0, ()
        if kk == 0:
            return math.inf, ()
        low = rem & -rem
        best, wit = math.inf, ()
        for mask, r, _ in balls:
            if r >= best:
                break
            if mask & low:
                sub, w = solve(rem & ~mask, kk - 1)
                v = max(r, sub)
                if v < best:
                    best, wit = v, ((rem & mask),) + w
        return best, wit

    _, masks = solve(full, k)
    groups = [[i for i in range(n) if m >> i & 1] for m in masks]
    value = max(meb_exact(X[g]).value for g in groups)
    return OracleResult(value, groups)


def kcenter_partition_euclidean(P, k: int, max_n: int = 12) -> OracleResult:
    """Literal definition: min over partitions into <= k groups of the largest group MEB."""
    X = np.asarray(_locs(P), dtype=float)
    n = len(X)
    if n > max_n:
        raise OracleGuardError(f"partition enumeration limited to n <= {max_n}")
    cache = {}

    def rad(group):
        key = tuple(group)
        if key not in cache:
            cache[key] = meb_exact(X[list(group)]).value
        return cache[key]

    best, wit = math.inf, None
    for part in _set_partitions(n, k):
        r = max(rad(b) for b in part)
        if r < best:
            best, wit = r, part
    return OracleResult(best, wit)
