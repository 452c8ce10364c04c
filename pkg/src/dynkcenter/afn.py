"""Approximate furthest neighbour of a query set, by scale descent over a net.

Starting from the single point at the top scale, each step keeps the
navigation-list members whose distance to the query set is within ``r`` of the
best distance seen at the current scale, then halves ``r``.  The descent stops
once ``r`` drops to ``eps/2`` of that best distance or reaches the bottom
non-trivial scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .metric import MetricPoint, dist_to_set
from .net import NavigatingNet


@dataclass
class QueryStats:
    iterations: int
    max_frontier: int
    start_scale: int
    end_scale: int
    frontier_sizes: list[int]
    distance_evals: int = 0
    frontiers: Optional[list[list[int]]] = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {
            "iterations": self.iterations,
            "max_frontier": self.max_frontier,
            "start_scale": self.start_scale,
            "end_scale": self.end_scale,
            "frontier_sizes": list(self.frontier_sizes),
            "distance_evals": self.distance_evals,
        }


@dataclass
class Frontier:
    """Candidate set at one scale, with cached distances to the query set."""

    scale: int
    members: dict[int, float]

    @property
    def best(self) -> float:
        return max(self.members.values())


def query_locations(net: NavigatingNet, C) -> list:
    locs = [c.loc if isinstance(c, MetricPoint) else c for c in C]
    if not locs:
        raise ValueError("query set is empty")
    return [net.backend.location(c) for c in locs]


def afn(net: NavigatingNet, C: Sequence, eps: float, record: bool = False):
    """Return ``(point_id, d(point, C), QueryStats)``.

    The returned point ``q`` satisfies ``max_p d(p, C) <= (1 + eps) d(q, C)``.
    With ``record=True`` the stats carry the frontier at every visited scale.
    """
    if not len(net):
        raise ValueError("net is empty")
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    query = query_locations(net, C)
    pid, d, start, end, sizes, frontiers, evals = net._core.afn(query, float(eps), record)
    stats = QueryStats(
        iterations=start - end + 1,
        max_frontier=max(sizes),
        start_scale=start,
        end_scale=end,
        frontier_sizes=list(sizes),
        distance_evals=evals,
        frontiers=[list(f) for f in frontiers] if frontiers is not None else None,
    )
    return pid, d, stats


def initial_frontier(net: NavigatingNet, C: Sequence) -> Frontier:
    query = query_locations(net, C)
    root = net.root
    if root is None:
        raise ValueError("net is empty")
    return Frontier(net.r_max, {root: dist_to_set(net.location(root), query, net.backend)})


def next_frontier(net: NavigatingNet, Z: Frontier, C: Sequence) -> Frontier:
    """One descent step: the frontier at scale ``Z.scale - 1``."""
    if not Z.members:
        raise ValueError("frontier is empty")
    query = query_locations(net, C)
    r = math.ldexp(1.0, Z.scale)
    thr = Z.best - r
    out = {}
    seen = dict(Z.members)
    for z in sorted(Z.members):
        for y in sorted(net.navigation_list(z, Z.scale)):
            if y in out:
                continue
            d = seen.get(y)
            if d is None:
                d = dist_to_set(net.location(y), query, net.backend)
                seen[y] = d
            if d >= thr:
                out[y] = d
    return Frontier(Z.scale - 1, out)


def afn_stepwise(net: NavigatingNet, C: Sequence, eps: float):
    """Same descent as :func:`afn`, driven through :func:`next_frontier`.

    Slow; exists so the core's fused loop can be checked step by step.
    Returns ``(point_id, distance, frontiers)``.
    """
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    Z = initial_frontier(net, C)
    frontiers = [Z]
    while Z.scale > net.r_min and math.ldexp(1.0, Z.scale) > 0.5 * eps * Z.best:
        Z = next_frontier(net, Z, C)
        frontiers.append(Z)
    best = Z.best
    pid = min(y for y, d in Z.members.items() if d == best)
    return pid, best, frontiers
