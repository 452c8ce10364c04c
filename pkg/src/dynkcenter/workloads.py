"""Point-set generators and randomized update streams."""

from __future__ import annotations

import math
from typing import Iterator, Optional

import numpy as np

from .metric import MetricPoint
from .net import NavigatingNet

DISTRIBUTIONS = ("uniform-cube", "gaussian-clusters", "line", "grid")


def generate(distribution: str, n: int, dim: int, seed: int = 0, *, side: float = 1.0,
             clusters: int = 3, spread: float = 0.01, separation: float = 100.0,
             lattice: Optional[int] = None) -> list[MetricPoint]:
    """Deterministic point sets; ids are ``0..n-1``.

    ``gaussian-clusters`` puts cluster centers ``separation`` apart along the
    first axis with isotropic noise of scale ``spread``, so the aspect ratio
    grows linearly with ``separation / spread``.  ``grid`` fills a unit-spaced
    lattice in lexicographic order, or samples ``n`` distinct nodes of a
    ``lattice``-per-side lattice when ``lattice`` is given.
    """
    if n < 1 or dim < 1:
        raise ValueError(f"need n >= 1 and dim >= 1, got n={n}, dim={dim}")
    rng = np.random.default_rng(seed)
    if distribution == "uniform-cube":
        X = rng.random((n, dim)) * side
    elif distribution == "gaussian-clusters":
        if clusters < 1 or not spread > 0 or not separation > 0:
            raise ValueError("gaussian-clusters needs clusters >= 1, spread > 0, separation > 0")
        centers = np.zeros((clusters, dim))
        centers[:, 0] = np.arange(clusters) * separation
        X = centers[np.arange(n) % clusters] + rng.normal(size=(n, dim)) * spread
    elif distribution == "line":
        X = np.zeros((n, dim))
        X[:, 0] = np.arange(n)
    elif distribution == "grid":
        if lattice is None:
            per = max(1, math.ceil(round(n ** (1 / dim), 9)))
            nodes = range(n)
        else:
            per = lattice
            if per ** dim < n:
                raise ValueError(f"lattice {per}^{dim} has fewer than {n} nodes")
            nodes = np.sort(rng.choice(per ** dim, size=n, replace=False))
        X = np.array([np.unravel_index(int(k), (per,) * dim) for k in nodes], dtype=float)
    else:
        raise ValueError(f"unknown distribution {distribution!r}; choose from {DISTRIBUTIONS}")
    return [MetricPoint(i, tuple(float(v) for v in row)) for i, row in enumerate(X)]


class UpdateStream:
    """Random insert/delete mix that keeps the live set near a target size.

    Besides uniform points it injects far outliers (an order of magnitude
    beyond the current extent), near-duplicates of live points, and deletions
    aimed at the root or at the highest-level representatives.
    """

    def __init__(self, net: NavigatingNet, seed: int, target: int = 150,
                 p_outlier: float = 0.02, p_near: float = 0.05, p_rep_delete: float = 0.1):
        self.net = net
        self.rng = np.random.default_rng(seed)
        self.dim = net.backend.dim
        self.target = target
        self.p_outlier = p_outlier
        self.p_near = p_near
        self.p_rep_delete = p_rep_delete
        self.next_id = max(net.ids(), default=-1) + 1
        self.max_extent = 1e12

    def _new_location(self) -> tuple:
        rng = self.rng
        u = rng.random()
        live = self.net.ids()
        if u < self.p_outlier:
            # ten times the current extent, capped well inside float range
            far = max((np.linalg.norm(self.net.location(i)) for i in live), default=1.0)
            x = rng.normal(size=self.dim)
            x *= min(10 * max(far, 1.0), self.max_extent) / np.linalg.norm(x)
        elif u < self.p_outlier + self.p_near and live:
            base = np.asarray(self.net.location(live[int(rng.integers(len(live)))]))
            x = base + rng.normal(size=self.dim) * 1e-3 * max(1.0, float(np.abs(base).max()) * 1e-6)
        else:
            x = rng.random(self.dim)
        return tuple(float(v) for v in x)

    def _victim(self) -> int:
        rng = self.rng
        net = self.net
        if rng.random() < self.p_rep_delete:
            if rng.random() < 0.5:
                return net.root
            ids = net.ids()
            tops = np.array([net.top(i) if i != net.root else -10**9 for i in ids])
            high = np.nonzero(tops == tops.max())[0]
            return ids[int(high[int(rng.integers(len(high)))])]
        ids = net.ids()
        return ids[int(rng.integers(len(ids)))]

    def step(self) -> tuple:
        """Apply one update; returns ``("insert", id)`` or ``("delete", id)``."""
        n = len(self.net)
        p_del = 0.0 if n == 0 else min(0.9, 0.5 * n / self.target)
        if self.rng.random() < p_del:
            pid = self._victim()
            self.net.delete(pid)
            return "delete", pid
        while True:
            p = MetricPoint(self.next_id, self._new_location())
            try:
                self.net.insert(p)
            except ValueError:  # coincident after rounding; draw again
                continue
            self.next_id += 1
            return "insert", p.id

    def __iter__(self) -> Iterator[tuple]:
        while True:
            yield self.step()
