"""k-center solvers driven by approximate furthest-neighbour queries.

* :func:`greedy_kcenter` - farthest-first traversal, any metric, factor 2+eps.
* :func:`meb` - 1-center in R^D by walking a tentative center toward the far
  point with a shrinking step, factor 1+eps.
* :func:`euclidean_kcenter` - the same walk run on k slots, trying every
  assignment of steps to slots, factor 1+eps.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Sequence

import numpy as np

from .afn import QueryStats, afn
from .metric import EuclideanBackend, pairwise_matrix
from .net import NavigatingNet

COVER_RTOL = 1e-9
DEFAULT_BUDGET = 10**6


class BudgetExceeded(ValueError):
    """The guess family is larger than the configured budget."""


@dataclass
class SolverStats:
    afn_calls: int = 0
    afn_iterations: int = 0
    max_afn_iterations: int = 0
    max_frontier: int = 0
    distance_evals: int = 0
    loop_count: int = 0
    functions: int = 0

    def add(self, q: QueryStats) -> None:
        self.afn_calls += 1
        self.afn_iterations += q.iterations
        self.max_afn_iterations = max(self.max_afn_iterations, q.iterations)
        self.max_frontier = max(self.max_frontier, q.max_frontier)
        self.distance_evals += q.distance_evals

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class CoverSolution:
    """Centers plus a radius, certified against the point set at return time.

    ``centers`` holds point ids for the metric greedy and coordinate tuples
    for the Euclidean solvers.  ``max_distance`` is the exact covering radius
    of the centers found by exhaustive scan.
    """

    centers: list
    radius: float
    stats: SolverStats
    max_distance: float = math.nan
    covered: bool = False

    def to_json(self) -> dict:
        centers = [c if isinstance(c, int) else list(c) for c in self.centers]
        return {"centers": centers, "radius": self.radius, "stats": self.stats.to_json()}


def coverage(net: NavigatingNet, center_locs: Sequence) -> float:
    """Largest distance from a live point to its nearest center (exhaustive)."""
    locs = [net.location(i) for i in net.ids()]
    if not center_locs:
        return math.inf
    be = net.backend
    if isinstance(be, EuclideanBackend):
        X = np.asarray(locs, dtype=float)
        Cm = np.asarray(center_locs, dtype=float).reshape(len(center_locs), be.dim)
        s = np.zeros((len(X), len(Cm)))
        for k in range(be.dim):
            t = X[:, None, k] - Cm[None, :, k]
            s += t * t
        return float(np.sqrt(s).min(axis=1).max())
    D = pairwise_matrix(locs + list(center_locs), be)[: len(locs), len(locs):]
    return float(D.min(axis=1).max())


def certify(net: NavigatingNet, sol: CoverSolution, center_locs: Sequence) -> CoverSolution:
    sol.max_distance = coverage(net, center_locs)
    sol.covered = sol.max_distance <= sol.radius * (1 + COVER_RTOL)
    return sol


def _check_common(net: NavigatingNet, eps: float) -> None:
    if not len(net):
        raise ValueError("net is empty")
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")


def _require_euclidean(net: NavigatingNet) -> EuclideanBackend:
    if not isinstance(net.backend, EuclideanBackend):
        raise ValueError("this solver needs the Euclidean backend")
    return net.backend


# -- metric greedy ------------------------------------------------------------

def greedy_kcenter(net: NavigatingNet, k: int, eps: float) -> CoverSolution:
    """Farthest-first traversal with approximate far-point queries at eps/5.

    Starts from the smallest live id.  Stops adding centers once every point
    is a center (the far point is at distance 0).
    """
    _check_common(net, eps)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    stats = SolverStats()
    e5 = eps / 5
    centers = [net.ids()[0]]
    locs = [net.location(centers[0])]
    while len(centers) < k:
        pid, d, q = afn(net, locs, e5)
        stats.add(q)
        if d == 0.0:
            break
        centers.append(pid)
        locs.append(net.location(pid))
    _, d, q = afn(net, locs, e5)
    stats.add(q)
    sol = CoverSolution(centers, (1 + e5) * d, stats)
    return certify(net, sol, locs)


# -- 1-center walk ------------------------------------------------------------

def loop_length(eps: float) -> int:
    """``floor(6 / eps)``, evaluated on the decimal value of ``eps``.

    Going through the shortest decimal repr keeps e.g. eps=0.1 at exactly 60
    steps regardless of binary rounding of the quotient.
    """
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    return math.floor(Fraction(6) / Fraction(repr(float(eps))))


def step_fraction(delta: float, eps: float) -> float:
    """Fraction of the way from the current center to the far point."""
    a = 1 + eps / 3
    # delta^2 - 1 first: at delta = 1 the step is exactly one half
    return ((delta * delta - 1) + a * a) / (2 * a * a)


def next_delta(delta: float, eps: float) -> float:
    """Shrink factor bound for the next center.

    The radicand turns negative once ``delta < eps/3``; it is clamped to zero.
    """
    a = 1 + eps / 3
    t = (1 + a * a - delta * delta) / (2 * a)
    return math.sqrt(max(0.0, 1 - t * t))


@dataclass
class MebIterate:
    m: tuple
    delta: float
    radius: float
    best: tuple = field(default=())


def _as_vec(loc) -> np.ndarray:
    return np.asarray(loc, dtype=float)


def meb(net: NavigatingNet, eps: float, trace: Optional[list] = None) -> CoverSolution:
    """Approximate minimum enclosing ball; exactly ``floor(6/eps)`` steps.

    Pass a list as ``trace`` to receive one :class:`MebIterate` per step.
    """
    _check_common(net, eps)
    _require_euclidean(net)
    steps = loop_length(eps)
    if steps < 1:
        raise ValueError(f"eps={eps} leaves no iterations; need eps <= 6")
    e3 = eps / 3
    stats = SolverStats()
    m = _as_vec(net.location(net.ids()[0]))
    delta = 1.0
    best_c, best_r = None, math.inf
    for _ in range(steps):
        mt = tuple(m.tolist())
        pid, d, q = afn(net, [mt], e3)
        stats.add(q)
        r_i = (1 + e3) * d
        if r_i < best_r:
            best_c, best_r = mt, r_i
        if trace is not None:
            trace.append(MebIterate(mt, delta, r_i, (best_c, best_r)))
        p = _as_vec(net.location(pid))
        m = m + (p - m) * step_fraction(delta, eps)
        delta = next_delta(delta, eps)
        stats.loop_count += 1
    sol = CoverSolution([best_c], best_r, stats)
    return certify(net, sol, [best_c])


# -- k-slot walk over every guess ----------------------------------------------

def guess_count(k: int, eps: float) -> int:
    return k ** (k * loop_length(eps))


def _check_budget(k: int, eps: float, budget: int) -> int:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    steps = k * loop_length(eps)
    if steps < 1:
        raise ValueError(f"eps={eps} leaves no iterations; need eps <= 6")
    # compare in logs first so absurd inputs don't build huge integers
    if steps * math.log(k) > math.log(budget) + 1e-9 or k ** steps > budget:
        raise BudgetExceeded(f"{k}^{steps} guess functions exceed the budget of {budget}")
    return steps


def enumerate_guesses(k: int, eps: float, budget: int = DEFAULT_BUDGET) -> Iterator[tuple]:
    """Every map from steps to slots, as 0-based slot tuples in base-k counting order."""
    steps = _check_budget(k, eps, budget)
    return itertools.product(range(k), repeat=steps)


def _walk_update(slots, deltas, j, p, eps):
    if slots[j] is None:
        slots[j] = p
        deltas[j] = 1.0
    else:
        slots[j] = slots[j] + (p - slots[j]) * step_fraction(deltas[j], eps)
        deltas[j] = next_delta(deltas[j], eps)


def _defined(slots) -> list:
    return [tuple(s.tolist()) for s in slots if s is not None]


def euclidean_kcenter(net: NavigatingNet, k: int, eps: float, budget: int = DEFAULT_BUDGET,
                      shared_prefix: bool = True, pin_seed: bool = False) -> CoverSolution:
    """Best k-slot walk over all guess functions.

    Every slot starts undefined and the first query is made from the seed
    point alone (the smallest live id).  A slot touched for the first time
    takes the far point as its center with a fresh shrink factor of 1.

    ``pin_seed=True`` instead places the seed in slot ``f(1)`` before step 1,
    so step 1 moves that slot halfway toward the far point.  When the seed
    and the far point lie in different clusters that slot never recovers; the
    option exists to demonstrate this.

    Guesses that agree on their first ``i`` assignments reach identical states
    after ``i`` steps, so by default the family is walked as a prefix tree
    and each state is computed once.  ``shared_prefix=False`` replays every
    function from scratch (same answer, for cross-checking).
    """
    _check_common(net, eps)
    _require_euclidean(net)
    steps = _check_budget(k, eps, budget)
    e3 = eps / 3
    stats = SolverStats()
    p1 = _as_vec(net.location(net.ids()[0]))
    best = [math.inf, None]          # global radius, centers

    def query(M):
        pid, d, q = afn(net, M, e3)
        stats.add(q)
        return (1 + e3) * d, _as_vec(net.location(pid))

    def start(j1):
        slots = [None] * k
        if pin_seed:
            slots[j1] = p1.copy()
        return slots, [1.0] * k

    def finish(r, C):
        stats.functions += 1
        if r < best[0]:
            best[0], best[1] = r, C

    seed = [tuple(p1.tolist())]
    if shared_prefix:
        def rec(i, slots, deltas, r, C):
            if i == steps:
                finish(r, C)
                return
            M = _defined(slots)
            r_i, p = query(M)
            if r_i < r:
                r, C = r_i, M
            for j in range(k):
                s2, d2 = list(slots), list(deltas)
                _walk_update(s2, d2, j, p, eps)
                rec(i + 1, s2, d2, r, C)

        # step 1 queries from the seed whatever f(1) is
        r1, p = query(seed)
        for j1 in range(k):
            slots, deltas = start(j1)
            _walk_update(slots, deltas, j1, p, eps)
            rec(1, slots, deltas, r1, seed)
    else:
        for f in enumerate_guesses(k, eps, budget):
            slots, deltas = start(f[0])
            r, C = math.inf, None
            for i in range(steps):
                M = _defined(slots) if i else seed
                r_i, p = query(M)
                if r_i < r:
                    r, C = r_i, M
                _walk_update(slots, deltas, f[i], p, eps)
            finish(r, C)

    stats.loop_count = steps
    sol = CoverSolution(list(best[1]), best[0], stats)
    return certify(net, sol, best[1])
