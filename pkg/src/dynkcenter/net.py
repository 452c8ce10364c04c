"""Dynamic navigating net: nested 2^i-nets with per-node navigation lists.

The heavy lifting lives in a core object.  A compiled core (``_core``) is used
when the extension is importable; otherwise, or when ``DYNKCENTER_PURE_PYTHON``
is set, the pure-Python core from ``_pynet`` is selected.  Both expose the same
surface and build identical structures for identical update sequences.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import _pynet
from .metric import (Backend, EuclideanBackend, MatrixBackend, MetricPoint,
                     pairwise_matrix)

try:
    from . import _core as _compiled
except ImportError:  # extension not built
    _compiled = None

CORES = {"python": _pynet.NetCore}
if _compiled is not None:
    CORES["compiled"] = _compiled.NetCore


def default_core() -> str:
    if "compiled" in CORES and not os.environ.get("DYNKCENTER_PURE_PYTHON"):
        return "compiled"
    return "python"


class NavigatingNet:
    """Mutable point set indexed by a navigating net.

    Scales are integer exponents ``i`` standing for ``r = 2**i``.
    """

    def __init__(self, backend: Backend, gamma: float = 4.0, core: Optional[str] = None):
        if not gamma >= 4.0:
            raise ValueError(f"gamma must be >= 4, got {gamma}")
        self.backend = backend
        self.gamma = float(gamma)
        self.core_name = core or default_core()
        try:
            impl = CORES[self.core_name]
        except KeyError:
            raise ValueError(f"core {self.core_name!r} unavailable; have {sorted(CORES)}")
        if isinstance(backend, MatrixBackend):
            self._core = impl("explicit-matrix", 0, backend.matrix, self.gamma)
        else:
            self._core = impl("euclidean-l2", backend.dim, None, self.gamma)

    @classmethod
    def build(cls, points: Iterable[MetricPoint], backend: Backend, gamma: float = 4.0,
              core: Optional[str] = None) -> "NavigatingNet":
        net = cls(backend, gamma, core)
        for p in points:
            net.insert(p)
        return net

    # -- updates ----------------------------------------------------------

    def insert(self, p: MetricPoint) -> None:
        if p.id < 0:
            raise ValueError(f"point ids must be non-negative, got {p.id}")
        self._core.insert(p.id, self.backend.location(p.loc))

    def delete(self, pid: int) -> None:
        self._core.delete(pid)

    # -- reads ------------------------------------------------------------

    def __len__(self):
        return len(self._core)

    def __contains__(self, pid):
        return pid in self._core

    def ids(self) -> list[int]:
        return self._core.ids()

    def points(self) -> list[MetricPoint]:
        return [MetricPoint(i, self._core.location(i)) for i in self._core.ids()]

    def location(self, pid: int):
        return self._core.location(pid)

    @property
    def root(self) -> Optional[int]:
        return self._core.root

    @property
    def r_max(self) -> int:
        """Exponent of the smallest scale whose net is a single point."""
        return self._core.e_max

    @property
    def r_min(self) -> int:
        """Exponent of the highest scale at or below which every list is trivial."""
        return self._core.e_min

    @property
    def scale_count(self) -> int:
        """Number of scales carrying a non-trivial navigation list."""
        return self._core.e_max - self._core.e_min

    def top(self, pid: int) -> int:
        return self._core.top(pid)

    def in_level(self, pid: int, e: int) -> bool:
        return pid == self._core.root or self._core.top(pid) >= e

    def level_members(self, e: int) -> list[int]:
        return [i for i in self._core.ids() if self.in_level(i, e)]

    def navigation_list(self, y: int, e: int) -> set[int]:
        if y not in self._core:
            raise KeyError(f"unknown point id {y}")
        if not self.in_level(y, e):
            raise ValueError(f"point {y} is not in the net at scale 2^{e}")
        return {y, *self._core.others(y, e)}

    def dump(self) -> str:
        """``L <exponent> <owner> : <members>`` lines, scales high to low."""
        if not len(self):
            return ""
        lines = []
        for e in range(self.r_max, self.r_min - 1, -1):
            for y in self.level_members(e):
                members = " ".join(str(m) for m in sorted(self.navigation_list(y, e)))
                lines.append(f"L {e} {y} : {members}")
        return "\n".join(lines) + "\n"

    def __repr__(self):
        return (f"NavigatingNet(n={len(self)}, core={self.core_name}, "
                f"r_max=2^{self.r_max}, r_min=2^{self.r_min})")


@dataclass
class InvariantReport:
    ok: bool
    violation: Optional[str] = None
    checked: list = field(default_factory=list)

    def __bool__(self):
        return self.ok

    def to_json(self) -> dict:
        return {"pass": self.ok, "violation": self.violation}


def _fail(msg, checked):
    return InvariantReport(False, msg, checked)


def verify_invariants(net: NavigatingNet) -> InvariantReport:
    """Exhaustively recompute every structural property of ``net``.

    O(n^2) per scale; meant for tests and ``VERIFY`` trace ops.
    """
    core = net._core
    checked = []
    ids = core.ids()
    n = len(ids)
    stored = core.stored_lists()
    if n == 0:
        if stored or core.root is not None:
            return _fail("registry: empty net still holds structure", checked)
        return InvariantReport(True, None, ["vacuous"])
    g = net.gamma
    root = core.root
    if root not in ids:
        return _fail(f"registry: root {root} is not a live point", checked)
    e_max, e_min = core.e_max, core.e_min
    pos = {pid: k for k, pid in enumerate(ids)}
    tops = np.array([core.top(i) for i in ids], dtype=np.int64)
    if core.top(root) != e_max:
        return _fail(f"registry: root top {core.top(root)} != r_max exponent {e_max}", checked)
    D = pairwise_matrix([core.location(i) for i in ids], net.backend)
    nonroot = np.array([i != root for i in ids])

    # |Y_{r_max}| = 1 and r_max is the smallest such scale
    checked.append("top-level")
    if n >= 2:
        mt = int(tops[nonroot].max())
        if mt != e_max - 1:
            return _fail(f"top-level: max non-root top {mt} but r_max exponent {e_max}", checked)

    off = D[~np.eye(n, dtype=bool)]
    dmin = float(off.min()) if n >= 2 else math.inf
    if dmin == 0.0:
        return _fail("registry: duplicate locations", checked)

    # covering of every non-root point by the next level up
    checked.append("covering")
    for k in np.nonzero(nonroot)[0]:
        t = int(tops[k])
        up = tops >= t + 1
        up[pos[root]] = True
        if not (D[k, up] <= math.ldexp(1.0, t + 1)).any():
            return _fail(f"covering: point {ids[k]} at top 2^{t} has no parent within "
                         f"2^{t + 1}", checked)

    # expected navigation lists over every scale where one could be non-trivial
    lo = e_max if n < 2 else min(e_max, math.floor(math.log2(dmin / g)) - 1)
    expected = {}
    checked.extend(["packing", "lists", "reach-2r"])
    for e in range(e_max + 1, lo - 1, -1):
        r = math.ldexp(1.0, e)
        inY = tops >= e
        inY[pos[root]] = True
        inYb = tops >= e - 1
        inYb[pos[root]] = True
        Yi = np.nonzero(inY)[0]
        if len(Yi) >= 2:
            sub = D[np.ix_(Yi, Yi)]
            bad = (sub < r) & ~np.eye(len(Yi), dtype=bool)
            if bad.any():
                a, b = np.argwhere(bad)[0]
                return _fail(f"packing: points {ids[Yi[a]]} and {ids[Yi[b]]} in Y_2^{e} are "
                             f"{sub[a, b]!r} apart", checked)
        if e_min <= e <= e_max:
            reach = D[:, Yi].min(axis=1)
            if (reach >= 2 * r).any():
                k = int(np.argmax(reach >= 2 * r))
                return _fail(f"reach-2r: d(point {ids[k]}, Y_2^{e}) = {reach[k]!r} >= 2r",
                             checked)
        Yb = np.nonzero(inYb)[0]
        near = (D[np.ix_(Yi, Yb)] <= g * r) & (Yi[:, None] != Yb[None, :])
        for row in np.nonzero(near.any(axis=1))[0]:
            expected[(ids[Yi[row]], e)] = [ids[m] for m in Yb[near[row]]]

    got = {(y, e): m for y, e, m in stored}
    for key, members in expected.items():
        if got.get(key) != members:
            y, e = key
            return _fail(f"navigation-list: L_{{{y},2^{e}}} should hold others {members}, "
                         f"stored {got.get(key, [])}", checked)
    for key in got:
        if key not in expected:
            y, e = key
            return _fail(f"navigation-list: stray stored list L_{{{y},2^{e}}} = {got[key]}",
                         checked)

    checked.append("inverse-index")
    want_rev = {}
    for (y, e), members in got.items():
        for z in members:
            want_rev.setdefault((z, e), []).append(y)
    have_rev = {(z, e): owners for z, e, owners in core.stored_owners()}
    for key, owners in want_rev.items():
        if have_rev.get(key) != sorted(owners):
            return _fail(f"inverse-index: owners of {key[0]} at 2^{key[1]} are "
                         f"{have_rev.get(key)}, lists imply {sorted(owners)}", checked)
    if len(have_rev) != len(want_rev):
        return _fail("inverse-index: stale owner entries", checked)

    checked.append("r_min")
    want_min = (min(e for (_, e) in expected) - 1) if expected else e_max
    if e_min != want_min:
        return _fail(f"r_min: stored exponent {e_min}, lists imply {want_min}", checked)
    if (tops < e_min).any():
        k = int(np.argmax(tops < e_min))
        return _fail(f"r_min: point {ids[k]} absent from Y_2^{e_min}", checked)
    return InvariantReport(True, None, checked)
