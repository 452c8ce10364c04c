"""Pure-Python navigating-net core.

Representation: each live point ``p`` has a top exponent ``top[p]``; it is a
member of ``Y_i`` for every ``i <= top[p]``, so the nets are nested by
construction.  The root is a member of every level.  Navigation lists are
stored sparsely: ``_others[y][i]`` holds ``L_{y,i} - {y}`` and is present only
when non-empty.  ``_rev[z][i]`` is the inverse index (owners whose level-``i``
list contains ``z``).

The compiled core in ``_core`` mirrors this module operation for operation so
both produce identical structures; keep them in sync.
"""

from __future__ import annotations

import math
from collections import Counter

from .metric import euclid

_ldexp = math.ldexp


def _exp_above(d: float) -> int:
    """Smallest integer ``e`` with ``2**e > d`` (``d > 0``)."""
    return math.frexp(d)[1]


class NetCore:
    def __init__(self, kind: str, dim: int = 0, matrix=None, gamma: float = 4.0):
        if gamma < 4.0:
            raise ValueError(f"gamma must be >= 4, got {gamma}")
        self.kind = kind
        self.gamma = float(gamma)
        if kind == "euclidean-l2":
            self._dist = euclid
        elif kind == "explicit-matrix":
            m = matrix
            self._dist = lambda a, b: m[a][b]
        else:
            raise ValueError(f"unknown metric kind {kind!r}")
        self._clear()

    def _clear(self):
        self._loc = {}
        self._top = {}
        self._others = {}
        self._rev = {}
        self._nontriv = Counter()
        self._topcount = Counter()
        self._root = None
        self._emax = 0

    # -- read accessors ---------------------------------------------------

    def __len__(self):
        return len(self._loc)

    def __contains__(self, pid):
        return pid in self._loc

    def ids(self):
        return sorted(self._loc)

    def location(self, pid):
        return self._loc[pid]

    def top(self, pid):
        return self._top[pid]

    @property
    def root(self):
        return self._root

    @property
    def e_max(self):
        return self._emax

    @property
    def e_min(self):
        if not self._nontriv:
            return self._emax
        return min(self._nontriv) - 1

    def others(self, pid, level):
        lv = self._others[pid].get(level)
        return sorted(lv) if lv else []

    def owners(self, pid, level):
        lv = self._rev[pid].get(level)
        return sorted(lv) if lv else []

    def stored_lists(self):
        out = []
        for y, per in self._others.items():
            for level, members in per.items():
                out.append((y, level, sorted(members)))
        out.sort()
        return out

    def stored_owners(self):
        out = []
        for z, per in self._rev.items():
            for level, owners in per.items():
                if owners:
                    out.append((z, level, sorted(owners)))
        out.sort()
        return out

    def debug_unlink(self, owner, level, member):
        """Drop one list entry without repair (fault injection for tests)."""
        self._unlink(owner, level, member)
        s = self._rev[member][level]
        s.discard(owner)
        if not s:
            del self._rev[member][level]

    def dist(self, a, b):
        return self._dist(self._loc[a], self._loc[b])

    # -- list bookkeeping -------------------------------------------------

    def _link(self, owner, level, member):
        per = self._others[owner]
        s = per.get(level)
        if s is None:
            per[level] = {member}
            self._nontriv[level] += 1
        else:
            s.add(member)
        self._rev[member].setdefault(level, set()).add(owner)

    def _unlink(self, owner, level, member):
        per = self._others[owner]
        s = per[level]
        s.discard(member)
        if not s:
            del per[level]
            self._nontriv[level] -= 1
            if not self._nontriv[level]:
                del self._nontriv[level]

    def _in_level(self, pid, level):
        return pid == self._root or self._top[pid] >= level

    # -- range descent ----------------------------------------------------

    def _descend(self, loc, lo=None, min_top=None, extra=()):
        """Per-level neighbourhoods of ``loc``.

        Returns ``[(i, W_i), ...]`` for descending ``i``, where ``W_i`` maps
        every member of ``Y_i`` within ``gamma * 2**(i+1)`` of ``loc`` to its
        distance.  Stops after level ``lo``, once no candidates remain, or (with
        no ``lo``) once a coincident point shows up.
        ``extra`` names points that may be unreachable through the lists
        (mid-repair promotions) and are tested directly at every level.
        """
        dist = self._dist
        g = self.gamma
        locs = self._loc
        root = self._root
        cache = {root: dist(loc, locs[root])}
        J = max(self._emax, _exp_above(cache[root]))
        if min_top is not None and min_top > J:
            J = min_top
        out = []
        W = {root: cache[root]} if cache[root] <= g * _ldexp(1.0, J + 1) else {}
        level = J
        while True:
            out.append((level, W))
            if lo is not None and level <= lo:
                break
            # A_level: points that can parent anything of Y_{level-1} within
            # gamma * 2**level of loc.
            reach = (g + 1.0) * _ldexp(1.0, level)
            A = [y for y, d in W.items() if d <= reach]
            if not A and not extra and lo is None:
                break
            cand = set()
            for y in A:
                cand.add(y)
                per = self._others[y].get(level)
                if per:
                    cand.update(per)
            for u in extra:
                if self._in_level(u, level - 1):
                    cand.add(u)
            radius = g * _ldexp(1.0, level)
            Wn = {}
            for z in cand:
                d = cache.get(z)
                if d is None:
                    d = dist(loc, locs[z])
                    cache[z] = d
                if d <= radius:
                    Wn[z] = d
            level -= 1
            W = Wn
            if lo is None and (not W or 0.0 in W.values()):
                # a coincident point would keep W non-empty forever
                if W:
                    out.append((level, W))
                break
        return out

    # -- updates ----------------------------------------------------------

    def insert(self, pid, loc):
        if pid in self._loc:
            raise KeyError(f"point id {pid} already present")
        if self._root is None:
            self._loc[pid] = loc
            self._top[pid] = 0
            self._others[pid] = {}
            self._rev[pid] = {}
            self._root = pid
            self._emax = 0
            return
        levels = self._descend(loc)
        lowest_fail = None
        for level, W in levels:
            if W:
                near = min(W.values())
                if near == 0.0:
                    y = min(k for k, d in W.items() if d == 0.0)
                    raise ValueError(f"duplicate location: coincides with point {y}")
                if near < _ldexp(1.0, level):
                    lowest_fail = level
        t = lowest_fail - 1
        g = self.gamma
        self._loc[pid] = loc
        self._top[pid] = t
        self._others[pid] = {}
        self._rev[pid] = {}
        self._topcount[t] += 1
        for level, W in levels:
            if level <= t + 1:
                gr = g * _ldexp(1.0, level)
                for y, d in W.items():
                    if d <= gr:
                        self._link(y, level, pid)
            # own list one level up: L_{pid, level+1} = W_level
            if level + 1 <= t:
                for z in W:
                    self._link(pid, level + 1, z)
        self._normalize_top()

    def _normalize_top(self):
        if self._topcount:
            self._emax = max(self._topcount) + 1
        else:
            self._emax = self._top[self._root]
        self._top[self._root] = self._emax

    def _promote(self, x, j, extra):
        """Raise ``x`` from top ``j-1`` to top ``j`` and fix the lists."""
        levels = self._descend(self._loc[x], lo=j - 1, min_top=j + 1, extra=extra)
        byl = dict(levels)
        g = self.gamma
        gr = g * _ldexp(1.0, j + 1)
        for y, d in byl.get(j + 1, {}).items():
            if y != x and d <= gr:
                self._link(y, j + 1, x)
        for z in byl.get(j - 1, {}):
            if z != x:
                self._link(x, j, z)
        self._topcount[j - 1] -= 1
        if not self._topcount[j - 1]:
            del self._topcount[j - 1]
        self._topcount[j] += 1
        self._top[x] = j
        if j + 1 > self._emax:
            self._emax = j + 1
            self._top[self._root] = self._emax

    def delete(self, pid):
        if pid not in self._loc:
            raise KeyError(f"unknown point id {pid}")
        if len(self._loc) == 1:
            self._clear()
            return
        is_root = pid == self._root
        ploc = self._loc[pid]
        dist = self._dist
        cand = {}
        for level, members in self._others[pid].items():
            r = _ldexp(1.0, level)
            for x in members:
                if x != self._root and self._top[x] == level - 1 \
                        and dist(self._loc[x], ploc) <= r:
                    cand.setdefault(level, set()).add(x)
        promoted = []
        new_root = None
        while cand:
            j = min(cand)
            xs = sorted(cand.pop(j))
            if is_root:
                above = sum(c for t, c in self._topcount.items() if t >= j - 1)
                if above == 1:
                    new_root = xs[0]
                    break
            r = _ldexp(1.0, j)
            for x in xs:
                if self._top[x] != j - 1:
                    continue
                xloc = self._loc[x]
                covered = False
                for y in self._rev[x].get(j, ()):
                    if y != pid and dist(xloc, self._loc[y]) <= r:
                        covered = True
                        break
                if not covered:
                    self._promote(x, j, promoted)
                    promoted.append(x)
                    cand.setdefault(j + 1, set()).add(x)
        self._remove_ghost(pid)
        if is_root:
            self._root = new_root
            t = self._top[new_root]
            self._topcount[t] -= 1
            if not self._topcount[t]:
                del self._topcount[t]
        self._normalize_top()

    def _remove_ghost(self, pid):
        for level, members in self._others[pid].items():
            for z in members:
                s = self._rev[z][level]
                s.discard(pid)
                if not s:
                    del self._rev[z][level]
            self._nontriv[level] -= 1
            if not self._nontriv[level]:
                del self._nontriv[level]
        for level, owners in self._rev[pid].items():
            for y in owners:
                self._unlink(y, level, pid)
        if pid != self._root:
            t = self._top[pid]
            self._topcount[t] -= 1
            if not self._topcount[t]:
                del self._topcount[t]
        del self._others[pid], self._rev[pid], self._loc[pid], self._top[pid]

    # -- approximate furthest neighbour -------------------------------------

    def afn(self, query, eps, record=False):
        """Scale descent for an approximate furthest point from ``query``.

        Returns ``(id, d(id, query), start_exp, end_exp, frontier_sizes,
        frontiers_or_None, distance_evaluations)``.
        """
        if self._root is None:
            raise ValueError("net is empty")
        if not query:
            raise ValueError("query set is empty")
        if not eps > 0:
            raise ValueError(f"eps must be > 0, got {eps}")
        dist = self._dist
        locs = self._loc
        cache = {}

        def dq(y):
            ly = locs[y]
            best = math.inf
            for c in query:
                d = dist(ly, c)
                if d < best:
                    best = d
            return best

        root = self._root
        e = self._emax
        e_min = self.e_min
        cache[root] = dq(root)
        Z = [root]
        M = cache[root]
        sizes = [1]
        frontiers = [[root]] if record else None
        start = e
        half_eps = 0.5 * eps
        while e > e_min and _ldexp(1.0, e) > half_eps * M:
            thr = M - _ldexp(1.0, e)
            seen = set()
            nz = []
            for z in Z:
                per = self._others[z].get(e)
                for y in (z, *per) if per else (z,):
                    if y in seen:
                        continue
                    seen.add(y)
                    d = cache.get(y)
                    if d is None:
                        d = dq(y)
                        cache[y] = d
                    if d >= thr:
                        nz.append(y)
            nz.sort()
            Z = nz
            e -= 1
            M = max(cache[y] for y in Z)
            sizes.append(len(Z))
            if record:
                frontiers.append(Z)
        best = None
        for y in Z:
            if cache[y] == M:
                best = y
                break
        return best, M, start, e, sizes, frontiers, len(cache) * len(query)
