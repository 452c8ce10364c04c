"""Points, metric backends and set-distance primitives.

Two backends are supported: Euclidean (l2 over fixed-dimension float
vectors) and an explicit distance matrix, where a point's location is a
row index.  Locations are plain Python values (``tuple`` of floats or
``int``) so they can be handed to either net core unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

Location = Union[tuple, int]


@dataclass(frozen=True)
class MetricPoint:
    id: int
    loc: Location


def euclid(a: Sequence[float], b: Sequence[float]) -> float:
    # Sequential sum of squares; the compiled core uses the same operation
    # order so both produce bit-identical distances.
    s = 0.0
    for x, y in zip(a, b):
        t = x - y
        s += t * t
    return math.sqrt(s)


class EuclideanBackend:
    kind = "euclidean-l2"

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError(f"dimension must be >= 1, got {dim}")
        self.dim = dim

    def location(self, value) -> tuple:
        loc = tuple(float(v) for v in value)
        if len(loc) != self.dim:
            raise ValueError(f"expected {self.dim} coordinates, got {len(loc)}")
        if not all(math.isfinite(v) for v in loc):
            raise ValueError(f"non-finite coordinate in {loc}")
        return loc

    def distance(self, a: Location, b: Location) -> float:
        if len(a) != self.dim or len(b) != self.dim:
            raise ValueError(
                f"dimension mismatch: {len(a)} vs {len(b)} (backend dim {self.dim})")
        return euclid(a, b)

    def __repr__(self):
        return f"EuclideanBackend(dim={self.dim})"


class MatrixBackend:
    """Finite metric given by a symmetric, zero-diagonal distance table.

    The triangle inequality is not checked here; see
    :func:`dynkcenter.oracles.check_metric`.
    """

    kind = "explicit-matrix"

    def __init__(self, matrix):
        m = [[float(v) for v in row] for row in matrix]
        n = len(m)
        for i, row in enumerate(m):
            if len(row) != n:
                raise ValueError(f"row {i} has {len(row)} entries, expected {n}")
        for i in range(n):
            if m[i][i] != 0.0:
                raise ValueError(f"nonzero diagonal entry at {i}")
            for j in range(i + 1, n):
                if m[i][j] != m[j][i]:
                    raise ValueError(f"matrix not symmetric at ({i}, {j})")
                if not (m[i][j] >= 0.0) or not math.isfinite(m[i][j]):
                    raise ValueError(f"invalid distance at ({i}, {j}): {m[i][j]}")
        self.matrix = m
        self.n = n

    def location(self, value) -> int:
        row = int(value)
        if not 0 <= row < self.n:
            raise IndexError(f"row {row} out of range for {self.n}x{self.n} matrix")
        return row

    def distance(self, a: Location, b: Location) -> float:
        if not (0 <= a < self.n and 0 <= b < self.n):
            raise IndexError(f"row index out of range: ({a}, {b}) for n={self.n}")
        return self.matrix[a][b]

    def __repr__(self):
        return f"MatrixBackend(n={self.n})"


Backend = Union[EuclideanBackend, MatrixBackend]


def distance(a: MetricPoint, b: MetricPoint, backend: Backend) -> float:
    return backend.distance(a.loc, b.loc)


def dist_to_set(q: Location, C: Sequence[Location], backend: Backend) -> float:
    """Distance from ``q`` to the closest member of ``C``."""
    if len(C) == 0:
        raise ValueError("query set is empty")
    return min(backend.distance(q, c) for c in C)


def pairwise_matrix(locs: Sequence[Location], backend: Backend) -> np.ndarray:
    """Full distance table for ``locs`` (test and bench use only)."""
    if isinstance(backend, MatrixBackend):
        idx = np.asarray(locs, dtype=np.intp)
        return np.asarray(backend.matrix)[np.ix_(idx, idx)]
    X = np.asarray(locs, dtype=float).reshape(len(locs), backend.dim)
    # accumulate coordinate by coordinate: same rounding as ``euclid``
    s = np.zeros((len(locs), len(locs)))
    for k in range(backend.dim):
        t = X[:, None, k] - X[None, :, k]
        s += t * t
    return np.sqrt(s)


def aspect_ratio(points: Iterable[MetricPoint], backend: Backend) -> float:
    """Max pairwise distance over min pairwise distance, by exhaustive scan."""
    locs = [p.loc for p in points]
    if len(locs) < 2:
        raise ValueError("aspect ratio needs at least 2 points")
    D = pairwise_matrix(locs, backend)
    iu = np.triu_indices(len(locs), k=1)
    vals = D[iu]
    dmin = float(vals.min())
    if dmin == 0.0:
        raise ValueError("zero minimum distance (duplicate locations)")
    return float(vals.max()) / dmin


# -- point files -----------------------------------------------------------

def read_points(path) -> tuple[Backend, list[MetricPoint]]:
    """Parse a point file.

    Euclidean files start with ``dim <D>`` followed by ``<id> <x1> ... <xD>``
    lines; matrix files start with ``matrix <n>`` followed by ``n`` rows, and
    point ``i`` is row ``i``.
    """
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty point file")
    head = lines[0].split()
    if len(head) != 2 or head[0] not in ("dim", "matrix"):
        raise ValueError(f"{path}:1: expected 'dim <D>' or 'matrix <n>' header")
    size = int(head[1])
    if head[0] == "matrix":
        rows = [ln.split() for ln in lines[1:]]
        if len(rows) != size:
            raise ValueError(f"{path}: expected {size} matrix rows, found {len(rows)}")
        backend = MatrixBackend(rows)
        return backend, [MetricPoint(i, i) for i in range(size)]
    backend = EuclideanBackend(size)
    pts = []
    for lineno, ln in enumerate(lines[1:], start=2):
        tok = ln.split()
        if len(tok) != size + 1:
            raise ValueError(f"{path}:{lineno}: expected id and {size} coordinates")
        pts.append(MetricPoint(int(tok[0]), backend.location(tok[1:])))
    return backend, pts


def fmt_float(x: float) -> str:
    # 17 significant digits round-trips any double.
    return format(float(x), ".17g")


def format_points(points: Sequence[MetricPoint], backend: Backend) -> str:
    if isinstance(backend, MatrixBackend):
        out = [f"matrix {backend.n}"]
        out += [" ".join(fmt_float(v) for v in row) for row in backend.matrix]
    else:
        out = [f"dim {backend.dim}"]
        out += [f"{p.id} " + " ".join(fmt_float(v) for v in p.loc) for p in points]
    return "\n".join(out) + "\n"


def write_points(path, points: Sequence[MetricPoint], backend: Backend) -> None:
    Path(path).write_text(format_points(points, backend))
