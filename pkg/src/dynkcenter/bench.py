"""Instrumented workloads: one CSV row per timed insert or far-point query."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .afn import afn
from .metric import EuclideanBackend, aspect_ratio
from .net import NavigatingNet
from .workloads import generate

COLUMNS = ["n", "D", "delta", "op-kind", "wall-time-ns", "afn-iterations",
           "max-frontier", "scale-count"]


@dataclass
class BenchSpec:
    """What to measure.  An empty ``n`` list is an empty workload.

    One point set is generated for every combination of ``n`` and
    ``separation``.  Every insert is timed, then ``queries`` far-point queries
    are timed, each from ``query_size`` random live points.
    """

    n: list[int] = field(default_factory=list)
    dim: int = 2
    distribution: str = "gaussian-clusters"
    separation: list[float] = field(default_factory=lambda: [100.0])
    spread: float = 1.0
    clusters: int = 2
    lattice: Optional[int] = None
    queries: int = 100
    query_size: int = 8
    eps: float = 0.1
    seed: int = 0
    core: Optional[str] = None
    inserts: bool = True

    _LISTS = {"n": int, "separation": float}
    _SCALARS = {"dim": int, "distribution": str, "spread": float, "clusters": int,
                "lattice": int, "queries": int, "query_size": int, "eps": float,
                "seed": int, "core": str}

    @classmethod
    def parse(cls, items: Iterable[str]) -> "BenchSpec":
        """Build from ``key=value`` strings; list keys take comma-separated values."""
        spec = cls()
        for item in items:
            if "=" not in item:
                raise ValueError(f"bench spec item {item!r} is not key=value")
            key, val = (s.strip() for s in item.split("=", 1))
            key = key.replace("-", "_")
            try:
                if key in cls._LISTS:
                    conv = cls._LISTS[key]
                    setattr(spec, key, [conv(v) for v in val.split(",") if v.strip()])
                elif key in cls._SCALARS:
                    setattr(spec, key, cls._SCALARS[key](val))
                elif key == "inserts":
                    spec.inserts = val.lower() in ("1", "true", "yes", "on")
                else:
                    raise ValueError(f"unknown bench key {key!r}")
            except ValueError as e:
                if "unknown" in str(e):
                    raise
                raise ValueError(f"bad value for {key}: {val!r}") from None
        spec.validate()
        return spec

    @classmethod
    def load(cls, path) -> "BenchSpec":
        return cls.parse(read_spec_items(path))

    def validate(self) -> None:
        if any(n < 2 for n in self.n):
            raise ValueError("every n must be >= 2")
        if self.dim < 1 or self.queries < 0 or self.query_size < 1 or not self.eps > 0:
            raise ValueError("need dim >= 1, queries >= 0, query_size >= 1, eps > 0")
        if not self.separation or any(not s > 0 for s in self.separation):
            raise ValueError("separation values must be > 0")


def read_spec_items(path) -> list[str]:
    """``key=value`` lines of a spec file, comments and blanks dropped."""
    with open(path) as fh:
        items = [ln.split("#", 1)[0].strip() for ln in fh]
    return [i for i in items if i]


@dataclass
class BenchRow:
    n: int
    D: int
    delta: float
    op: str
    ns: int
    iterations: Optional[int]
    max_frontier: Optional[int]
    scale_count: int

    def values(self) -> list:
        fmt = lambda v: "" if v is None else v
        return [self.n, self.D, format(self.delta, ".17g"), self.op, self.ns,
                fmt(self.iterations), fmt(self.max_frontier), self.scale_count]


def _one(spec: BenchSpec, n: int, sep: float, seed: int) -> list[BenchRow]:
    pts = generate(spec.distribution, n, spec.dim, seed, separation=sep,
                   spread=spec.spread, clusters=spec.clusters, lattice=spec.lattice)
    backend = EuclideanBackend(spec.dim)
    delta = aspect_ratio(pts, backend)
    net = NavigatingNet(backend, core=spec.core)
    clock = time.perf_counter_ns
    raw = []
    for p in pts:
        t0 = clock()
        net.insert(p)
        t1 = clock()
        if spec.inserts:
            raw.append(("insert", t1 - t0, None, None, net.scale_count))
    rng = np.random.default_rng(seed + 1)
    ids = net.ids()
    for _ in range(spec.queries):
        pick = rng.choice(len(ids), size=min(spec.query_size, len(ids)), replace=False)
        C = [net.location(ids[int(i)]) for i in pick]
        t0 = clock()
        _, _, q = afn(net, C, spec.eps)
        t1 = clock()
        raw.append(("afn", t1 - t0, q.iterations, q.max_frontier, net.scale_count))
    return [BenchRow(n, spec.dim, delta, *r) for r in raw]


def run_bench(spec: BenchSpec) -> list[BenchRow]:
    rows = []
    for i, n in enumerate(spec.n):
        for sep in spec.separation:
            # same noise for every separation, so only the spacing changes
            rows.extend(_one(spec, n, sep, spec.seed + 1000 * i))
    return rows


def write_csv(rows: Iterable[BenchRow], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow(r.values())


def to_csv(rows: Iterable[BenchRow]) -> str:
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()
