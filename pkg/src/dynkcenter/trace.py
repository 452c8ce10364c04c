"""Plain-text traces of updates and queries, and their deterministic replay.

One op per line::

    INSERT <id> <x1> ... <xD>      (matrix backend: INSERT <id> <row>)
    DELETE <id>
    AFN <eps> <m> <m*D coords>     (matrix backend: <m> row indices)
    GREEDY <k> <eps>
    MEB <eps>
    KCENTER <k> <eps>
    VERIFY

Blank lines and ``#`` comments are ignored.  Replay emits one JSON object per
op; floats are written with 17 significant digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

from .afn import afn
from .kcenter import DEFAULT_BUDGET, euclidean_kcenter, greedy_kcenter, meb
from .metric import (EuclideanBackend, MatrixBackend, MetricPoint, fmt_float,
                     read_points)
from .net import NavigatingNet, verify_invariants
from .oracles import (OracleGuardError, fn_exact, kcenter_exact_euclidean,
                      kcenter_exact_metric, meb_exact)

ORACLE_RTOL = 1e-9


class TraceError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass
class TraceOp:
    kind: str
    args: tuple = ()
    lineno: int = 0

    def format(self) -> str:
        parts = [self.kind]
        for a in self.args:
            if isinstance(a, float):
                parts.append(fmt_float(a))
            elif isinstance(a, (tuple, list)):
                parts.extend(fmt_float(v) if isinstance(v, float) else str(v) for v in a)
            else:
                parts.append(str(a))
        return " ".join(parts)


# -- configuration -------------------------------------------------------------

@dataclass
class Config:
    gamma: float = 4.0
    backend: str = "euclidean"
    dim: Optional[int] = None
    matrix: Optional[str] = None
    check_oracle: bool = False
    budget: int = DEFAULT_BUDGET
    core: Optional[str] = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def parse(cls, text: str) -> "Config":
        cfg = cls()
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line {lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key == "gamma":
                cfg.gamma = float(val)
            elif key == "backend":
                if val not in ("euclidean", "matrix"):
                    raise ValueError(f"config line {lineno}: backend must be euclidean or matrix")
                cfg.backend = val
            elif key == "dim":
                cfg.dim = int(val)
            elif key == "matrix":
                cfg.matrix = val
            elif key == "check_oracle":
                cfg.check_oracle = val.lower() in ("1", "true", "yes", "on")
            elif key == "budget":
                cfg.budget = int(float(val))
            elif key == "core":
                cfg.core = val
            else:
                raise ValueError(f"config line {lineno}: unknown key {key!r}")
        return cfg

    @classmethod
    def load(cls, path) -> "Config":
        cfg = cls.parse(Path(path).read_text())
        if cfg.matrix and not Path(cfg.matrix).is_absolute():
            cfg.matrix = str(Path(path).parent / cfg.matrix)
        return cfg


# -- parsing -------------------------------------------------------------------

def _num(tok: str, lineno: int, what: str, kind=float):
    try:
        v = kind(tok)
    except ValueError:
        raise TraceError(lineno, f"bad {what} {tok!r}") from None
    if kind is float and not math.isfinite(v):
        raise TraceError(lineno, f"non-finite {what} {tok!r}")
    return v


def parse_trace(lines: Iterable[str], matrix: bool = False,
                dim: Optional[int] = None) -> list[TraceOp]:
    """Parse trace lines.  Euclidean dimension comes from ``dim`` or the first INSERT."""
    ops = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        kind = tok[0].upper()
        rest = tok[1:]
        if kind == "INSERT":
            if len(rest) < 2:
                raise TraceError(lineno, "INSERT needs an id and a location")
            pid = _num(rest[0], lineno, "id", int)
            if pid < 0:
                raise TraceError(lineno, f"negative id {pid}")
            if matrix:
                if len(rest) != 2:
                    raise TraceError(lineno, "INSERT on the matrix backend takes one row index")
                loc = _num(rest[1], lineno, "row", int)
            else:
                coords = tuple(_num(t, lineno, "coordinate") for t in rest[1:])
                if dim is None:
                    dim = len(coords)
                if len(coords) != dim:
                    raise TraceError(lineno, f"expected {dim} coordinates, got {len(coords)}")
                loc = coords
            ops.append(TraceOp("INSERT", (pid, loc), lineno))
        elif kind == "DELETE":
            if len(rest) != 1:
                raise TraceError(lineno, "DELETE takes exactly one id")
            ops.append(TraceOp("DELETE", (_num(rest[0], lineno, "id", int),), lineno))
        elif kind == "AFN":
            if len(rest) < 2:
                raise TraceError(lineno, "AFN needs eps, a count and query points")
            eps = _num(rest[0], lineno, "eps")
            m = _num(rest[1], lineno, "query count", int)
            if m < 1:
                raise TraceError(lineno, "AFN query set must be non-empty")
            vals = rest[2:]
            if matrix:
                if len(vals) != m:
                    raise TraceError(lineno, f"expected {m} row indices, got {len(vals)}")
                C = tuple(_num(t, lineno, "row", int) for t in vals)
            else:
                if dim is None:
                    if len(vals) % m:
                        raise TraceError(lineno, "query coordinates do not split into points")
                    dim = len(vals) // m
                if len(vals) != m * dim:
                    raise TraceError(lineno, f"expected {m * dim} coordinates, got {len(vals)}")
                flat = [_num(t, lineno, "coordinate") for t in vals]
                C = tuple(tuple(flat[i * dim:(i + 1) * dim]) for i in range(m))
            ops.append(TraceOp("AFN", (eps, C), lineno))
        elif kind in ("GREEDY", "KCENTER"):
            if len(rest) != 2:
                raise TraceError(lineno, f"{kind} takes k and eps")
            ops.append(TraceOp(kind, (_num(rest[0], lineno, "k", int),
                                      _num(rest[1], lineno, "eps")), lineno))
        elif kind == "MEB":
            if len(rest) != 1:
                raise TraceError(lineno, "MEB takes eps")
            ops.append(TraceOp(kind, (_num(rest[0], lineno, "eps"),), lineno))
        elif kind == "VERIFY":
            if rest:
                raise TraceError(lineno, "VERIFY takes no arguments")
            ops.append(TraceOp(kind, (), lineno))
        else:
            raise TraceError(lineno, f"unknown op {tok[0]!r}")
    return ops


def format_op(op: TraceOp) -> str:
    if op.kind == "INSERT":
        pid, loc = op.args
        coords = " ".join(fmt_float(v) for v in loc) if isinstance(loc, tuple) else str(loc)
        return f"INSERT {pid} {coords}"
    if op.kind == "AFN":
        eps, C = op.args
        flat = [fmt_float(v) for c in C for v in c] if C and isinstance(C[0], tuple) \
            else [str(c) for c in C]
        return f"AFN {fmt_float(eps)} {len(C)} " + " ".join(flat)
    return op.format()


# -- JSON with fixed float formatting ------------------------------------------

def dumps(obj) -> str:
    """Compact JSON; floats carry 17 significant digits, non-finite floats become null."""
    if obj is None or obj is True or obj is False:
        return {None: "null", True: "true", False: "false"}[obj]
    if isinstance(obj, float):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        import json
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{dumps(str(k))}:{dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    if hasattr(obj, "item"):  # numpy scalar
        return dumps(obj.item())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# -- replay --------------------------------------------------------------------

class Replayer:
    """Applies trace ops to a fresh net and produces one record per op.

    ``failures`` counts failed VERIFY ops, failed coverage certificates, and
    (with ``check_oracle``) results that miss their guarantee.
    """

    def __init__(self, config: Config):
        self.config = config
        if config.backend == "matrix":
            if not config.matrix:
                raise ValueError("matrix backend needs a 'matrix' file in the config")
            backend, _ = read_points(config.matrix)
            if not isinstance(backend, MatrixBackend):
                raise ValueError(f"{config.matrix} is not a matrix file")
        else:
            backend = EuclideanBackend(config.dim) if config.dim else None
        self.backend = backend
        self.net: Optional[NavigatingNet] = None
        if backend is not None:
            self.net = NavigatingNet(backend, config.gamma, config.core)
        self.failures = 0

    @property
    def matrix(self) -> bool:
        return self.config.backend == "matrix"

    def _ensure_net(self, dim: int) -> NavigatingNet:
        if self.net is None:
            self.backend = EuclideanBackend(dim)
            self.net = NavigatingNet(self.backend, self.config.gamma, self.config.core)
        return self.net

    def _points(self) -> list[MetricPoint]:
        return self.net.points() if self.net is not None else []

    def _oracle(self, rec: dict, ok_fn) -> None:
        try:
            value, ok = ok_fn()
        except OracleGuardError as e:
            rec["oracle"] = {"skipped": str(e)}
            return
        rec["oracle"] = {"value": value, "pass": ok}
        if not ok:
            self.failures += 1

    def apply(self, op: TraceOp) -> dict:
        cfg = self.config
        kind = op.kind
        if kind == "INSERT":
            pid, loc = op.args
            net = self._ensure_net(len(loc)) if not self.matrix else self.net
            net.insert(MetricPoint(pid, loc))
            return {"op": "insert", "id": pid}
        if kind == "VERIFY":
            if self.net is None:
                return {"op": "verify", "pass": True}
            rep = verify_invariants(self.net)
            if not rep.ok:
                self.failures += 1
                return {"op": "verify", "pass": False, "violation": rep.violation}
            return {"op": "verify", "pass": True}
        if self.net is None or (kind != "DELETE" and not len(self.net)):
            raise ValueError("the point set is empty")
        net = self.net
        if kind == "DELETE":
            (pid,) = op.args
            net.delete(pid)
            return {"op": "delete", "id": pid}
        if kind == "AFN":
            eps, C = op.args
            pid, d, stats = afn(net, C, eps)
            rec = {"op": "afn", "eps": eps, "id": pid, "distance": d, "stats": stats.to_json()}
            if cfg.check_oracle:
                def check():
                    _, best = fn_exact(self._points(), C, net.backend)
                    return best, best <= (1 + eps) * d * (1 + ORACLE_RTOL)
                self._oracle(rec, check)
            return rec
        if kind == "GREEDY":
            k, eps = op.args
            sol = greedy_kcenter(net, k, eps)
            rec = {"op": "greedy", "k": k, "eps": eps, **sol.to_json(), "covered": sol.covered}
            bound = 2 + eps
            oracle = lambda: kcenter_exact_metric(self._points(), k, net.backend).value
        elif kind == "MEB":
            (eps,) = op.args
            sol = meb(net, eps)
            rec = {"op": "meb", "eps": eps, **sol.to_json(), "covered": sol.covered}
            bound = 1 + eps
            oracle = lambda: meb_exact(self._points()).value
        elif kind == "KCENTER":
            k, eps = op.args
            sol = euclidean_kcenter(net, k, eps, budget=cfg.budget)
            rec = {"op": "kcenter", "k": k, "eps": eps, **sol.to_json(), "covered": sol.covered}
            bound = 1 + eps
            oracle = lambda: kcenter_exact_euclidean(self._points(), k).value
        else:  # pragma: no cover - parse_trace rejects other kinds
            raise ValueError(f"unknown op {kind}")
        if not sol.covered:
            self.failures += 1
        if cfg.check_oracle:
            def check():
                v = oracle()
                return v, sol.radius <= bound * v * (1 + ORACLE_RTOL)
            self._oracle(rec, check)
        return rec

    def run(self, ops: Sequence[TraceOp]) -> Iterator[str]:
        """Yield one JSON line per op; op errors become :class:`TraceError`."""
        for op in ops:
            try:
                rec = self.apply(op)
            except (ValueError, KeyError, IndexError) as e:
                msg = e.args[0] if isinstance(e, KeyError) and e.args else str(e)
                raise TraceError(op.lineno, f"{op.kind}: {msg}") from None
            yield dumps(rec)


def random_trace(n_ops: int, dim: int, seed: int = 0, target: int = 12,
                 eps_choices=(0.1, 0.5, 1.0), k_max: int = 3) -> list[TraceOp]:
    """A mixed update/query trace kept small enough for the exhaustive checks.

    Coordinates are rounded to 6 decimals so the text form round-trips exactly.
    MEB and KCENTER ops are only emitted with ``eps >= 0.5`` and k <= 2 to keep
    the guess family small.
    """
    import numpy as np

    rng = np.random.default_rng(seed)
    live: list[int] = []
    locs: set = set()
    nxt = 0
    ops = []

    def pick_eps():
        return float(eps_choices[int(rng.integers(len(eps_choices)))])

    for _ in range(n_ops):
        u = rng.random()
        if not live or (u < 0.45 and len(live) < target + 6):
            while True:
                loc = tuple(round(float(v), 6) for v in rng.random(dim) * 10)
                if loc not in locs:
                    break
            locs.add(loc)
            ops.append(TraceOp("INSERT", (nxt, loc)))
            live.append(nxt)
            nxt += 1
        elif u < 0.65 and len(live) > 1:
            pid = live.pop(int(rng.integers(len(live))))
            ops.append(TraceOp("DELETE", (pid,)))
        elif u < 0.8:
            m = int(rng.integers(1, 4))
            C = tuple(tuple(round(float(v), 6) for v in rng.random(dim) * 10) for _ in range(m))
            ops.append(TraceOp("AFN", (pick_eps(), C)))
        elif u < 0.87:
            ops.append(TraceOp("GREEDY", (int(rng.integers(1, k_max + 1)), pick_eps())))
        elif u < 0.92 and dim <= 3:
            ops.append(TraceOp("MEB", (max(0.5, pick_eps()),)))
        elif u < 0.95 and dim <= 3:
            ops.append(TraceOp("KCENTER", (int(rng.integers(1, 3)), 1.0)))
        else:
            ops.append(TraceOp("VERIFY"))
    ops.append(TraceOp("VERIFY"))
    return ops
