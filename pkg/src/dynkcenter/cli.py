"""``dynkcenter`` command line: gen, gen-trace, run, bench."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import BenchSpec, read_spec_items, run_bench, write_csv
from .metric import EuclideanBackend, format_points
from .trace import (Config, Replayer, TraceError, format_op, parse_trace,
                    random_trace)
from .workloads import DISTRIBUTIONS, generate


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline=""), True


def cmd_gen(args) -> int:
    pts = generate(args.distribution, args.n, args.dim, args.seed, side=args.side,
                   clusters=args.clusters, spread=args.spread,
                   separation=args.separation, lattice=args.lattice)
    fh, close = _open_out(args.output)
    try:
        fh.write(format_points(pts, EuclideanBackend(args.dim)))
    finally:
        if close:
            fh.close()
    return 0


def cmd_gen_trace(args) -> int:
    ops = random_trace(args.ops, args.dim, args.seed, target=args.target)
    fh, close = _open_out(args.output)
    try:
        for op in ops:
            fh.write(format_op(op) + "\n")
    finally:
        if close:
            fh.close()
    return 0


def cmd_run(args) -> int:
    cfg = Config.load(args.config) if args.config else Config()
    if args.check_oracle:
        cfg.check_oracle = True
    if args.core:
        cfg.core = args.core
    try:
        text = Path(args.trace).read_text()
        ops = parse_trace(text.splitlines(), matrix=cfg.backend == "matrix", dim=cfg.dim)
        rep = Replayer(cfg)
    except (TraceError, ValueError, OSError) as e:
        print(f"{args.trace}: {e}", file=sys.stderr)
        return 2
    fh, close = _open_out(args.output)
    try:
        for line in rep.run(ops):
            fh.write(line + "\n")
    except TraceError as e:
        fh.flush()
        print(f"{args.trace}: {e}", file=sys.stderr)
        return 2
    finally:
        if close:
            fh.close()
    if rep.failures:
        print(f"{rep.failures} check(s) failed", file=sys.stderr)
        return 1
    return 0


def cmd_bench(args) -> int:
    try:
        items = read_spec_items(args.spec_file) if args.spec_file else []
        # command-line items override the file
        spec = BenchSpec.parse(items + list(args.spec))
    except (ValueError, OSError) as e:
        print(f"bench: {e}", file=sys.stderr)
        return 2
    rows = run_bench(spec)
    fh, close = _open_out(args.output)
    try:
        write_csv(rows, fh)
    finally:
        if close:
            fh.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dynkcenter",
                                 description="Dynamic k-center over a navigating net.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="write a generated point file")
    g.add_argument("distribution", choices=DISTRIBUTIONS)
    g.add_argument("-n", type=int, required=True)
    g.add_argument("-D", "--dim", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--side", type=float, default=1.0, help="uniform-cube edge length")
    g.add_argument("--clusters", type=int, default=3)
    g.add_argument("--spread", type=float, default=0.01)
    g.add_argument("--separation", type=float, default=100.0)
    g.add_argument("--lattice", type=int, default=None,
                   help="grid: sample n nodes of a lattice with this many nodes per side")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("gen-trace", help="write a random update/query trace")
    t.add_argument("--ops", type=int, default=1000)
    t.add_argument("-D", "--dim", type=int, default=2)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--target", type=int, default=12, help="typical live set size")
    t.add_argument("-o", "--output")
    t.set_defaults(func=cmd_gen_trace)

    r = sub.add_parser("run", help="replay a trace, one JSON line per op")
    r.add_argument("trace")
    r.add_argument("--config", help="key=value file (gamma, backend, matrix, dim, "
                                    "check_oracle, budget, core)")
    r.add_argument("--check-oracle", action="store_true",
                   help="compare every query result with an exhaustive solver")
    r.add_argument("--core", choices=["python", "compiled"])
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="timed workload, CSV rows per op")
    b.add_argument("spec", nargs="*", help="key=value items, e.g. n=250,500 separation=10,20")
    b.add_argument("--spec-file")
    b.add_argument("-o", "--output")
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as e:
        print(f"{args.cmd}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
