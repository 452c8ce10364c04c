"""Time the pure-Python and compiled net cores on the same workloads.

    python benchmarks/bench_cores.py [--n 2000] [--ops 10000] [--queries 500]

Prints one line per (core, phase) with total wall time.  Both cores see the
identical update and query sequence, and the script checks that they return
the same answers.
"""

import argparse
import time

import numpy as np

from dynkcenter import CORES, EuclideanBackend, MetricPoint, NavigatingNet, afn
from dynkcenter.workloads import UpdateStream, generate


def run(core, pts, ops, queries, dim, seed):
    clock = time.perf_counter
    net = NavigatingNet(EuclideanBackend(dim), core=core)
    t0 = clock()
    for p in pts:
        net.insert(p)
    t_build = clock() - t0

    stream = UpdateStream(net, seed, target=len(pts))
    t0 = clock()
    log = [stream.step() for _ in range(ops)]
    t_upd = clock() - t0

    rng = np.random.default_rng(seed)
    ids = net.ids()
    Cs = [[net.location(ids[int(i)]) for i in rng.choice(len(ids), 4, replace=False)]
          for _ in range(queries)]
    t0 = clock()
    answers = [afn(net, C, 0.1)[:2] for C in Cs]
    t_q = clock() - t0
    return {"build": t_build, "updates": t_upd, "queries": t_q}, (log, answers)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--ops", type=int, default=10000)
    ap.add_argument("--queries", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    pts = generate("uniform-cube", a.n, a.dim, a.seed)
    results = {}
    for core in sorted(CORES):
        times, out = run(core, pts, a.ops, a.queries, a.dim, a.seed)
        results[core] = (times, out)
        for phase, t in times.items():
            print(f"{core:9s} {phase:8s} {t:9.3f} s")
    if len(results) == 2:
        (tp, op), (tc, oc) = results["python"], results["compiled"]
        assert op == oc, "cores disagree"
        for phase in tp:
            print(f"speedup  {phase:8s} {tp[phase] / tc[phase]:9.1f}x")
    else:
        print("compiled core not built; only the Python core was timed")


if __name__ == "__main__":
    main()
