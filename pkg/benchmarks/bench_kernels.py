"""Compare the compiled kernels against the numpy fallback.

Times one right-hand-side evaluation per surface and degree, then full
solves of the sphere and torus benchmark problems under each backend.

    python benchmarks/bench_kernels.py [--repeat N] [--csv PATH]
"""

import argparse
import csv
import sys
import timeit

import numpy as np

from geoflow import HeatFlowProblem, cgl_nodes, eggbox, euclidean, solve, sphere, torus
from geoflow import kernels
from geoflow.heatflow import _Flow, initial_curve

CASES = {
    "euclidean": (euclidean(2), (0.0, 0.0), (1.0, 1.0)),
    "sphere": (sphere(1.0), (np.pi / 8, np.pi / 8), (3 * np.pi / 4, 2 * np.pi / 3)),
    "torus": (torus(5.0, 3.0), (0.0, 0.0), (5 * np.pi / 4, 5 * np.pi / 4)),
    "eggbox": (eggbox(), (-1.5, -1.5), (1.5, 1.5)),
}


def bench_rhs(repeat):
    rows = []
    for name, (field, p, q) in CASES.items():
        for D in (8, 16, 64, 256):
            grid = cgl_nodes(D)
            X = initial_curve(p, q, grid).X
            # bend the line slightly so every term is active
            X[:, 1:-1] += 0.01 * np.sin(np.pi * grid.nodes[1:-1])
            flow = _Flow(field, grid, 4.0)
            times = {}
            for backend in ("python", "compiled"):
                with kernels.use_backend(backend):
                    n = max(10, 20000 // (D + 1))
                    t = min(timeit.repeat(lambda: flow.rhs(X), number=n, repeat=repeat)) / n
                times[backend] = t
            rows.append(("rhs", name, D, times["python"] * 1e6, times["compiled"] * 1e6,
                         times["python"] / times["compiled"]))
    return rows


def bench_solve(repeat):
    rows = []
    for name, D in (("sphere", 7), ("torus", 11)):
        field, p, q = CASES[name]
        times = {}
        for backend in ("python", "compiled"):
            with kernels.use_backend(backend):
                best = np.inf
                for _ in range(repeat):
                    best = min(best, solve(HeatFlowProblem(field, p, q, D=D)).wall_time)
            times[backend] = best
        rows.append(("solve", name, D, times["python"] * 1e6, times["compiled"] * 1e6,
                     times["python"] / times["compiled"]))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--csv", default=None, help="also write the table to this CSV file")
    args = ap.parse_args(argv)
    if kernels.compiled_backend is None:
        sys.exit("compiled kernels are not built; nothing to compare")
    rows = bench_rhs(args.repeat) + bench_solve(args.repeat)
    header = ("kind", "surface", "D", "python_us", "compiled_us", "speedup")
    print(f"{'kind':6} {'surface':10} {'D':>4} {'python us':>12} {'compiled us':>12} {'speedup':>8}")
    for kind, name, D, tp, tc, sp in rows:
        print(f"{kind:6} {name:10} {D:4d} {tp:12.1f} {tc:12.1f} {sp:8.1f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)


if __name__ == "__main__":
    main()
