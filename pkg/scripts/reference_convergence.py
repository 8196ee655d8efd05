"""Self-convergence of the graded-mesh Crank-Nicolson reference in space.

Runs the reference at several node counts with a common step and reports the
max-norm change between successive refinements on a uniform comparison grid,
together with the implied order.

Usage: python3 scripts/reference_convergence.py [--nx 1001 2001 3001 6001] [--dt 1e-3]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from qunt.benchmark import BenchmarkCase, reference_solution


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nx", type=int, nargs="+", default=[1001, 2001, 3001, 6001])
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--points", type=int, default=401)
    args = ap.parse_args()

    case = BenchmarkCase()
    x = np.linspace(0.0, 1.0, args.points)
    fields, prev = {}, None
    for nx in args.nx:
        tic = time.perf_counter()
        # save about every 5e-3, on a whole number of steps
        save_dt = args.dt * max(1, round(5e-3 / args.dt))
        ref = reference_solution(case, nx, args.dt, save_dt=save_dt)
        fields[nx] = (ref.sample(x), ref.flux_left, ref.flux_right)
        print(f"nx={nx}: {time.perf_counter() - tic:.1f} s")
    for a, b in zip(args.nx, args.nx[1:]):
        du = np.max(np.abs(fields[a][0] - fields[b][0]))
        dq = max(np.max(np.abs(fields[a][1] - fields[b][1])),
                 np.max(np.abs(fields[a][2] - fields[b][2])))
        line = f"{a} -> {b}: max |du| {du:.3e}, max |dq| {dq:.3e}"
        if prev is not None:
            line += f", observed order {np.log(prev[1] / du) / np.log(b / prev[0]):.2f}"
        print(line)
        prev = (a, du)


if __name__ == "__main__":
    main()
