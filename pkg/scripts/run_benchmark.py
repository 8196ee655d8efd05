"""Score QUNT and IMEX on the nonlinear benchmark and write the convergence tables.

Usage: python3 scripts/run_benchmark.py [--out results/benchmark] [--cache .qunt-cache]
"""
from __future__ import annotations

import argparse
import time
from pathlib import Path

import numpy as np

from qunt.benchmark import (
    BenchmarkCase,
    convergence_study,
    reference_solution,
    run_scheme,
    trend_diagnostics,
    write_errors_field_csv,
    write_errors_flux_csv,
    write_trajectory_csv,
)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results/benchmark"))
    ap.add_argument("--cache", type=Path, default=Path(".qunt-cache"))
    ap.add_argument("--nx-ref", type=int, default=3001)
    ap.add_argument("--dt-ref", type=float, default=1e-4)
    ap.add_argument("--skip-grid", action="store_true", help="only the Nx=51 headline runs")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    args.cache.mkdir(parents=True, exist_ok=True)

    case = BenchmarkCase()
    tic = time.perf_counter()
    ref = reference_solution(case, args.nx_ref, args.dt_ref, cache_dir=args.cache)
    print(f"reference {args.nx_ref} nodes, dt {args.dt_ref:g}: {time.perf_counter() - tic:.1f} s")

    for scheme in ("qunt", "imex"):
        traj, rep = run_scheme(case, scheme, case.nx, case.dt, ref)
        print(f"{scheme:5s} Nx={case.nx} dt={case.dt:g}: eps_inf={rep.eps_inf:.3e} "
              f"xi_inf={rep.xi_inf:.3e} ({rep.runtime_seconds:.1f} s)")
        write_trajectory_csv(args.out / f"trajectory_{scheme}.csv", traj)

    if args.skip_grid:
        return
    grid = np.linspace(0.0, 1.0, 80)
    field = convergence_study(case, ref, [1e-2, 1e-3, 1e-4], [10, 20, 30, 40, 50, 60, 80],
                              ("qunt", "imex"), comparison_nodes=grid)
    flux = convergence_study(case, ref, [1e-2, 1e-3, 1e-4], [20, 40, 60, 80, 100],
                             ("qunt", "imex"), comparison_nodes=grid)
    write_errors_field_csv(args.out / "errors_field.csv", field)
    write_errors_flux_csv(args.out / "errors_flux.csv", flux)
    for (scheme, dt), d in sorted(trend_diagnostics(field).items()):
        print(f"{scheme:5s} dt={dt:g}: eps_inf decreasing in Nx: {d['decreasing']}")


if __name__ == "__main__":
    main()
