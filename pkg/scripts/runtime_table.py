"""Wall-clock comparison of CN/1001, QUNT/51 and IMEX/501 at dt=1e-2.

Usage: python3 scripts/runtime_table.py [--out results/runtime.csv] [--cache .qunt-cache]
"""
from __future__ import annotations

import argparse
from pathlib import Path

from qunt.benchmark import BenchmarkCase, reference_solution, runtime_comparison, write_runtime_csv


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results/runtime.csv"))
    ap.add_argument("--cache", type=Path, default=Path(".qunt-cache"))
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--no-gate", action="store_true", help="skip the accuracy gate (no reference)")
    args = ap.parse_args()
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.cache.mkdir(parents=True, exist_ok=True)

    case = BenchmarkCase()
    ref = None if args.no_gate else reference_solution(case, cache_dir=args.cache)
    rows, gate = runtime_comparison(case, repeats=args.repeats, ref=ref)
    for scheme, (eps, ok) in gate.items():
        print(f"gate {scheme:5s} eps_inf={eps:.3e} {'ok' if ok else 'MISSED'}")
    for r in rows:
        print(f"{r.horizon:8s} {r.scheme:5s}/{r.nx:<5d} {r.seconds:9.3f} s  ratio {r.ratio:.2f}")
    write_runtime_csv(args.out, rows)


if __name__ == "__main__":
    main()
