"""Optimum insulation thickness per city and orientation from the full pipeline.

Usage: python3 scripts/optimum_thickness.py [--cities curitiba salvador] [--out results/optimum.csv]
"""
from __future__ import annotations

import argparse
import csv
from pathlib import Path

import numpy as np

from qunt.climate import CITY_PROFILES, synthesize_climate
from qunt.econ import EconomicParams, optimum_thickness
from qunt.envelope import IndoorSchedule, roof, sweep_thickness, wall2

TEMPLATES = {
    "N": lambda l: wall2(l, "N"),
    "S": lambda l: wall2(l, "S"),
    "E": lambda l: wall2(l, "E"),
    "W": lambda l: wall2(l, "W"),
    "roof_outside": lambda l: roof(l, "outside"),
    "roof_inside": lambda l: roof(l, "inside"),
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cities", nargs="+", choices=sorted(CITY_PROFILES), default=list(CITY_PROFILES))
    ap.add_argument("--lmax", type=float, default=0.15)
    ap.add_argument("--out", type=Path, default=Path("results/optimum.csv"))
    args = ap.parse_args()
    args.out.parent.mkdir(parents=True, exist_ok=True)

    params = EconomicParams()
    sweep = np.round(np.arange(0.01, args.lmax + 1e-9, 0.01), 2)
    with args.out.open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["city", "assembly", "l_opt_m", "C_T_min", "E_at_opt_MJm2"])
        for city in args.cities:
            profile = CITY_PROFILES[city]
            climate = synthesize_climate(profile)
            schedule = IndoorSchedule.for_latitude(profile.latitude)
            cells = []
            for name, template in TEMPLATES.items():
                rows = [r for r in sweep_thickness(template, sweep, climate, schedule) if not r.error]
                l_opt, table = optimum_thickness(((r.thickness, r.total) for r in rows), params)
                best = min(table, key=lambda c: c.total)
                out.writerow([city, name, l_opt, best.total, best.energy])
                cells.append(f"{name}={l_opt:.2f}")
            print(f"{city:15s} " + " ".join(cells))


if __name__ == "__main__":
    main()
