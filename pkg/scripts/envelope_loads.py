"""Annual transmission loads of the wall and roof assemblies under a synthetic city climate.

Usage: python3 scripts/envelope_loads.py [--city curitiba] [--out results/loads]
"""
from __future__ import annotations

import argparse
from pathlib import Path

from qunt.climate import CITY_PROFILES, synthesize_climate
from qunt.envelope import (
    IndoorSchedule,
    roof,
    simulate_year,
    wall1,
    wall2,
    wall3,
    write_flux_csv,
    write_loads_csv,
)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--city", choices=sorted(CITY_PROFILES), default="curitiba")
    ap.add_argument("--insulation", type=float, default=0.10, help="insulation thickness, m")
    ap.add_argument("--out", type=Path, default=Path("results/loads"))
    args = ap.parse_args()

    profile = CITY_PROFILES[args.city]
    climate = synthesize_climate(profile)
    schedule = IndoorSchedule.for_latitude(profile.latitude)
    l = args.insulation
    assemblies = {
        "wall1": wall1(),
        "wall2": wall2(l),
        "wall3": wall3(l),
        "roof_outside": roof(l, "outside"),
        "roof_inside": roof(l, "inside"),
    }
    print(f"{args.city}, insulation {l:g} m (loads in MJ/m2)")
    for name, assembly in assemblies.items():
        res = simulate_year(assembly, climate, schedule)
        rep = res.loads
        out = args.out / name
        out.mkdir(parents=True, exist_ok=True)
        write_flux_csv(out / "flux.csv", rep)
        write_loads_csv(out / "loads_daily.csv", out / "loads_monthly.csv", rep)
        print(f"{name:13s} heating {rep.annual_heating:9.2f}  cooling {rep.annual_cooling:9.2f}  "
              f"total {rep.annual_total:9.2f}  ({res.wall_seconds:.1f} s)")


if __name__ == "__main__":
    main()
