"""Command-line entry point: ``qunt <subcommand> [--config file.toml] [flags]``.

Every subcommand reads an optional TOML scenario file whose sections mirror
:data:`DEFAULTS`; command-line flags override file values. Unknown sections
or keys are rejected before any computation starts. Temperatures are given in
deg C and converted to kelvin internally.

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import logging
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import benchmark as bm
from .climate import CITY_PROFILES, ClimateSeries, load_climate_csv, synthesize_climate, write_climate_csv
from .econ import EconomicParams, optimum_thickness, write_costs_csv
from .envelope import (
    MATERIALS,
    IndoorSchedule,
    SolverSettings,
    WallAssembly,
    roof,
    simulate_year,
    sweep_thickness,
    wall1,
    wall2,
    wall3,
    write_flux_csv,
    write_loads_csv,
    write_sweep_csv,
)
from .errors import NumericalError
from .gridmotion import MonitorConfig

__all__ = ["ConfigError", "DEFAULTS", "build_parser", "load_config", "main"]

log = logging.getLogger("qunt")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2

TEMPLATES = ("wall1", "wall2", "wall3", "roof_outside", "roof_inside", "custom")

DEFAULTS = {
    "output": {"dir": "."},
    "assembly": {
        "template": "wall2",
        "insulation": 0.10,
        "orientation": "S",
        "layers": [],
        "solar_absorptivity": 0.5,
        "emissivity": 0.9,
        "h_inside": 10.0,
        "h_outside": 25.0,
    },
    "climate": {
        "source": "synthetic",
        "city": "curitiba",
        "file": "",
        "seed": 0,
        "noise": 1.0,
        "hours": 8760,
        "t_out": 20.0,
        "q_solar": 0.0,
        "sky_offset": 10.0,
    },
    "indoor": {"summer": 25.0, "winter": 20.0, "peak_day": -1.0},
    "solver": {"scheme": "qunt", "nx": 41, "dt": 0.1, "t0": 3600.0, "T0": 20.0,
               "monitor": [0.8, 2.0, 0.2, 3.0, 50.0, 5.0]},
    "sweep": {"start": 0.01, "stop": 0.30, "step": 0.01, "workers": 1, "input": ""},
    "economics": {"insulation_price": 100.0, "system_efficiency": 0.8, "energy_price": 0.218},
    "benchmark": {
        "nx": 51,
        "dt": 5e-3,
        "tau": 48.0,
        "monitor": [0.9, 2.0, 0.1, 2.0, 100.0, 10.0],
        "nx_ref": 3001,
        "dt_ref": 1e-4,
        "save_dt": 5e-3,
        "grading": 0.95,
        "cache_dir": "",
        "dt_list": [1e-1, 1e-2, 1e-3, 1e-4],
        "nx_field": [10, 20, 30, 40, 50, 60, 80],
        "nx_flux": [20, 40, 60, 80, 100],
        "runtime_dt": 1e-2,
        "runtime_configs": [["cn", 1001], ["qunt", 51], ["imex", 501]],
        "horizons": [48.0, 720.0, 8760.0],
        "repeats": 3,
        "workers": 1,
    },
}

# flag dest -> (section, key)
_FLAG_TARGETS = {
    "out": ("output", "dir"),
    "template": ("assembly", "template"),
    "insulation": ("assembly", "insulation"),
    "orientation": ("assembly", "orientation"),
    "climate_source": ("climate", "source"),
    "city": ("climate", "city"),
    "climate_file": ("climate", "file"),
    "seed": ("climate", "seed"),
    "hours": ("climate", "hours"),
    "t_out": ("climate", "t_out"),
    "scheme": ("solver", "scheme"),
    "solver_nx": ("solver", "nx"),
    "solver_dt": ("solver", "dt"),
    "start": ("sweep", "start"),
    "stop": ("sweep", "stop"),
    "step": ("sweep", "step"),
    "workers": ("sweep", "workers"),
    "sweep_input": ("sweep", "input"),
    "insulation_price": ("economics", "insulation_price"),
    "energy_price": ("economics", "energy_price"),
    "efficiency": ("economics", "system_efficiency"),
    "nx": ("benchmark", "nx"),
    "dt": ("benchmark", "dt"),
    "tau": ("benchmark", "tau"),
    "nx_ref": ("benchmark", "nx_ref"),
    "dt_ref": ("benchmark", "dt_ref"),
    "cache_dir": ("benchmark", "cache_dir"),
    "bench_workers": ("benchmark", "workers"),
    "repeats": ("benchmark", "repeats"),
}


class ConfigError(ValueError):
    """Invalid scenario file or flag value."""


# -- configuration ----------------------------------------------------------------


def _check_type(section: str, key: str, value, default):
    where = f"[{section}] {key}"
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, str):
        ok = isinstance(value, str)
    else:
        ok = isinstance(value, list)
    if not ok:
        raise ConfigError(f"{where}: expected {type(default).__name__}, got {value!r}")
    return value


def merge_config(base: dict, overrides: dict, origin: str) -> dict:
    """``base`` updated with ``overrides``; unknown sections or keys raise :class:`ConfigError`."""
    cfg = copy.deepcopy(base)
    for section, values in overrides.items():
        if section not in cfg:
            raise ConfigError(f"{origin}: unknown section [{section}]")
        if not isinstance(values, dict):
            raise ConfigError(f"{origin}: [{section}] must be a table")
        for key, value in values.items():
            if key not in cfg[section]:
                raise ConfigError(f"{origin}: unknown key [{section}] {key}")
            cfg[section][key] = _check_type(section, key, value, DEFAULTS[section][key])
    return cfg


def load_config(path: str | Path | None, flags: dict | None = None) -> dict:
    """Defaults, then the TOML file, then flag overrides ``{dest: value}``."""
    cfg = copy.deepcopy(DEFAULTS)
    if path:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        cfg = merge_config(cfg, data, str(path))
    over: dict = {}
    for dest, value in (flags or {}).items():
        if value is None or dest not in _FLAG_TARGETS:
            continue
        section, key = _FLAG_TARGETS[dest]
        over.setdefault(section, {})[key] = value
    return merge_config(cfg, over, "command line")


def _monitor(values) -> MonitorConfig:
    if len(values) != 6:
        raise ConfigError("monitor needs six values: alpha1, beta1, alpha2, beta2, beta, sigma")
    a1, b1, a2, b2, beta, sigma = (float(v) for v in values)
    return MonitorConfig(alpha1=a1, beta1=b1, alpha2=a2, beta2=b2, beta_mesh=beta, sigma=sigma)


def build_assembly(cfg: dict, insulation: float | None = None) -> WallAssembly:
    a = cfg["assembly"]
    l = a["insulation"] if insulation is None else insulation
    kw = dict(solar_absorptivity=a["solar_absorptivity"], emissivity=a["emissivity"],
              h_inside=a["h_inside"], h_outside=a["h_outside"])
    t = a["template"]
    if t not in TEMPLATES:
        raise ConfigError(f"[assembly] template must be one of {TEMPLATES}")
    if t == "wall1":
        return wall1(a["orientation"], **kw)
    if t == "wall2":
        return wall2(l, a["orientation"], **kw)
    if t == "wall3":
        return wall3(l, a["orientation"], **kw)
    if t.startswith("roof"):
        return roof(l, t.split("_")[1], **kw)
    layers = []
    for i, layer in enumerate(a["layers"]):
        if not isinstance(layer, dict) or set(layer) != {"material", "thickness"}:
            raise ConfigError(f"[assembly] layers[{i}] needs exactly 'material' and 'thickness'")
        name = str(layer["material"]).lower()
        if name not in MATERIALS:
            raise ConfigError(f"[assembly] layers[{i}]: unknown material {name!r}; "
                              f"known: {sorted(MATERIALS)}")
        layers.append((MATERIALS[name], float(layer["thickness"])))
    return WallAssembly(tuple(layers), a["orientation"], **kw)


def build_climate(cfg: dict) -> ClimateSeries:
    c = cfg["climate"]
    if c["source"] == "file":
        if not c["file"]:
            raise ConfigError("[climate] source = 'file' needs [climate] file")
        return load_climate_csv(c["file"], sky_offset=c["sky_offset"])
    if c["source"] == "constant":
        return ClimateSeries.constant(c["hours"], c["t_out"], c["q_solar"])
    if c["source"] != "synthetic":
        raise ConfigError("[climate] source must be 'synthetic', 'file' or 'constant'")
    if c["city"] not in CITY_PROFILES:
        raise ConfigError(f"[climate] city must be one of {sorted(CITY_PROFILES)}")
    prof = CITY_PROFILES[c["city"]].with_(seed=c["seed"], noise=c["noise"],
                                          sky_offset=c["sky_offset"])
    return synthesize_climate(prof, hours=c["hours"])


def build_schedule(cfg: dict) -> IndoorSchedule:
    i = cfg["indoor"]
    if i["peak_day"] >= 0:
        return IndoorSchedule(i["summer"], i["winter"], i["peak_day"])
    c = cfg["climate"]
    lat = CITY_PROFILES[c["city"]].latitude if c["source"] == "synthetic" else -1.0
    return IndoorSchedule.for_latitude(lat, summer_setpoint=i["summer"], winter_setpoint=i["winter"])


def build_solver(cfg: dict) -> SolverSettings:
    s = cfg["solver"]
    return SolverSettings(s["scheme"], s["nx"], s["dt"], _monitor(s["monitor"]), s["t0"],
                          s["T0"] + 273.15)


def _thicknesses(cfg: dict) -> np.ndarray:
    s = cfg["sweep"]
    if not (0 < s["start"] <= s["stop"] and s["step"] > 0):
        raise ConfigError("[sweep] needs 0 < start <= stop and step > 0")
    n = int(np.floor((s["stop"] - s["start"]) / s["step"] + 1e-9)) + 1
    return np.round(s["start"] + s["step"] * np.arange(n), 10)


def _outdir(cfg: dict) -> Path:
    out = Path(cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands -----------------------------------------------------------------------


def cmd_benchmark(cfg: dict) -> int:
    b = cfg["benchmark"]
    case = bm.BenchmarkCase(tau=b["tau"], monitor=_monitor(b["monitor"]), dt=b["dt"], nx=b["nx"])
    out = _outdir(cfg)
    ref = bm.reference_solution(case, b["nx_ref"], b["dt_ref"], b["save_dt"], b["grading"],
                                cache_dir=b["cache_dir"] or None)
    xc = np.linspace(0.0, 1.0, b["nx"])
    for scheme in ("qunt", "imex"):
        traj, rep = bm.run_scheme(case, scheme, b["nx"], b["dt"], ref, xc)
        print(f"{scheme:5s} Nx={b['nx']} dt={b['dt']:g}: eps_inf={rep.eps_inf:.4g} "
              f"xi_inf left={rep.xi_inf_left:.4g} right={rep.xi_inf_right:.4g}")
        if scheme == "qunt":
            bm.write_trajectory_csv(out / "trajectory.csv", traj)
    field_cells = bm.convergence_study(case, ref, b["dt_list"], b["nx_field"],
                                       workers=b["workers"])
    flux_cells = bm.convergence_study(case, ref, b["dt_list"], b["nx_flux"],
                                      workers=b["workers"])
    bm.write_errors_field_csv(out / "errors_field.csv", field_cells)
    bm.write_errors_flux_csv(out / "errors_flux.csv", flux_cells)
    horizons = {f"{h:g}": float(h) for h in b["horizons"]}
    configs = [(str(s), int(n)) for s, n in b["runtime_configs"]]
    rows, gate = bm.runtime_comparison(case, configs, dt=b["runtime_dt"], horizons=horizons,
                                       repeats=b["repeats"], ref=ref)
    bm.write_runtime_csv(out / "runtime.csv", rows)
    for r in rows:
        print(f"runtime {r.scheme:5s} Nx={r.nx:5d} horizon={r.horizon:>6s}: "
              f"{r.seconds:.3f} s ({100 * r.ratio:.0f}% of {rows[0].scheme})")
    failed = [c for c in field_cells + flux_cells if c.error]
    for c in failed:
        print(f"failed cell {c.scheme}/{c.nx}/{c.dt:g}: {c.error}", file=sys.stderr)
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_simulate(cfg: dict) -> int:
    out = _outdir(cfg)
    res = simulate_year(build_assembly(cfg), build_climate(cfg), build_schedule(cfg),
                        build_solver(cfg))
    write_flux_csv(out / "flux.csv", res.loads)
    write_loads_csv(out / "loads_daily.csv", out / "loads_monthly.csv", res.loads)
    r = res.loads
    print(f"heating {r.annual_heating:.4f} MJ/m2, cooling {r.annual_cooling:.4f} MJ/m2, "
          f"total {r.annual_total:.4f} MJ/m2 ({res.wall_seconds:.2f} s)")
    return EXIT_OK


def _run_sweep(cfg: dict):
    ls = _thicknesses(cfg)
    rows = sweep_thickness(lambda l: build_assembly(cfg, l), ls, build_climate(cfg),
                           build_schedule(cfg), build_solver(cfg), workers=cfg["sweep"]["workers"])
    for r in rows:
        if r.error:
            print(f"thickness {r.thickness:g} m failed: {r.error}", file=sys.stderr)
    return rows


def cmd_sweep(cfg: dict) -> int:
    rows = _run_sweep(cfg)
    write_sweep_csv(_outdir(cfg) / "sweep.csv", rows)
    return EXIT_NUMERICAL if any(r.error for r in rows) else EXIT_OK


def read_sweep_csv(path: str | Path) -> list[tuple[float, float]]:
    """``(thickness, total)`` pairs from a ``sweep.csv``; failed rows are rejected."""
    pairs = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"l_i_m", "total_MJm2"} - set(reader.fieldnames or [])
        if missing:
            raise ConfigError(f"{path}: missing columns {sorted(missing)}")
        for row_no, row in enumerate(reader, start=2):
            try:
                pair = float(row["l_i_m"]), float(row["total_MJm2"])
            except ValueError as exc:
                raise ConfigError(f"{path}, row {row_no}: {exc}") from exc
            if row.get("error") or not np.isfinite(pair[1]):
                raise ConfigError(f"{path}, row {row_no}: sweep point has no valid load")
            pairs.append(pair)
    return pairs


def cmd_optimize(cfg: dict) -> int:
    e = cfg["economics"]
    params = EconomicParams(e["insulation_price"], e["system_efficiency"], e["energy_price"])
    if cfg["sweep"]["input"]:
        pairs = read_sweep_csv(cfg["sweep"]["input"])
    else:
        rows = _run_sweep(cfg)
        if any(r.error for r in rows):
            return EXIT_NUMERICAL
        pairs = [(r.thickness, r.total) for r in rows]
    l_opt, table = optimum_thickness(pairs, params)
    write_costs_csv(_outdir(cfg) / "costs.csv", table, l_opt)
    best = next(r for r in table if r.thickness == l_opt)
    print(f"optimum thickness {l_opt:.3f} m, total cost {best.total:.4f} $/m2")
    return EXIT_OK


def cmd_synth_climate(cfg: dict) -> int:
    series = build_climate(cfg)
    name = cfg["climate"]["city"] if cfg["climate"]["source"] == "synthetic" else "climate"
    path = write_climate_csv(series, _outdir(cfg) / f"{name}.csv")
    print(f"wrote {len(series)} hourly rows to {path}")
    return EXIT_OK


COMMANDS = {
    "benchmark": (cmd_benchmark, "nonlinear benchmark: errors, convergence grid, runtimes"),
    "simulate": (cmd_simulate, "one yearly envelope simulation: flux and loads"),
    "sweep": (cmd_sweep, "annual loads over an insulation-thickness sweep"),
    "optimize": (cmd_optimize, "optimum insulation thickness from a sweep"),
    "synth-climate": (cmd_synth_climate, "write a synthetic hourly climate CSV"),
}

_FLAGS = {
    "common": [
        ("--config", dict(help="TOML scenario file (default: built-in defaults)")),
        ("--out", dict(help=f"output directory (default: {DEFAULTS['output']['dir']!r})")),
        ("-v", dict(dest="verbose", action="store_true", help="log progress to stderr")),
    ],
    "assembly": [
        ("--template", dict(choices=TEMPLATES, help="assembly preset (default: wall2)")),
        ("--insulation", dict(type=float, help="insulation thickness, m (default: 0.10)")),
        ("--orientation", dict(choices=("N", "S", "E", "W", "Roof"), help="facade (default: S)")),
    ],
    "climate": [
        ("--climate-source", dict(choices=("synthetic", "file", "constant"),
                                  help="climate origin (default: synthetic)")),
        ("--city", dict(choices=sorted(CITY_PROFILES), help="synthetic profile (default: curitiba)")),
        ("--climate-file", dict(help="hourly climate CSV when the source is 'file'")),
        ("--seed", dict(type=int, help="synthetic climate seed (default: 0)")),
        ("--hours", dict(type=int, help="hours of synthetic or constant climate (default: 8760)")),
        ("--t-out", dict(type=float, help="outdoor deg C for the constant climate (default: 20)")),
    ],
    "solver": [
        ("--scheme", dict(choices=("qunt", "imex", "cn"), help="time scheme (default: qunt)")),
        ("--solver-nx", dict(type=int, help="envelope node count (default: 41)")),
        ("--solver-dt", dict(type=float, help="dimensionless envelope step (default: 0.1)")),
    ],
    "sweep": [
        ("--start", dict(type=float, help="first thickness, m (default: 0.01)")),
        ("--stop", dict(type=float, help="last thickness, m (default: 0.30)")),
        ("--step", dict(type=float, help="thickness step, m (default: 0.01)")),
        ("--workers", dict(type=int, help="parallel sweep jobs (default: 1)")),
    ],
    "economics": [
        ("--sweep-input", dict(help="existing sweep.csv; skips the simulations")),
        ("--insulation-price", dict(type=float, help="$/m3 (default: 100)")),
        ("--energy-price", dict(type=float, help="$/kWh (default: 0.218)")),
        ("--efficiency", dict(type=float, help="system efficiency (default: 0.8)")),
    ],
    "benchmark": [
        ("--nx", dict(type=int, help="node count of the headline runs (default: 51)")),
        ("--dt", dict(type=float, help="step of the headline runs (default: 5e-3)")),
        ("--tau", dict(type=float, help="final dimensionless time (default: 48)")),
        ("--nx-ref", dict(type=int, help="reference node count (default: 3001)")),
        ("--dt-ref", dict(type=float, help="reference step (default: 1e-4)")),
        ("--cache-dir", dict(help="directory for cached reference solutions (default: none)")),
        ("--bench-workers", dict(type=int, help="parallel convergence cells (default: 1)")),
        ("--repeats", dict(type=int, help="timing repetitions, best kept (default: 3)")),
    ],
}

_GROUPS = {
    "benchmark": ("benchmark",),
    "simulate": ("assembly", "climate", "solver"),
    "sweep": ("assembly", "climate", "solver", "sweep"),
    "optimize": ("assembly", "climate", "solver", "sweep", "economics"),
    "synth-climate": ("climate",),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qunt", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_, description=help_)
        for group in ("common",) + _GROUPS[name]:
            g = p.add_argument_group(group)
            for flag, kw in _FLAGS[group]:
                g.add_argument(flag, **kw)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    func = COMMANDS[args.command][0]
    try:
        cfg = load_config(args.config, vars(args))
        return func(cfg)
    except NumericalError as exc:
        print(f"qunt {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, TypeError, KeyError, OSError) as exc:
        print(f"qunt {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
