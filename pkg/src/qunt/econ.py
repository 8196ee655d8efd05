"""Energy cost, insulation cost and the optimum insulation thickness.

Costs are per square metre of envelope for a single year, without discounting.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "MJ_PER_KWH",
    "CostBreakdown",
    "EconomicParams",
    "energy_cost",
    "insulation_cost",
    "optimum_thickness",
    "write_costs_csv",
]

MJ_PER_KWH = 3.6


@dataclass(frozen=True)
class EconomicParams:
    """Prices and system efficiency.

    Parameters
    ----------
    insulation_price : float
        Material plus installation, $/m^3.
    system_efficiency : float
        Heating/cooling system efficiency; values above 1 are allowed (heat pumps).
    energy_price : float
        $/kWh.
    """

    insulation_price: float = 100.0
    system_efficiency: float = 0.8
    energy_price: float = 0.218

    def __post_init__(self):
        for name in ("insulation_price", "system_efficiency", "energy_price"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be positive, got {v}")

    def scaled(self, factor: float) -> "EconomicParams":
        """Both prices multiplied by ``factor``."""
        return EconomicParams(self.insulation_price * factor, self.system_efficiency,
                              self.energy_price * factor)


@dataclass(frozen=True)
class CostBreakdown:
    thickness: float
    energy: float
    energy_cost: float
    insulation_cost: float

    @property
    def total(self) -> float:
        return self.energy_cost + self.insulation_cost


def energy_cost(E_annual: float, params: EconomicParams) -> float:
    """Yearly energy cost in $/m^2 for an annual load ``E_annual`` in MJ/m^2."""
    if not np.isfinite(E_annual) or E_annual < 0:
        raise ValueError(f"annual load must be nonnegative, got {E_annual}")
    return E_annual / MJ_PER_KWH * params.energy_price / params.system_efficiency


def insulation_cost(thickness: float, params: EconomicParams) -> float:
    """Insulation cost in $/m^2 for a layer ``thickness`` metres thick."""
    if not np.isfinite(thickness) or thickness < 0:
        raise ValueError(f"thickness must be nonnegative, got {thickness}")
    return params.insulation_price * thickness


def optimum_thickness(
    sweep: Iterable[tuple[float, float]], params: EconomicParams
) -> tuple[float, list[CostBreakdown]]:
    """Discrete minimiser of the total cost over a thickness sweep.

    Parameters
    ----------
    sweep : iterable of (thickness m, annual load MJ/m^2)

    Returns
    -------
    l_opt : float
        Thickness with the smallest total cost; ties go to the thinner layer.
    table : list of CostBreakdown
        One entry per sweep point, sorted by thickness.
    """
    rows = sorted((float(l), float(e)) for l, e in sweep)
    if not rows:
        raise ValueError("sweep is empty")
    ls = [l for l, _ in rows]
    if len(set(ls)) != len(ls):
        raise ValueError("sweep thicknesses must be distinct")
    table = [CostBreakdown(l, e, energy_cost(e, params), insulation_cost(l, params))
             for l, e in rows]
    best = table[0]
    for row in table[1:]:
        if row.total < best.total:
            best = row
    return best.thickness, table


def write_costs_csv(path: str | Path, table: Sequence[CostBreakdown], l_opt: float) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["l_i_m", "E_MJm2", "C_E", "C_I", "C_T", "is_optimum"])
        for row in table:
            out.writerow([repr(row.thickness), repr(row.energy), repr(row.energy_cost),
                          repr(row.insulation_cost), repr(row.total),
                          int(row.thickness == l_opt)])
    return path
