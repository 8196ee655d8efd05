from __future__ import annotations

import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qunt.econ import (
    MJ_PER_KWH,
    EconomicParams,
    energy_cost,
    insulation_cost,
    optimum_thickness,
    write_costs_csv,
)

P = EconomicParams()
GRID = np.round(np.arange(1, 31) * 0.01, 2)


def test_table_prices_and_hand_values():
    assert (P.insulation_price, P.system_efficiency, P.energy_price) == (100.0, 0.8, 0.218)
    assert MJ_PER_KWH == 3.6
    assert energy_cost(0.0, P) == 0.0
    assert energy_cost(3.6, P) == pytest.approx(0.2725, rel=1e-12)
    assert energy_cost(7.2, P) == pytest.approx(2 * energy_cost(3.6, P))
    assert insulation_cost(0.0, P) == 0.0
    assert insulation_cost(0.05, P) == pytest.approx(5.0)
    assert EconomicParams(system_efficiency=3.0).system_efficiency == 3.0


def test_validation():
    with pytest.raises(ValueError):
        energy_cost(-1.0, P)
    with pytest.raises(ValueError):
        insulation_cost(-0.01, P)
    with pytest.raises(ValueError):
        EconomicParams(energy_price=0.0)
    with pytest.raises(ValueError):
        optimum_thickness([], P)
    with pytest.raises(ValueError):
        optimum_thickness([(0.01, 5.0), (0.01, 4.0)], P)


def test_constant_load_picks_thinnest():
    l_opt, table = optimum_thickness([(l, 50.0) for l in GRID[::-1]], P)
    assert l_opt == 0.01
    assert [r.thickness for r in table] == sorted(GRID)


def test_convex_synthetic_load_matches_brute_force():
    sweep = [(l, 10.0 / (l + 0.01)) for l in GRID]
    l_opt, table = optimum_thickness(sweep, P)
    totals = [(l, e / 3.6 * 0.218 / 0.8 + 100 * l) for l, e in sweep]
    assert l_opt == min(totals, key=lambda p: (p[1], p[0]))[0]
    for row in table:
        assert row.total == row.energy_cost + row.insulation_cost
        assert row.total >= next(r.total for r in table if r.thickness == l_opt)


def test_ties_go_to_thinner_layer():
    # totals: 1 + 100 l  and  E chosen so both points cost the same
    params = EconomicParams(insulation_price=100.0, system_efficiency=1.0, energy_price=3.6)
    l_opt, _ = optimum_thickness([(0.02, 3.0), (0.01, 4.0)], params)
    assert l_opt == 0.01


loads = st.lists(st.floats(0.0, 2000.0), min_size=30, max_size=30)
factor = st.floats(0.1, 10.0)


@given(e=loads, f=factor)
def test_argmin_is_exhaustive_and_scale_invariant(e, f):
    sweep = list(zip(GRID, e))
    l_opt, table = optimum_thickness(sweep, P)
    best = min(r.total for r in table)
    assert next(r.total for r in table if r.thickness == l_opt) == best
    scaled, _ = optimum_thickness(sweep, P.scaled(f))
    # uniform price scaling preserves the argmin up to rounding ties
    t = {r.thickness: r.total for r in table}
    assert abs(t[scaled] - t[l_opt]) <= 1e-9 * max(1.0, best)


@given(e=loads, f=st.floats(1.0, 10.0))
def test_monotone_comparative_statics(e, f):
    sweep = list(zip(GRID, sorted(e, reverse=True)))
    base, _ = optimum_thickness(sweep, P)
    dearer_insulation, _ = optimum_thickness(
        sweep, EconomicParams(P.insulation_price * f, P.system_efficiency, P.energy_price))
    dearer_energy, _ = optimum_thickness(
        sweep, EconomicParams(P.insulation_price, P.system_efficiency, P.energy_price * f))
    assert dearer_insulation <= base <= dearer_energy


def test_costs_csv(tmp_path):
    l_opt, table = optimum_thickness([(l, 10.0 / (l + 0.01)) for l in GRID], P)
    write_costs_csv(tmp_path / "costs.csv", table, l_opt)
    rows = list(csv.reader(open(tmp_path / "costs.csv")))
    assert rows[0] == ["l_i_m", "E_MJm2", "C_E", "C_I", "C_T", "is_optimum"]
    assert sum(int(r[5]) for r in rows[1:]) == 1
    assert float(rows[1][4]) == table[0].total
