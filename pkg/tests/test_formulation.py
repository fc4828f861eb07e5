import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from h2supply.formulation import (
    add_battery, add_bus_balances, add_electrolyzer, add_ngcc, add_piecewise_capex, add_reformer, add_tank,
    annual_charge, build, capacity_key, pv_output_coeff, set_objective, unique_restriction, unit_operating_costs,
)
from h2supply.model import FIRST_STAGE, ModelInstance, VarKey
from h2supply.scenario import ScenarioSet
from h2supply.solver import solve_lp, solve_mip
from oracles import NGCC_FUEL, SMR_NG, census, crf_oracle, pv_coeff_oracle


def k(fac, qty, s=0, t=0):
    return VarKey(fac, qty, s, t)


def activity(model, row, values):
    """Row activity minus rhs at a point given as {key: value} (others zero)."""
    r = model.rows[model.row_index[row]]
    x = np.zeros(model.n_vars)
    for key, v in values.items():
        x[model.var(key)] = v
    return sum(a * x[j] for j, a in r.coefs.items()) - r.rhs, r.sense


def holds(model, row, values, tol=1e-12):
    val, sense = activity(model, row, values)
    return {"<=": val <= tol, ">=": val >= -tol, "=": abs(val) <= tol}[sense]


def with_caps(*facilities):
    m = ModelInstance()
    for f in facilities:
        m.add_var(capacity_key(f))
    return m


# --- PV --------------------------------------------------------------------

def test_pv_coefficient_examples(catalog):
    assert pv_output_coeff(catalog.pv, 0.0, 30.0, 0.98) == 0.0
    assert pv_output_coeff(catalog.pv, 1000.0, 25.0, 0.98) == pytest.approx(0.86668, abs=1e-5)
    assert pv_output_coeff(catalog.pv, 800, 45, 0.98) < pv_output_coeff(catalog.pv, 800, 5, 0.98)
    with pytest.raises(ValueError):
        pv_output_coeff(catalog.pv, -1.0, 20.0, 0.98)


@given(st.floats(0, 1400), st.floats(-30, 50), st.floats(0.5, 1.0))
def test_pv_coefficient_matches_formula(ghi, temp, eta):
    from h2supply.domain import default_catalog
    pv = default_catalog().pv
    assert pv_output_coeff(pv, ghi, temp, eta) == pytest.approx(pv_coeff_oracle(ghi, temp, eta), abs=1e-12)


# --- blocks -------------------------------------------------------------------

def test_battery_rows_and_charge_step(catalog):
    params = dataclasses.replace(catalog.battery, self_discharge=0.0)
    m = with_caps("battery")
    add_battery(m, params, 0, 2, eta_dc=0.98)
    names = [r.name.split("[")[0] for r in m.rows]
    assert names.count("storage.battery") == 2
    assert names.count("ch_cap.battery") == 2 and names.count("dch_cap.battery") == 2
    assert names.count("soc_min.battery") + names.count("soc_max.battery") == 4
    xb = capacity_key("battery")
    # one hour charging at 1 MW from the 15% floor adds 0.98 * 0.95 MWh
    pt = {xb: 10.0, k("battery", "ESS", 0, 0): 1.5, k("battery", "ch", 0, 1): 1.0,
          k("battery", "ESS", 0, 1): 1.5 + 0.931}
    assert holds(m, "storage.battery[0,1]", pt, tol=1e-12)
    # idle battery keeps its level
    idle = {xb: 10.0, k("battery", "ESS", 0, 0): 4.0, k("battery", "ESS", 0, 1): 4.0}
    assert holds(m, "storage.battery[0,0]", idle) and holds(m, "storage.battery[0,1]", idle)
    with pytest.raises(ValueError):
        add_battery(m, params, 0, 2)


def test_ngcc_min_load(catalog):
    m = with_caps("NGCC")
    add_ngcc(m, catalog.ngcc, 0, 3)
    assert m.n_rows == 6
    xn = capacity_key("NGCC")
    assert holds(m, "min_load.NGCC[0,0]", {xn: 1.0, k("NGCC", "P"): 0.6})
    assert not holds(m, "min_load.NGCC[0,0]", {xn: 1.0, k("NGCC", "P"): 0.5})
    assert not holds(m, "max_load.NGCC[0,0]", {xn: 0.0, k("NGCC", "P"): 0.1})


def test_electrolyzer_min_loads(catalog):
    m = with_caps("PEM", "Alkaline")
    add_electrolyzer(m, catalog.electrolyzers["PEM"], 0, 1)
    add_electrolyzer(m, catalog.electrolyzers["Alkaline"], 0, 1)
    assert holds(m, "min_load.PEM[0,0]", {capacity_key("PEM"): 10, k("PEM", "p2h"): 0.5})
    assert not holds(m, "min_load.PEM[0,0]", {capacity_key("PEM"): 10, k("PEM", "p2h"): 0.4})
    assert not holds(m, "min_load.Alkaline[0,0]", {capacity_key("Alkaline"): 10, k("Alkaline", "p2h"): 1.9})


def test_reformer_load_and_ramp(catalog):
    smr = catalog.reformers["SMR"]
    m = with_caps("SMR")
    add_reformer(m, smr, 0, 2)
    x = capacity_key("SMR")
    assert holds(m, "min_load.SMR[0,0]", {x: 24, k("SMR", "h", 0, 0): 0.6})
    assert not holds(m, "min_load.SMR[0,0]", {x: 24, k("SMR", "h", 0, 0): 0.59})
    assert holds(m, "max_load.SMR[0,0]", {x: 24, k("SMR", "h", 0, 0): 1.0})
    assert not holds(m, "max_load.SMR[0,0]", {x: 24, k("SMR", "h", 0, 0): 1.01})
    step = {x: 24, k("SMR", "h", 0, 0): 1.0, k("SMR", "h", 0, 1): 0.7}
    assert not holds(m, "ramp_down.SMR[0,1]", step)
    step[k("SMR", "h", 0, 1)] = 0.8
    assert holds(m, "ramp_down.SMR[0,1]", step)
    # ramp wraps from the last hour to the first
    wrap = {x: 24, k("SMR", "h", 0, 0): 0.7, k("SMR", "h", 0, 1): 1.0}
    assert not holds(m, "ramp_down.SMR[0,0]", wrap)


def test_smr_unit_rates(catalog):
    book = catalog.cost_book(2030, ng_price=1.0, co2_tax=0.0)
    assert unit_operating_costs(catalog, book)["SMR"] == pytest.approx(123.0)
    book = catalog.cost_book(2030, ng_price=0.0, co2_tax=1.0)
    assert unit_operating_costs(catalog, book)["SMR"] == pytest.approx(9.17)
    assert catalog.reformers["SMR"].elec_rate == 0.96


def test_piecewise_capex_rows(catalog):
    smr = catalog.reformers["SMR"]
    K = len(smr.capacities)
    m = with_caps("SMR")
    add_piecewise_capex(m, smr)
    x = lambda i: VarKey("SMR", "x", index=i)   # noqa: E731
    y = lambda i: VarKey("SMR", "y", index=i)   # noqa: E731
    cap = capacity_key("SMR")
    # a single breakpoint
    pt = {x(2): 1.0, y(2): 1.0, cap: smr.capacities[1]}
    assert all(holds(m, r.name, pt) for r in m.rows)
    # chord midpoint of segment 1-2
    mid = {x(1): 0.5, x(2): 0.5, y(1): 1, y(2): 1, cap: smr.capacities[:2].mean()}
    assert all(holds(m, r.name, mid) for r in m.rows)
    # non-adjacent selectors
    assert not holds(m, "adjacency.SMR#1,3", {y(1): 1, y(3): 1})
    assert sum(v.is_binary for v in m.variables) == K + 1
    with pytest.raises(ValueError):
        add_piecewise_capex(m, smr)
    short = dataclasses.replace(smr, cost_curve=smr.cost_curve[:1])
    with pytest.raises(ValueError):
        add_piecewise_capex(with_caps("SMR"), short)


def test_tank_balance(catalog):
    pem = catalog.electrolyzers["PEM"]
    m = with_caps("PEM", "SMR", "tank")
    add_electrolyzer(m, pem, 0, 2)
    add_reformer(m, catalog.reformers["SMR"], 0, 2)
    add_tank(m, catalog.tank, 0, 2, [0.0, 1.0], electrolyzers={"PEM": pem}, reformers=["SMR"])
    ht = lambda t: k("tank", "HT", 0, t)   # noqa: E731
    # leak only
    assert holds(m, "balance.tank[0,0]", {ht(1): 100.0, ht(0): 99.9896}, tol=1e-9)
    # 48 MWh of electrolysis makes one tonne
    assert holds(m, "balance.tank[0,1]", {k("PEM", "p2h", 0, 1): 48.0})
    # flat level with production matching demand
    assert holds(m, "balance.tank[0,1]", {ht(0): 0.0, ht(1): 0.0, k("SMR", "h", 0, 1): 1.0})
    with pytest.raises(ValueError):
        add_tank(with_caps("tank"), catalog.tank, 0, 2, [1.0])


def test_bus_balances(catalog):
    book = catalog.cost_book(2030)
    pem = catalog.electrolyzers["PEM"]
    m = with_caps("PV", "PEM", "NGCC", "SMR")
    add_electrolyzer(m, pem, 0, 1)
    add_ngcc(m, catalog.ngcc, 0, 1)
    add_reformer(m, catalog.reformers["SMR"], 0, 1)
    add_bus_balances(m, book, 0, 1, [1.0], electrolyzers=["PEM"], reformers={"SMR": catalog.reformers["SMR"]})
    assert holds(m, "dc_bus[0,0]", {capacity_key("PV"): 1.0, k("PEM", "p2h"): 1.0})
    # 1 MW sent to the AC side delivers 0.95 MW there (here to the SMR)
    pt = {capacity_key("PV"): 1.0, k("converter", "D2A"): 1.0, k("SMR", "h"): 0.95 / 0.96}
    assert holds(m, "dc_bus[0,0]", pt) and holds(m, "ac_bus[0,0]", pt, tol=1e-12)
    # oversized PV is absorbed by curtailment
    assert holds(m, "dc_bus[0,0]", {capacity_key("PV"): 5.0, k("PEM", "p2h"): 1.0, k("PV", "out"): 4.0})


# --- objective and assembly ----------------------------------------------------------

def test_annual_charges(catalog):
    book = catalog.cost_book(2030)
    ch = annual_charge(catalog, book)
    assert ch["NGCC"] == pytest.approx((float(crf_oracle(0.07, 25)) + 0.03) * 3e6, rel=1e-12)
    assert ch["PV"] == pytest.approx((float(crf_oracle(0.07, 35)) + 0.02) * 751_000, rel=1e-12)


def test_zero_demand_optimum_is_zero(catalog, make_scenarios):
    sc = make_scenarios(hours=6).scaled(0.0)
    m = build(catalog, catalog.cost_book(2030), sc, linear_capex=True)
    res = solve_lp(m)
    assert res.status == "optimal" and abs(res.objective) < 1e-9
    assert np.allclose(res.x, 0.0, atol=1e-9)


def test_smr_ngcc_annual_gas_cost(catalog, make_scenarios):
    sc = make_scenarios(hours=24)
    book = catalog.cost_book(2030, co2_tax=0.0)
    m = build(catalog, book, sc, unique_restriction("SMR", "NGCC"))
    res = solve_mip(m)
    x = res.incumbent.x
    # fuel term alone: SMR gas plus NGCC gas for its electricity
    gas = 0.0
    for t in range(sc.T):
        h = x[m.var(k("SMR", "h", 0, t))]
        p = x[m.var(k("NGCC", "P", 0, t))]
        gas += (SMR_NG * h + NGCC_FUEL * p) * sc.annualization
    assert gas * 3.5 == pytest.approx(909_048.0, rel=1e-6)


def test_doubling_tax_doubles_emission_cost(catalog, make_scenarios):
    sc = make_scenarios(hours=4)
    rng = np.random.default_rng(0)
    m0 = build(catalog, catalog.cost_book(2030, ng_price=0.0, co2_tax=0.0), sc)
    m1 = build(catalog, catalog.cost_book(2030, ng_price=0.0, co2_tax=50.0), sc)
    m2 = build(catalog, catalog.cost_book(2030, ng_price=0.0, co2_tax=100.0), sc)
    x = rng.random(m0.n_vars)
    e1 = m1.objective_value(x) - m0.objective_value(x)
    e2 = m2.objective_value(x) - m0.objective_value(x)
    assert e2 == pytest.approx(2 * e1, rel=1e-12)


def test_set_objective_is_idempotent(catalog, make_scenarios):
    sc = make_scenarios(hours=3)
    book = catalog.cost_book(2040)
    m = build(catalog, book, sc)
    before = [v.cost for v in m.variables]
    set_objective(m, catalog, book, sc)
    assert [v.cost for v in m.variables] == before


@pytest.mark.parametrize("T,n_scen", [(72, 1), (5, 3)])
def test_census_matches_counting_oracle(catalog, weather, T, n_scen):
    from h2supply.scenario import demand_profiles, reduce_periods
    w = {y: weather[y] for y in sorted(weather)[:n_scen]}
    sc = reduce_periods(w, demand_profiles("constant", 2000.0, w), f"first_hours:{T}")
    m = build(catalog, catalog.cost_book(2030), sc)
    bps = [len(catalog.reformers[r].capacities) for r in ("ATR+CC", "SMR+CC", "SMR")]
    expected = census(T, n_scen, bps)
    stats = m.stats()
    assert {key: stats[key] for key in expected} == expected


def test_restriction_zeroes_capacities(catalog, make_scenarios):
    m = build(catalog, catalog.cost_book(2030), make_scenarios(hours=3), {"SMR", "NGCC"})
    for f in ("PV", "battery", "PEM", "Alkaline", "ATR+CC", "SMR+CC", "tank"):
        v = m.variables[m.var(capacity_key(f))]
        assert v.lower == v.upper == 0.0
    assert m.variables[m.var(capacity_key("SMR"))].upper == np.inf
    mg = m.variables[m.var(k("grid", "MG", 0, 1))]
    assert mg.upper == 0.0
    with pytest.raises(ValueError):
        build(catalog, catalog.cost_book(2030), make_scenarios(hours=3), {"fusion"})


def test_two_scenarios_share_first_stage(catalog, weather):
    from h2supply.scenario import demand_profiles, reduce_periods
    w = {y: weather[y] for y in (2019, 2020)}
    m = build(catalog, catalog.cost_book(2030), reduce_periods(w, demand_profiles("constant", 10.0, w),
                                                               "first_hours:4"))
    first = [v for v in m.variables if v.stage == FIRST_STAGE]
    assert all(VarKey.parse(v.name).scenario is None for v in first)
    # each scenario's rows reference the same capacity column
    xr = m.var(capacity_key("SMR"))
    for s in (0, 1):
        assert xr in m.rows[m.row_index[f"max_load.SMR[{s},0]"]].coefs


def test_build_errors(catalog, make_scenarios):
    with pytest.raises(ValueError):
        build(catalog, catalog.cost_book(2030), None)
    sc = make_scenarios(hours=2)
    one = ScenarioSet((dataclasses.replace(sc.scenarios[0], ghi=sc.scenarios[0].ghi[:1],
                                           temp=sc.scenarios[0].temp[:1], demand=sc.scenarios[0].demand[:1]),),
                      (1.0,), 8760.0, 1.0, "constant")
    with pytest.raises(ValueError, match="at least 2"):
        build(catalog, catalog.cost_book(2030), one)


def test_build_is_deterministic(catalog, make_scenarios):
    sc = make_scenarios(hours=5)
    a = build(catalog, catalog.cost_book(2030), sc)
    b = build(catalog, catalog.cost_book(2030), sc)
    assert [v.name for v in a.variables] == [v.name for v in b.variables]
    assert a.describe() == b.describe()


# --- solved properties ---------------------------------------------------------------

@pytest.fixture(scope="module")
def short_set(weather_2019):
    from h2supply.scenario import make_demand, reduce_periods
    return reduce_periods(weather_2019, make_demand("constant", 2000.0), "first_hours:24")


@pytest.mark.parametrize("factor", [2.0, 0.5])
def test_linear_relaxation_scales_with_demand(catalog, short_set, factor):
    book = catalog.cost_book(2030)
    base = solve_lp(build(catalog, book, short_set, linear_capex=True))
    big = solve_lp(build(catalog, book, short_set.scaled(factor), linear_capex=True))
    assert big.objective == pytest.approx(factor * base.objective, rel=1e-7)


@pytest.mark.parametrize("restriction", [unique_restriction("SMR", "NGCC"), unique_restriction("PEM", "grid"),
                                         {"SMR", "SMR+CC", "NGCC", "grid", "tank"}])
def test_restricting_never_lowers_cost(catalog, short_set, restriction):
    book = catalog.cost_book(2030)
    full = solve_mip(build(catalog, book, short_set))
    part = solve_mip(build(catalog, book, short_set, restriction))
    assert part.objective >= full.objective - 1e-6 * abs(full.objective)


def _emissions(model, x, catalog, book):
    total = 0.0
    rates = {kind: r.co2_rate for kind, r in catalog.reformers.items()}
    rates["NGCC"] = catalog.ngcc.co2_rate
    rates["grid"] = book.grid.co2_rate
    qty = {"NGCC": "P", "grid": "MG", **{kind: "h" for kind in catalog.reformers}}
    for v in model.variables:
        key = VarKey.parse(v.name)
        if key.scenario is not None and qty.get(key.facility) == key.quantity:
            total += rates[key.facility] * x[model.var(v.name)]
    return total


def test_higher_tax_never_raises_emissions(catalog, short_set):
    out = []
    for tax in (0.0, 100.0, 400.0):
        book = catalog.cost_book(2050, co2_tax=tax)
        model = build(catalog, book, short_set, {"SMR", "SMR+CC", "ATR+CC", "NGCC", "grid", "tank"})
        res = solve_mip(model)
        out.append(_emissions(model, res.incumbent.x, catalog, book))
    assert all(b <= a + 1e-6 * max(1.0, a) for a, b in zip(out, out[1:]))


def test_storage_levels_close_the_cycle(catalog, short_set):
    book = catalog.cost_book(2030)
    model = build(catalog, book, short_set, unique_restriction("PEM", "PV"), linear_capex=True)
    res = solve_lp(model)
    assert res.status == "optimal"
    assert model.residuals(res.x).max() <= 1e-6
    # the wrap-around row ties hour 0 to the last hour of the horizon
    row = model.rows[model.row_index["balance.tank[0,0]"]]
    assert model.var(k("tank", "HT", 0, short_set.T - 1)) in row.coefs
    row = model.rows[model.row_index["storage.battery[0,0]"]]
    assert model.var(k("battery", "ESS", 0, short_set.T - 1)) in row.coefs
