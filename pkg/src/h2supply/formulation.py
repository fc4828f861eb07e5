"""Compile a technology catalog and scenario set into a two-stage stochastic MILP.

First-stage columns are capacities plus the piecewise reformer-capex segment
weights and selectors.  Second-stage columns are hourly dispatch, one block
per scenario.  Storage levels and reformer ramps wrap cyclically so a horizon
cannot start with free inventory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .domain import (ELECTROLYZER_KINDS, PRODUCTION_TECHS, REFORMER_KINDS, BatteryParams, CostBook,
                     Design, Dispatch, ElectrolyzerParams, NgccParams, PvParams, ReformerParams, Solution,
                     TankParams, TechnologyCatalog, crf)
from .model import FIRST_STAGE, SECOND_STAGE, ModelInstance, Row, Variable, VarKey
from .scenario import ScenarioSet

__all__ = [
    "ModelInstance", "VarKey", "Variable", "Row", "pv_output_coeff", "add_battery", "add_ngcc",
    "add_electrolyzer", "add_reformer", "add_piecewise_capex", "add_tank", "add_bus_balances",
    "set_objective", "build", "extract_solution", "Restriction", "unique_restriction", "capacity_key",
    "FIRST_STAGE", "SECOND_STAGE",
]

HOURS_PER_DAY = 24.0


def capacity_key(facility: str) -> VarKey:
    return VarKey(facility, "cap")


def _k(facility: str, quantity: str, s: int, t: int) -> VarKey:
    return VarKey(facility, quantity, s, t)


def _require(model: ModelInstance, facility: str) -> int:
    key = capacity_key(facility)
    if not model.has_var(key):
        raise KeyError(f"capacity variable {key} must exist before adding {facility} dispatch")
    return model.var(key)


def _guard(model: ModelInstance, facility: str, s: int) -> None:
    tag = (facility, s)
    added = model.meta.setdefault("_blocks", set())
    if tag in added:
        raise ValueError(f"{facility} block for scenario {s} already added")
    added.add(tag)


def pv_output_coeff(pv: PvParams, ghi, temp, eta_dc: float):
    """PV output per MW installed: temperature-derated irradiance after the DC/DC converter."""
    ghi = np.asarray(ghi, dtype=float)
    temp = np.asarray(temp, dtype=float)
    if np.any(ghi < 0):
        raise ValueError("GHI must be non-negative")
    cell = temp + ghi * (pv.noct - 20.0) / 800.0
    out = eta_dc * (1.0 + pv.gamma * (cell - pv.t_ref)) * ghi / 1000.0
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


def add_battery(model: ModelInstance, params: BatteryParams, s: int, T: int, *,
                eta_dc: float = 0.98, dt: float = 1.0) -> None:
    xb = _require(model, "battery")
    _guard(model, "battery", s)
    eff = eta_dc * params.efficiency
    keep = 1.0 - params.self_discharge
    ch = [model.add_var(_k("battery", "ch", s, t)) for t in range(T)]
    dch = [model.add_var(_k("battery", "dch", s, t)) for t in range(T)]
    ess = [model.add_var(_k("battery", "ESS", s, t)) for t in range(T)]
    for t in range(T):
        model.add_row(f"ch_cap.battery[{s},{t}]", {ch[t]: 1.0, xb: -params.power_ratio}, "<=")
        model.add_row(f"dch_cap.battery[{s},{t}]", {dch[t]: 1.0, xb: -params.power_ratio}, "<=")
    for t in range(T):
        model.add_row(f"storage.battery[{s},{t}]",
                      {ess[t]: 1.0, ess[t - 1]: -keep, ch[t]: -eff * dt, dch[t]: dt / eff}, "=")
    for t in range(T):
        model.add_row(f"soc_min.battery[{s},{t}]", {ess[t]: 1.0, xb: -params.soc_min}, ">=")
        model.add_row(f"soc_max.battery[{s},{t}]", {ess[t]: 1.0, xb: -params.soc_max}, "<=")


def add_ngcc(model: ModelInstance, params: NgccParams, s: int, T: int) -> None:
    xn = _require(model, "NGCC")
    _guard(model, "NGCC", s)
    for t in range(T):
        g = model.add_var(_k("NGCC", "P", s, t))
        model.add_row(f"min_load.NGCC[{s},{t}]", {g: 1.0, xn: -params.min_load}, ">=")
        model.add_row(f"max_load.NGCC[{s},{t}]", {g: 1.0, xn: -1.0}, "<=")


def add_electrolyzer(model: ModelInstance, params: ElectrolyzerParams, s: int, T: int) -> None:
    xw = _require(model, params.kind)
    _guard(model, params.kind, s)
    for t in range(T):
        p = model.add_var(_k(params.kind, "p2h", s, t))
        model.add_row(f"min_load.{params.kind}[{s},{t}]", {p: 1.0, xw: -params.min_load}, ">=")
        model.add_row(f"max_load.{params.kind}[{s},{t}]", {p: 1.0, xw: -1.0}, "<=")


def add_reformer(model: ModelInstance, params: ReformerParams, s: int, T: int, *, dt: float = 1.0) -> None:
    """Hourly output ``h`` (t/h) against a capacity in t/day, with a cyclic ramp limit."""
    xr = _require(model, params.kind)
    _guard(model, params.kind, s)
    kind = params.kind
    per_hour = 1.0 / HOURS_PER_DAY
    h = [model.add_var(_k(kind, "h", s, t)) for t in range(T)]
    for t in range(T):
        model.add_row(f"min_load.{kind}[{s},{t}]", {h[t]: 1.0, xr: -params.min_load * per_hour}, ">=")
        model.add_row(f"max_load.{kind}[{s},{t}]", {h[t]: 1.0, xr: -per_hour}, "<=")
    ramp = params.ramp_fraction * per_hour * dt
    for t in range(T):
        model.add_row(f"ramp_up.{kind}[{s},{t}]", {h[t]: 1.0, h[t - 1]: -1.0, xr: -ramp}, "<=")
        model.add_row(f"ramp_down.{kind}[{s},{t}]", {h[t]: 1.0, h[t - 1]: -1.0, xr: ramp}, ">=")


def add_piecewise_capex(model: ModelInstance, params: ReformerParams) -> None:
    """Segment weights x_k and selectors y_k for the reformer cost curve.

    Selector 0 stands for the origin so capacities below the first breakpoint
    interpolate from zero.  At most two selectors are on and they must be
    neighbours in the sequence (origin, bp_1, ..., bp_K).
    """
    caps = params.capacities
    K = len(caps)
    if K < 2:
        raise ValueError(f"{params.kind}: piecewise capex needs at least 2 breakpoints, got {K}")
    kind = params.kind
    xr = _require(model, kind)
    if model.has_var(VarKey(kind, "x", index=1)):
        raise ValueError(f"{kind} piecewise capex already added")
    x = [model.add_var(VarKey(kind, "x", index=k), 0.0, 1.0) for k in range(1, K + 1)]
    y = [model.add_var(VarKey(kind, "y", index=k), 0.0, 1.0, binary=True) for k in range(0, K + 1)]
    model.add_row(f"segment_sum.{kind}", {j: 1.0 for j in x}, "<=", 1.0)
    link = {j: float(c) for j, c in zip(x, caps)}
    link[xr] = -1.0
    model.add_row(f"capacity_link.{kind}", link, "=")
    for k in range(K):
        model.add_row(f"segment_select.{kind}#{k + 1}", {x[k]: 1.0, y[k + 1]: -1.0}, "<=")
    model.add_row(f"selector_count.{kind}", {j: 1.0 for j in y}, "<=", 2.0)
    origin = {j: 1.0 for j in x}
    origin[y[0]] = 1.0
    model.add_row(f"origin_select.{kind}", origin, ">=", 1.0)
    for a in range(K + 1):
        for b in range(a + 2, K + 1):
            model.add_row(f"adjacency.{kind}#{a},{b}", {y[a]: 1.0, y[b]: 1.0}, "<=", 1.0)


def add_tank(model: ModelInstance, params: TankParams, s: int, T: int, demand, *,
             electrolyzers: Mapping[str, ElectrolyzerParams] = None,
             reformers: Iterable[str] = (), dt: float = 1.0) -> None:
    """Hydrogen inventory balance fed by every production unit present in the model."""
    xt = _require(model, "tank")
    _guard(model, "tank", s)
    demand = np.asarray(demand, dtype=float)
    if len(demand) != T:
        raise ValueError(f"demand has {len(demand)} steps, expected {T}")
    electrolyzers = electrolyzers or {}
    keep = 1.0 - params.leak
    ht = [model.add_var(_k("tank", "HT", s, t)) for t in range(T)]
    for t in range(T):
        coefs = {ht[t]: 1.0, ht[t - 1]: -keep}
        for kind, e in electrolyzers.items():
            coefs[model.var(_k(kind, "p2h", s, t))] = -dt / e.specific_energy
        for kind in reformers:
            coefs[model.var(_k(kind, "h", s, t))] = -dt
        model.add_row(f"balance.tank[{s},{t}]", coefs, "=", -float(demand[t]) * dt)
        model.add_row(f"level.tank[{s},{t}]", {ht[t]: 1.0, xt: -1.0}, "<=")


def add_bus_balances(model: ModelInstance, cost_book: CostBook, s: int, T: int, pv_coeff, *,
                     electrolyzers: Iterable[str] = (), reformers: Mapping[str, ReformerParams] = None) -> None:
    """DC and AC bus balances; adds the grid, converter and curtailment flows."""
    _guard(model, "bus", s)
    xp = _require(model, "PV")
    pv_coeff = np.asarray(pv_coeff, dtype=float)
    reformers = reformers or {}
    eta = cost_book.converter_ac
    for t in range(T):
        mg = model.add_var(_k("grid", "MG", s, t))
        d2a = model.add_var(_k("converter", "D2A", s, t))
        a2d = model.add_var(_k("converter", "A2D", s, t))
        out = model.add_var(_k("PV", "out", s, t))
        dc = {xp: float(pv_coeff[t]), d2a: -1.0, a2d: eta, out: -1.0}
        if model.has_var(_k("battery", "ch", s, t)):
            dc[model.var(_k("battery", "ch", s, t))] = -1.0
            dc[model.var(_k("battery", "dch", s, t))] = 1.0
        for kind in electrolyzers:
            dc[model.var(_k(kind, "p2h", s, t))] = -1.0
        model.add_row(f"dc_bus[{s},{t}]", dc, "=")
        ac = {mg: 1.0, d2a: eta, a2d: -1.0}
        if model.has_var(_k("NGCC", "P", s, t)):
            ac[model.var(_k("NGCC", "P", s, t))] = 1.0
        for kind, r in reformers.items():
            ac[model.var(_k(kind, "h", s, t))] = -r.elec_rate
        model.add_row(f"ac_bus[{s},{t}]", ac, "=")


# ---------------------------------------------------------------------------
# objective

def annual_charge(catalog: TechnologyCatalog, cost_book: CostBook) -> dict[str, float]:
    """Annualized capex + fixed O&M per unit of each capacity variable."""
    r = cost_book.interest
    y = cost_book.year
    out = {
        "PV": (crf(r, catalog.pv.lifespan_yr) + catalog.pv.omf) * catalog.pv.capex_at(y) * 1000.0,
        "battery": (crf(r, catalog.battery.lifespan_yr) + catalog.battery.omf) * catalog.battery.capex_at(y),
        "NGCC": (crf(r, catalog.ngcc.lifespan_yr) + catalog.ngcc.omf) * catalog.ngcc.capex_per_mw,
        "tank": (crf(r, catalog.tank.lifespan_yr) + catalog.tank.omf) * catalog.tank.capex_per_t,
    }
    for kind, e in catalog.electrolyzers.items():
        out[kind] = (crf(r, e.lifespan_yr) + e.omf) * e.capex_at(y) * 1000.0
    return out


def reformer_charge(params: ReformerParams, cost_book: CostBook) -> float:
    return crf(cost_book.interest, params.lifespan_yr) + params.omf


def unit_operating_costs(catalog: TechnologyCatalog, cost_book: CostBook) -> dict[str, float]:
    """$ per unit of each fuel-burning or emitting dispatch quantity."""
    ng, tax = cost_book.ng_price, cost_book.co2_tax
    n = catalog.ngcc
    out = {
        "NGCC": n.fuel_rate * ng + n.co2_rate * tax + n.variable_cost,
        "grid": cost_book.grid.price + cost_book.grid.co2_rate * tax,
    }
    for kind, r in catalog.reformers.items():
        out[kind] = r.ng_rate * ng + r.co2_rate * tax
    return out


def set_objective(model: ModelInstance, catalog: TechnologyCatalog, cost_book: CostBook,
                  scenarios: ScenarioSet, *, linear_capex: bool = False) -> None:
    """Annualized capital charge plus expected, annualized operating cost ($/yr).

    Costs are assigned, not accumulated, so calling this twice is harmless.
    ``linear_capex`` prices reformer capacity at the last breakpoint's unit
    cost instead of the piecewise curve.
    """
    for v in model.variables:
        v.cost = 0.0
    for facility, charge in annual_charge(catalog, cost_book).items():
        if model.has_var(capacity_key(facility)):
            model.set_cost(capacity_key(facility), charge)
    for kind, r in catalog.reformers.items():
        if not model.has_var(capacity_key(kind)):
            continue
        f = reformer_charge(r, cost_book)
        if linear_capex or not model.has_var(VarKey(kind, "x", index=1)):
            model.set_cost(capacity_key(kind), f * r.costs[-1] / r.capacities[-1])
        else:
            for k, ic in enumerate(r.costs, start=1):
                model.set_cost(VarKey(kind, "x", index=k), f * ic)
    unit = unit_operating_costs(catalog, cost_book)
    quantity = {"NGCC": "P", "grid": "MG", **{k: "h" for k in catalog.reformers}}
    dt = scenarios.dt
    for s, w in enumerate(scenarios.weights):
        scale = w * scenarios.annualization * dt
        for facility, q in quantity.items():
            for t in range(scenarios.T):
                key = _k(facility, q, s, t)
                if model.has_var(key):
                    model.set_cost(key, unit[facility] * scale)


# ---------------------------------------------------------------------------
# assembly

Restriction = frozenset


def unique_restriction(tech: str, source: str) -> frozenset[str]:
    """Facilities allowed when one production tech is paired with one power source.

    The tank is always allowed.  PV comes with the battery, since a PV-only
    system has no night supply for min-load operation.
    """
    if tech not in PRODUCTION_TECHS:
        raise ValueError(f"unknown production technology {tech!r}")
    extra = {"PV": ("PV", "battery"), "NGCC": ("NGCC",), "grid": ("grid",)}
    if source not in extra:
        raise ValueError(f"unknown power source {source!r}")
    return frozenset((tech, "tank") + extra[source])


def build(catalog: TechnologyCatalog, cost_book: CostBook, scenarios: ScenarioSet,
          restriction: Iterable[str] | None = None, *, linear_capex: bool = False,
          fixed_design: Design | None = None, name: str = "h2supply") -> ModelInstance:
    """Assemble the full superstructure; excluded facilities get zero capacity.

    Variable and row order is a pure function of the inputs.  Binaries come
    only from the reformer cost curves (none when ``linear_capex``).
    """
    if scenarios is None or len(scenarios) == 0:
        raise ValueError("scenario set is empty")
    T = scenarios.T
    if T < 2:
        raise ValueError(f"horizon must have at least 2 steps, got {T}")
    allowed = None if restriction is None else frozenset(restriction)
    if allowed is not None:
        unknown = allowed - set(catalog.electrolyzers) - set(catalog.reformers) - {
            "PV", "battery", "NGCC", "grid", "tank"}
        if unknown:
            raise ValueError(f"restriction names unknown facilities {sorted(unknown)}")

    electrolyzers = {k: catalog.electrolyzers[k] for k in ELECTROLYZER_KINDS if k in catalog.electrolyzers}
    electrolyzers.update({k: e for k, e in catalog.electrolyzers.items() if k not in electrolyzers})
    reformers = {k: catalog.reformers[k] for k in REFORMER_KINDS if k in catalog.reformers}
    reformers.update({k: r for k, r in catalog.reformers.items() if k not in reformers})

    model = ModelInstance(name)
    for facility in ("PV", "battery", "NGCC", *electrolyzers, *reformers, "tank"):
        model.add_var(capacity_key(facility))
    if not linear_capex:
        for r in reformers.values():
            add_piecewise_capex(model, r)

    for s, scen in enumerate(scenarios.scenarios):
        add_battery(model, catalog.battery, s, T, eta_dc=cost_book.converter_dc, dt=scenarios.dt)
        add_ngcc(model, catalog.ngcc, s, T)
        for e in electrolyzers.values():
            add_electrolyzer(model, e, s, T)
        for r in reformers.values():
            add_reformer(model, r, s, T, dt=scenarios.dt)
        add_bus_balances(model, cost_book, s, T,
                         pv_output_coeff(catalog.pv, scen.ghi, scen.temp, cost_book.converter_dc),
                         electrolyzers=electrolyzers, reformers=reformers)
        add_tank(model, catalog.tank, s, T, scen.demand, electrolyzers=electrolyzers,
                 reformers=reformers, dt=scenarios.dt)

    set_objective(model, catalog, cost_book, scenarios, linear_capex=linear_capex)

    if allowed is not None:
        for facility in ("PV", "battery", "NGCC", *electrolyzers, *reformers, "tank"):
            if facility not in allowed:
                model.set_bounds(capacity_key(facility), 0.0, 0.0)
                if facility in reformers and not linear_capex:
                    _fix_segments_off(model, reformers[facility])
        if "grid" not in allowed:
            for s in range(len(scenarios)):
                for t in range(T):
                    model.set_bounds(_k("grid", "MG", s, t), 0.0, 0.0)

    if fixed_design is not None:
        _fix_design(model, fixed_design, reformers, linear_capex)

    model.meta.pop("_blocks", None)
    model.meta.update({
        "T": T,
        "scenarios": len(scenarios),
        "weights": list(scenarios.weights),
        "annualization": scenarios.annualization,
        "dt": scenarios.dt,
        "year": cost_book.year,
        "electrolyzers": list(electrolyzers),
        "reformers": list(reformers),
        "linear_capex": linear_capex,
        "restriction": None if allowed is None else sorted(allowed),
    })
    return model


def _fix_segments_off(model: ModelInstance, r: ReformerParams) -> None:
    for k in range(1, len(r.capacities) + 1):
        model.set_bounds(VarKey(r.kind, "x", index=k), 0.0, 0.0)
        model.set_bounds(VarKey(r.kind, "y", index=k), 0.0, 0.0)
    model.set_bounds(VarKey(r.kind, "y", index=0), 1.0, 1.0)


def _fix_design(model: ModelInstance, design: Design, reformers: Mapping[str, ReformerParams],
                linear_capex: bool) -> None:
    caps = {"PV": design.pv_mw, "battery": design.battery_mwh, "NGCC": design.ngcc_mw, "tank": design.tank_t}
    caps.update(design.electrolyzer_mw)
    caps.update(design.reformer_tpd)
    for facility, value in caps.items():
        if model.has_var(capacity_key(facility)):
            model.set_bounds(capacity_key(facility), value, value)
    if linear_capex:
        return
    for kind, r in reformers.items():
        xs = design.segment_weights.get(kind)
        ys = design.segment_selectors.get(kind)
        if xs is not None:
            for k, v in enumerate(xs, start=1):
                model.set_bounds(VarKey(kind, "x", index=k), v, v)
        if ys is not None:
            for k, v in enumerate(ys):
                model.set_bounds(VarKey(kind, "y", index=k), round(v), round(v))


# ---------------------------------------------------------------------------
# solution extraction

def extract_solution(model: ModelInstance, x, status: str, objective: float,
                     catalog: TechnologyCatalog, cost_book: CostBook, scenarios: ScenarioSet) -> Solution:
    x = np.asarray(x, dtype=float)
    val = lambda key: float(x[model.var(key)]) if model.has_var(key) else 0.0  # noqa: E731
    electrolyzers = model.meta.get("electrolyzers", list(catalog.electrolyzers))
    reformers = model.meta.get("reformers", list(catalog.reformers))
    seg_w, seg_y = {}, {}
    for kind in reformers:
        K = len(catalog.reformers[kind].capacities)
        if model.has_var(VarKey(kind, "x", index=1)):
            seg_w[kind] = tuple(val(VarKey(kind, "x", index=k)) for k in range(1, K + 1))
            # selectors are binary; drop branch-and-bound round-off
            seg_y[kind] = tuple(float(round(val(VarKey(kind, "y", index=k)))) + 0.0 for k in range(0, K + 1))
    design = Design(
        pv_mw=val(capacity_key("PV")),
        battery_mwh=val(capacity_key("battery")),
        ngcc_mw=val(capacity_key("NGCC")),
        tank_t=val(capacity_key("tank")),
        electrolyzer_mw={k: val(capacity_key(k)) for k in electrolyzers},
        reformer_tpd={k: val(capacity_key(k)) for k in reformers},
        segment_weights=seg_w,
        segment_selectors=seg_y,
    )
    T = model.meta.get("T", scenarios.T)
    dispatch = []
    for s, scen in enumerate(scenarios.scenarios):
        def series(facility: str, quantity: str) -> np.ndarray:
            return np.array([val(_k(facility, quantity, s, t)) for t in range(T)])

        coeff = pv_output_coeff(catalog.pv, scen.ghi, scen.temp, cost_book.converter_dc)
        dispatch.append(Dispatch(
            ch=series("battery", "ch"), dch=series("battery", "dch"), ess=series("battery", "ESS"),
            ngcc=series("NGCC", "P"), grid=series("grid", "MG"),
            d2a=series("converter", "D2A"), a2d=series("converter", "A2D"), curtail=series("PV", "out"),
            p2h={k: series(k, "p2h") for k in electrolyzers},
            h_nr={k: series(k, "h") for k in reformers},
            ht=series("tank", "HT"), pv=np.asarray(coeff) * design.pv_mw,
        ))
    return Solution(status, float(objective), design, tuple(dispatch))
