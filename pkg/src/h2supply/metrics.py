"""Levelized costs, carbon intensity and design summaries from a solved model."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from .domain import ELECTROLYZER_KINDS, REFORMER_KINDS, CostBook, Solution, TechnologyCatalog
from .formulation import annual_charge, reformer_charge
from .scenario import ScenarioSet

LCOH_COMPONENTS = ("co2_tax", "electricity", "natural_gas", "facility")
SOURCE_KINDS = ("PV", "NGCC", "grid")

# design-summary column order and rounding (capacities 2 dp, CO2 1 dp, NG 3 dp)
TABLE_E_COLUMNS = (
    ("pv_mw", "PV (MW)", 2),
    ("battery_mwh", "B (MWh)", 2),
    ("pem_mw", "PEM (MW)", 2),
    ("alkaline_mw", "Alkaline (MW)", 2),
    ("tank_t", "H tank (t H2)", 2),
    ("ngcc_mw", "NGCC (MW)", 2),
    ("atr_cc_tpd", "ATR (t H2/day)", 2),
    ("smr_cc_tpd", "SMRCC (t H2/day)", 2),
    ("smr_tpd", "SMR (t H2/day)", 2),
    ("co2_kt", "CO2 (kt/year)", 1),
    ("ng_tbtu", "NG (TBtu/year)", 3),
)
_REFORMER_COLUMN = {"ATR+CC": "atr_cc_tpd", "SMR+CC": "smr_cc_tpd", "SMR": "smr_tpd"}
_ELECTROLYZER_COLUMN = {"PEM": "pem_mw", "Alkaline": "alkaline_mw"}


@dataclass(frozen=True)
class AnnualFlows:
    """Expected yearly totals over the scenario set."""

    hydrogen_t: float
    ng_mmbtu: float
    co2_t: float
    grid_mwh: float
    ngcc_mwh: float
    electricity_to_h2_mwh: float
    ngcc_ng_mmbtu: float
    ngcc_co2_t: float
    grid_co2_t: float


def annual_flows(solution: Solution, catalog: TechnologyCatalog, scenarios: ScenarioSet) -> AnnualFlows:
    acc = dict.fromkeys(AnnualFlows.__dataclass_fields__, 0.0)
    scale = scenarios.annualization * scenarios.dt
    n = catalog.ngcc
    for w, disp in zip(scenarios.weights, solution.dispatch):
        f = w * scale
        ngcc = disp.ngcc.sum()
        grid = disp.grid.sum()
        acc["ngcc_mwh"] += f * ngcc
        acc["grid_mwh"] += f * grid
        acc["ngcc_ng_mmbtu"] += f * n.fuel_rate * ngcc
        acc["ngcc_co2_t"] += f * n.co2_rate * ngcc
        acc["grid_co2_t"] += f * catalog.grid.co2_rate * grid
        for kind, h in disp.h_nr.items():
            r = catalog.reformers[kind]
            total = h.sum()
            acc["hydrogen_t"] += f * total
            acc["ng_mmbtu"] += f * r.ng_rate * total
            acc["co2_t"] += f * r.co2_rate * total
            acc["electricity_to_h2_mwh"] += f * r.elec_rate * total
        for kind, p in disp.p2h.items():
            total = p.sum()
            acc["hydrogen_t"] += f * total / catalog.electrolyzers[kind].specific_energy
            acc["electricity_to_h2_mwh"] += f * total
    acc["ng_mmbtu"] += acc["ngcc_ng_mmbtu"]
    acc["co2_t"] += acc["ngcc_co2_t"] + acc["grid_co2_t"]
    return AnnualFlows(**acc)


def facility_cost(solution: Solution, catalog: TechnologyCatalog, cost_book: CostBook) -> float:
    """Annualized capex plus fixed O&M of every built facility ($/yr)."""
    d = solution.design
    charge = annual_charge(catalog, cost_book)
    total = (charge["PV"] * d.pv_mw + charge["battery"] * d.battery_mwh + charge["NGCC"] * d.ngcc_mw
             + charge["tank"] * d.tank_t)
    total += sum(charge[k] * v for k, v in d.electrolyzer_mw.items())
    for kind, cap in d.reformer_tpd.items():
        r = catalog.reformers[kind]
        f = reformer_charge(r, cost_book)
        weights = d.segment_weights.get(kind)
        if weights is not None:
            total += f * float(np.dot(r.costs, weights))
        else:
            total += f * cap * r.costs[-1] / r.capacities[-1]
    return float(total)


@dataclass
class CostReport:
    status: str
    year: int
    demand_t: float
    lcoh_total: float
    components: dict[str, float]
    lcoe: float | None
    carbon_intensity: float
    annual_co2_kt: float
    annual_ng_tbtu: float
    objective: float
    design: dict[str, float]
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping) -> "CostReport":
        return cls(**dict(data))

    def table_e_csv(self, label: str = "") -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["label"] + [title for _, title, _ in TABLE_E_COLUMNS])
        writer.writerow([label] + [self.design[key] for key, _, _ in TABLE_E_COLUMNS])
        return buf.getvalue()


def lcoh_breakdown(solution: Solution, catalog: TechnologyCatalog, cost_book: CostBook,
                   scenarios: ScenarioSet) -> CostReport:
    """LCOH split into CO2 tax, grid electricity, natural gas and facility buckets ($/kg).

    The buckets partition the model objective: facility holds capex, fixed
    O&M and the NGCC variable O&M; natural gas holds every MMBtu burned;
    CO2 tax every taxed tonne; electricity only grid purchases.
    """
    demand_t = scenarios.annualized_demand()
    if not demand_t > 0:
        raise ValueError("LCOH is undefined for zero hydrogen demand")
    flows = annual_flows(solution, catalog, scenarios)
    kg = demand_t * 1000.0
    variable_om = catalog.ngcc.variable_cost * flows.ngcc_mwh
    comps = {
        "co2_tax": flows.co2_t * cost_book.co2_tax / kg,
        "electricity": flows.grid_mwh * cost_book.grid.price / kg,
        "natural_gas": flows.ng_mmbtu * cost_book.ng_price / kg,
        "facility": (facility_cost(solution, catalog, cost_book) + variable_om) / kg,
    }
    total = math.fsum(comps[k] for k in LCOH_COMPONENTS)
    try:
        le = lcoe(solution, catalog, cost_book, scenarios)
    except ValueError:
        le = None
    ci = flows.co2_t / flows.hydrogen_t if flows.hydrogen_t > 0 else 0.0
    return CostReport(
        status=solution.status,
        year=cost_book.year,
        demand_t=demand_t,
        lcoh_total=total,
        components=comps,
        lcoe=le,
        carbon_intensity=ci,
        annual_co2_kt=flows.co2_t / 1000.0,
        annual_ng_tbtu=flows.ng_mmbtu / 1e6,
        objective=solution.objective,
        design=table_e_row(solution, catalog, scenarios),
    )


def lcoe(solution: Solution, catalog: TechnologyCatalog, cost_book: CostBook, scenarios: ScenarioSet) -> float:
    """Electricity-system cost per MWh delivered to hydrogen production ($/MWh)."""
    flows = annual_flows(solution, catalog, scenarios)
    if not flows.electricity_to_h2_mwh > 0:
        raise ValueError("LCOE is undefined when no electricity reaches hydrogen production")
    d = solution.design
    charge = annual_charge(catalog, cost_book)
    capital = charge["PV"] * d.pv_mw + charge["battery"] * d.battery_mwh + charge["NGCC"] * d.ngcc_mw
    fuel = flows.ngcc_ng_mmbtu * cost_book.ng_price + catalog.ngcc.variable_cost * flows.ngcc_mwh
    tax = (flows.ngcc_co2_t + flows.grid_co2_t) * cost_book.co2_tax
    grid = flows.grid_mwh * cost_book.grid.price
    return (capital + fuel + tax + grid) / flows.electricity_to_h2_mwh


def source_intensity(source: str, catalog: TechnologyCatalog) -> float:
    """t CO2 per MWh of a power source."""
    table = {"PV": 0.0, "NGCC": catalog.ngcc.co2_rate, "grid": catalog.grid.co2_rate}
    try:
        return table[source]
    except KeyError:
        raise ValueError(f"unknown power source {source!r}") from None


def carbon_intensity(tech: str, power_source: str, catalog: TechnologyCatalog) -> float:
    """t CO2 per t H2: process emissions plus electricity use times the source intensity."""
    ci = source_intensity(power_source, catalog)
    if tech in catalog.reformers:
        r = catalog.reformers[tech]
        return r.co2_rate + r.elec_rate * ci
    if tech in catalog.electrolyzers:
        return catalog.electrolyzers[tech].specific_energy * ci
    raise ValueError(f"unknown production technology {tech!r}")


def table_e_row(solution: Solution, catalog: TechnologyCatalog, scenarios: ScenarioSet) -> dict[str, float]:
    """Design, CO2 and NG summary rounded to table precision."""
    d = solution.design
    flows = annual_flows(solution, catalog, scenarios)
    raw = {
        "pv_mw": d.pv_mw, "battery_mwh": d.battery_mwh, "tank_t": d.tank_t, "ngcc_mw": d.ngcc_mw,
        "co2_kt": flows.co2_t / 1000.0, "ng_tbtu": flows.ng_mmbtu / 1e6,
    }
    for kind in ELECTROLYZER_KINDS:
        raw[_ELECTROLYZER_COLUMN[kind]] = d.electrolyzer_mw.get(kind, 0.0)
    for kind in REFORMER_KINDS:
        raw[_REFORMER_COLUMN[kind]] = d.reformer_tpd.get(kind, 0.0)
    # round, and drop the sign of values that round to zero
    return {key: round(float(raw[key]), digits) + 0.0 for key, _, digits in TABLE_E_COLUMNS}
