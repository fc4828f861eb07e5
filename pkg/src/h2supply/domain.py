"""Techno-economic data for the supply-chain superstructure.

Every facility kind gets a frozen dataclass.  Values that change with the
planning year (installation costs, CO2 tax) are stored as ``{year: value}``
trajectories and resolved through :meth:`TechnologyCatalog.cost_book` or the
``*_at`` helpers.  Units are fixed by field name; there is no unit framework.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

HOURS_PER_YEAR = 8760
YEARS = (2030, 2040, 2050)

ELECTROLYZER_KINDS = ("PEM", "Alkaline")
REFORMER_KINDS = ("ATR+CC", "SMR+CC", "SMR")
PRODUCTION_TECHS = ELECTROLYZER_KINDS + REFORMER_KINDS
POWER_SOURCES = ("PV", "NGCC", "grid")
TECHNOLOGIES = ("PV", "battery", "NGCC", "grid") + PRODUCTION_TECHS + ("tank",)


def crf(r: float, lifespan: float) -> float:
    """Capital recovery factor ``r (1+r)^L / ((1+r)^L - 1)``.

    Evaluated as ``r / (1 - (1+r)^-L)`` so long lifespans do not overflow.
    """
    if not (math.isfinite(r) and math.isfinite(lifespan)):
        raise ValueError(f"crf needs finite inputs, got r={r!r}, lifespan={lifespan!r}")
    if r <= 0:
        raise ValueError(f"interest rate must be positive, got {r}")
    if lifespan < 1:
        raise ValueError(f"lifespan must be at least one year, got {lifespan}")
    return r / -math.expm1(-lifespan * math.log1p(r))


Trajectory = Mapping[int, float]


def _at(trajectory: Trajectory, year: int, what: str) -> float:
    try:
        return float(trajectory[year])
    except KeyError:
        raise KeyError(f"{what} has no value for year {year}; known years {sorted(trajectory)}") from None


@dataclass(frozen=True)
class BatteryParams:
    capex_per_mwh: Trajectory
    omf: float = 0.025
    lifespan_yr: int = 10
    self_discharge: float = 0.000083
    efficiency: float = 0.95
    power_ratio: float = 0.25
    soc_min: float = 0.15
    soc_max: float = 0.95
    note: str = ""

    def capex_at(self, year: int) -> float:
        return _at(self.capex_per_mwh, year, "battery.capex_per_mwh")


@dataclass(frozen=True)
class PvParams:
    capex_per_kw: Trajectory
    omf: float = 0.02
    lifespan_yr: int = 35
    gamma: float = -0.0037
    noct: float = 45.0
    t_ref: float = 25.0
    note: str = ""

    def capex_at(self, year: int) -> float:
        return _at(self.capex_per_kw, year, "pv.capex_per_kw")


@dataclass(frozen=True)
class NgccParams:
    capex_per_mw: float = 3.0e6
    variable_cost: float = 5.6
    min_load: float = 0.6
    fuel_rate: float = 7.15
    co2_rate: float = 0.038
    omf: float = 0.03
    lifespan_yr: int = 25
    note: str = ""


@dataclass(frozen=True)
class GridParams:
    price: float = 227.0
    co2_rate: float = 0.376
    note: str = ""


@dataclass(frozen=True)
class ElectrolyzerParams:
    kind: str
    capex_per_kw: Trajectory
    min_load: float
    specific_energy: float
    omf: float = 0.02
    lifespan_yr: int = 10
    note: str = ""

    def capex_at(self, year: int) -> float:
        return _at(self.capex_per_kw, year, f"electrolyzers.{self.kind}.capex_per_kw")


@dataclass(frozen=True)
class ReformerParams:
    """NG reformer.  ``cost_curve`` holds ``(capacity t/day, installed cost $)``
    breakpoints; the origin is implicit.  Rates are per tonne of hydrogen."""

    kind: str
    cost_curve: tuple[tuple[float, float], ...]
    ng_rate: float
    elec_rate: float
    co2_rate: float
    omf: float = 0.04
    lifespan_yr: int = 25
    min_load: float = 0.6
    ramp_fraction: float = 0.2
    note: str = ""

    @property
    def capacities(self) -> np.ndarray:
        return np.array([p[0] for p in self.cost_curve], dtype=float)

    @property
    def costs(self) -> np.ndarray:
        return np.array([p[1] for p in self.cost_curve], dtype=float)


@dataclass(frozen=True)
class TankParams:
    capex_per_t: float = 4.0e5
    omf: float = 0.01
    lifespan_yr: int = 25
    leak: float = 0.000104
    note: str = ""


@dataclass(frozen=True)
class CostBook:
    year: int
    ng_price: float
    co2_tax: float
    interest: float = 0.07
    grid: GridParams = field(default_factory=GridParams)
    converter_dc: float = 0.98
    converter_ac: float = 0.95

    def replace(self, **changes: Any) -> "CostBook":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class TechnologyCatalog:
    pv: PvParams
    battery: BatteryParams
    ngcc: NgccParams
    grid: GridParams
    electrolyzers: Mapping[str, ElectrolyzerParams]
    reformers: Mapping[str, ReformerParams]
    tank: TankParams
    ng_price: float = 3.5
    co2_tax: Trajectory = field(default_factory=lambda: {2030: 100.0, 2040: 150.0, 2050: 200.0})
    interest: float = 0.07
    converter_dc: float = 0.98
    converter_ac: float = 0.95

    def cost_book(self, year: int, *, ng_price: float | None = None,
                  co2_tax: float | None = None) -> CostBook:
        return CostBook(
            year=year,
            ng_price=self.ng_price if ng_price is None else float(ng_price),
            co2_tax=_at(self.co2_tax, year, "cost_book.co2_tax") if co2_tax is None else float(co2_tax),
            interest=self.interest,
            grid=self.grid,
            converter_dc=self.converter_dc,
            converter_ac=self.converter_ac,
        )

    def replace(self, **changes: Any) -> "TechnologyCatalog":
        return dataclasses.replace(self, **changes)

    def with_reformer(self, params: ReformerParams) -> "TechnologyCatalog":
        reformers = dict(self.reformers)
        reformers[params.kind] = params
        return self.replace(reformers=reformers)

    def with_electrolyzer(self, params: ElectrolyzerParams) -> "TechnologyCatalog":
        electrolyzers = dict(self.electrolyzers)
        electrolyzers[params.kind] = params
        return self.replace(electrolyzers=electrolyzers)


@dataclass(frozen=True)
class DemandProfile:
    """Hourly hydrogen demand in t/h; ``shape`` integrates to ``annual_total``."""

    kind: str
    annual_total: float
    shape: np.ndarray
    dt: float = 1.0

    def __post_init__(self) -> None:
        shape = np.array(self.shape, dtype=float)
        shape.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        if self.kind not in ("constant", "variable", "ideal"):
            raise ValueError(f"unknown demand kind {self.kind!r}")
        if np.any(shape < 0) or not np.all(np.isfinite(shape)):
            raise ValueError("demand entries must be finite and non-negative")
        total = float(shape.sum() * self.dt)
        if self.annual_total > 0 and abs(total - self.annual_total) > 1e-9 * self.annual_total:
            raise ValueError(f"demand profile sums to {total}, expected {self.annual_total}")


@dataclass(frozen=True)
class Design:
    """First-stage decisions.  Reformer capacities are in t H2/day."""

    pv_mw: float = 0.0
    battery_mwh: float = 0.0
    ngcc_mw: float = 0.0
    tank_t: float = 0.0
    electrolyzer_mw: Mapping[str, float] = field(default_factory=dict)
    reformer_tpd: Mapping[str, float] = field(default_factory=dict)
    segment_weights: Mapping[str, tuple[float, ...]] = field(default_factory=dict)
    segment_selectors: Mapping[str, tuple[float, ...]] = field(default_factory=dict)


@dataclass(frozen=True)
class Dispatch:
    """Second-stage trajectories for one scenario (MW, MWh, t/h, t)."""

    ch: np.ndarray
    dch: np.ndarray
    ess: np.ndarray
    ngcc: np.ndarray
    grid: np.ndarray
    d2a: np.ndarray
    a2d: np.ndarray
    curtail: np.ndarray
    p2h: Mapping[str, np.ndarray]
    h_nr: Mapping[str, np.ndarray]
    ht: np.ndarray
    pv: np.ndarray


@dataclass(frozen=True)
class Solution:
    status: str
    objective: float
    design: Design
    dispatch: tuple[Dispatch, ...]


# ---------------------------------------------------------------------------
# validation

def _check(violations: list[str], ok: bool, where: str, rule: str, value: Any) -> None:
    if not ok:
        violations.append(f"{where}: {rule} (got {value!r})")


def _check_common(v: list[str], where: str, omf: float, lifespan: float) -> None:
    _check(v, 0 <= omf < 1, f"{where}.omf", "must satisfy 0 <= omf < 1", omf)
    _check(v, lifespan >= 1, f"{where}.lifespan_yr", "must be >= 1", lifespan)


def _check_trajectory(v: list[str], where: str, traj: Trajectory) -> None:
    bad = {y: c for y, c in traj.items() if not (math.isfinite(c) and c >= 0)}
    _check(v, not bad and len(traj) > 0, where, "needs finite non-negative values per year", dict(traj))


def validate_catalog(catalog: TechnologyCatalog) -> list[str]:
    """Return one message per breached invariant; empty when the catalog is sound."""
    v: list[str] = []
    b = catalog.battery
    _check_trajectory(v, "battery.capex_per_mwh", b.capex_per_mwh)
    _check_common(v, "battery", b.omf, b.lifespan_yr)
    _check(v, 0 <= b.self_discharge < 1, "battery.self_discharge", "must satisfy 0 <= value < 1", b.self_discharge)
    _check(v, 0 < b.efficiency <= 1, "battery.efficiency", "must satisfy 0 < value <= 1", b.efficiency)
    _check(v, 0 < b.power_ratio <= 1, "battery.power_ratio", "must satisfy 0 < value <= 1", b.power_ratio)
    _check(v, 0 <= b.soc_min < b.soc_max <= 1, "battery.soc_min/soc_max",
           "must satisfy 0 <= soc_min < soc_max <= 1", (b.soc_min, b.soc_max))

    p = catalog.pv
    _check_trajectory(v, "pv.capex_per_kw", p.capex_per_kw)
    _check_common(v, "pv", p.omf, p.lifespan_yr)
    _check(v, p.gamma < 0, "pv.gamma", "must be negative", p.gamma)
    _check(v, p.noct > 20, "pv.noct", "must exceed 20 C", p.noct)

    n = catalog.ngcc
    _check(v, n.capex_per_mw >= 0, "ngcc.capex_per_mw", "must be >= 0", n.capex_per_mw)
    _check_common(v, "ngcc", n.omf, n.lifespan_yr)
    _check(v, 0 <= n.min_load <= 1, "ngcc.min_load", "must satisfy 0 <= value <= 1", n.min_load)
    _check(v, n.fuel_rate > 0, "ngcc.fuel_rate", "must be > 0", n.fuel_rate)
    _check(v, n.co2_rate >= 0, "ngcc.co2_rate", "must be >= 0", n.co2_rate)
    _check(v, n.variable_cost >= 0, "ngcc.variable_cost", "must be >= 0", n.variable_cost)

    g = catalog.grid
    _check(v, g.price >= 0, "grid.price", "must be >= 0", g.price)
    _check(v, g.co2_rate >= 0, "grid.co2_rate", "must be >= 0", g.co2_rate)

    for kind, e in catalog.electrolyzers.items():
        where = f"electrolyzers.{kind}"
        _check(v, e.kind == kind, f"{where}.kind", "must match its key", e.kind)
        _check_trajectory(v, f"{where}.capex_per_kw", e.capex_per_kw)
        _check_common(v, where, e.omf, e.lifespan_yr)
        _check(v, 0 <= e.min_load < 1, f"{where}.min_load", "must satisfy 0 <= value < 1", e.min_load)
        _check(v, e.specific_energy > 0, f"{where}.specific_energy", "must be > 0", e.specific_energy)

    for kind, r in catalog.reformers.items():
        where = f"reformers.{kind}"
        _check(v, r.kind == kind, f"{where}.kind", "must match its key", r.kind)
        _check_common(v, where, r.omf, r.lifespan_yr)
        _check(v, 0 <= r.min_load <= 1, f"{where}.min_load", "must satisfy 0 <= value <= 1", r.min_load)
        _check(v, 0 < r.ramp_fraction <= 1, f"{where}.ramp_fraction", "must satisfy 0 < value <= 1",
               r.ramp_fraction)
        for rate in ("ng_rate", "elec_rate", "co2_rate"):
            _check(v, getattr(r, rate) > 0, f"{where}.{rate}", "must be > 0", getattr(r, rate))
        _check_cost_curve(v, where, r.cost_curve)

    t = catalog.tank
    _check(v, t.capex_per_t >= 0, "tank.capex_per_t", "must be >= 0", t.capex_per_t)
    _check_common(v, "tank", t.omf, t.lifespan_yr)
    _check(v, 0 <= t.leak < 1, "tank.leak", "must satisfy 0 <= value < 1", t.leak)

    _check(v, catalog.ng_price >= 0, "cost_book.ng_price", "must be >= 0", catalog.ng_price)
    _check_trajectory(v, "cost_book.co2_tax", catalog.co2_tax)
    _check(v, 0 < catalog.interest < 1, "cost_book.interest", "must satisfy 0 < r < 1", catalog.interest)
    for eff in ("converter_dc", "converter_ac"):
        val = getattr(catalog, eff)
        _check(v, 0 < val <= 1, f"cost_book.{eff}", "must satisfy 0 < value <= 1", val)
    return v


def _check_cost_curve(v: list[str], where: str, curve: Sequence[tuple[float, float]]) -> None:
    if len(curve) < 1:
        v.append(f"{where}.cost_curve: needs at least one breakpoint (got [])")
        return
    caps = np.array([c for c, _ in curve], dtype=float)
    costs = np.array([ic for _, ic in curve], dtype=float)
    if caps[0] <= 0 or costs[0] <= 0 or np.any(np.diff(caps) <= 0) or np.any(np.diff(costs) <= 0):
        v.append(f"{where}.cost_curve: breakpoints must be positive and strictly increasing "
                 f"in capacity and cost (got {list(map(tuple, curve))!r})")
        return
    unit = costs / caps
    if np.any(np.diff(unit) > 1e-12 * unit[:-1]):
        v.append(f"{where}.cost_curve: cost per unit capacity must be non-increasing "
                 f"(got {unit.tolist()!r})")


# ---------------------------------------------------------------------------
# JSON (de)serialization; unknown keys are rejected

def _strict_kwargs(cls: type, data: Mapping[str, Any], where: str) -> dict[str, Any]:
    if not isinstance(data, Mapping):
        raise ValueError(f"{where}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ValueError(f"{where}: unknown keys {unknown}")
    return dict(data)


def _trajectory_from_json(data: Any, where: str) -> dict[int, float]:
    if not isinstance(data, Mapping):
        raise ValueError(f"{where}: expected a {{year: value}} object")
    try:
        return {int(k): float(val) for k, val in data.items()}
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{where}: {exc}") from None


def _trajectory_to_json(traj: Trajectory) -> dict[str, float]:
    return {str(k): float(traj[k]) for k in sorted(traj)}


def catalog_from_dict(data: Mapping[str, Any]) -> TechnologyCatalog:
    top = _strict_kwargs(_CatalogDoc, data, "catalog")
    missing = [k for k in ("pv", "battery", "ngcc", "grid", "electrolyzers", "reformers", "tank",
                           "cost_book") if k not in top]
    if missing:
        raise ValueError(f"catalog: missing keys {missing}")

    pv = _strict_kwargs(PvParams, top["pv"], "pv")
    pv["capex_per_kw"] = _trajectory_from_json(pv.get("capex_per_kw"), "pv.capex_per_kw")
    bat = _strict_kwargs(BatteryParams, top["battery"], "battery")
    bat["capex_per_mwh"] = _trajectory_from_json(bat.get("capex_per_mwh"), "battery.capex_per_mwh")

    electrolyzers = {}
    for kind, raw in top["electrolyzers"].items():
        e = _strict_kwargs(ElectrolyzerParams, raw, f"electrolyzers.{kind}")
        e.setdefault("kind", kind)
        e["capex_per_kw"] = _trajectory_from_json(e.get("capex_per_kw"), f"electrolyzers.{kind}.capex_per_kw")
        electrolyzers[kind] = ElectrolyzerParams(**e)

    reformers = {}
    for kind, raw in top["reformers"].items():
        r = _strict_kwargs(ReformerParams, raw, f"reformers.{kind}")
        r.setdefault("kind", kind)
        r["cost_curve"] = tuple((float(c), float(ic)) for c, ic in r.get("cost_curve", ()))
        reformers[kind] = ReformerParams(**r)

    book = _strict_kwargs(_CostBookDoc, top["cost_book"], "cost_book")
    if "co2_tax" in book:
        book["co2_tax"] = _trajectory_from_json(book["co2_tax"], "cost_book.co2_tax")
    book.pop("note", None)
    return TechnologyCatalog(
        pv=PvParams(**pv),
        battery=BatteryParams(**bat),
        ngcc=NgccParams(**_strict_kwargs(NgccParams, top["ngcc"], "ngcc")),
        grid=GridParams(**_strict_kwargs(GridParams, top["grid"], "grid")),
        electrolyzers=electrolyzers,
        reformers=reformers,
        tank=TankParams(**_strict_kwargs(TankParams, top["tank"], "tank")),
        **book,
    )


def catalog_to_dict(catalog: TechnologyCatalog) -> dict[str, Any]:
    def plain(obj: Any) -> dict[str, Any]:
        out = {}
        for f in dataclasses.fields(obj):
            val = getattr(obj, f.name)
            if f.name in ("capex_per_kw", "capex_per_mwh"):
                val = _trajectory_to_json(val)
            elif f.name == "cost_curve":
                val = [[float(c), float(ic)] for c, ic in val]
            out[f.name] = val
        return out

    return {
        "pv": plain(catalog.pv),
        "battery": plain(catalog.battery),
        "ngcc": plain(catalog.ngcc),
        "grid": plain(catalog.grid),
        "electrolyzers": {k: plain(e) for k, e in catalog.electrolyzers.items()},
        "reformers": {k: plain(r) for k, r in catalog.reformers.items()},
        "tank": plain(catalog.tank),
        "cost_book": {
            "ng_price": catalog.ng_price,
            "co2_tax": _trajectory_to_json(catalog.co2_tax),
            "interest": catalog.interest,
            "converter_dc": catalog.converter_dc,
            "converter_ac": catalog.converter_ac,
        },
    }


@dataclass
class _CatalogDoc:
    pv: Any = None
    battery: Any = None
    ngcc: Any = None
    grid: Any = None
    electrolyzers: Any = None
    reformers: Any = None
    tank: Any = None
    cost_book: Any = None
    note: Any = None


@dataclass
class _CostBookDoc:
    ng_price: Any = None
    co2_tax: Any = None
    interest: Any = None
    converter_dc: Any = None
    converter_ac: Any = None
    note: Any = None


def dumps_catalog(catalog: TechnologyCatalog) -> str:
    return json.dumps(catalog_to_dict(catalog), indent=2) + "\n"


def loads_catalog(text: str) -> TechnologyCatalog:
    return catalog_from_dict(json.loads(text))


def load_catalog(path: str | Path | None = None) -> TechnologyCatalog:
    """Load a catalog JSON file; ``None`` loads the bundled default."""
    if path is None:
        text = resources.files("h2supply").joinpath("data/default_catalog.json").read_text()
    else:
        text = Path(path).read_text()
    return loads_catalog(text)


def default_catalog() -> TechnologyCatalog:
    return load_catalog(None)
