"""Case-study runner: configs, solve variants per (year, scale) cell, report files."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .domain import PRODUCTION_TECHS, CostBook, TechnologyCatalog, default_catalog, load_catalog
from .formulation import build, extract_solution, unique_restriction
from .metrics import LCOH_COMPONENTS, TABLE_E_COLUMNS, lcoh_breakdown
from .model import ModelInstance
from .scenario import ReductionPolicy, ScenarioSet, default_weather, demand_profiles, parse_weather_csv, reduce_periods
from .solver import INFEASIBLE, OPTIMAL, MipOptions, SimplexOptions, solve_mip
from .solver.mps import read_solution, write_mps

log = logging.getLogger(__name__)

CASES = ("base", "unique", "no_low_c", "expensive_ng", "co2_sweep", "ideal")
BACKENDS = ("embedded", "mps_export", "auto")
POWER_SOURCES = ("PV", "NGCC", "grid")
ALL_FACILITIES = ("PV", "battery", "NGCC", "grid", "tank", *PRODUCTION_TECHS)
EXPENSIVE_NG_PRICE = 10.5
CO2_SWEEP = (("co2_-50%", 0.5), ("co2_base", 1.0), ("co2_+50%", 1.5))
# above either limit the embedded solver is skipped when backend="auto"
DESK_MAX_VARS = 5000
DESK_MAX_NONZEROS = 20000

TOLERANCE_KEYS = ("feas_tol", "opt_tol", "int_tol", "gap_tol", "node_limit", "max_iter")


class ConfigError(ValueError):
    pass


def parse_tolerances(text: str | Mapping[str, Any] | None) -> dict[str, float]:
    """Accept ``"gap_tol=1e-6,feas_tol=1e-8"``, a JSON object string, or a mapping."""
    if text is None or text == "":
        return {}
    if isinstance(text, str):
        text = text.strip()
        if text.startswith("{"):
            items = json.loads(text)
        else:
            items = {}
            for part in text.split(","):
                if "=" not in part:
                    raise ConfigError(f"tolerance {part!r} is not key=value")
                k, v = part.split("=", 1)
                items[k.strip()] = v.strip()
    else:
        items = dict(text)
    out = {}
    for k, v in items.items():
        if k not in TOLERANCE_KEYS:
            raise ConfigError(f"unknown tolerance {k!r}; expected one of {TOLERANCE_KEYS}")
        val = float(v)
        if not (val > 0 and math.isfinite(val)):
            raise ConfigError(f"tolerance {k} must be positive and finite")
        out[k] = int(val) if k in ("node_limit", "max_iter") else val
    return out


def mip_options(tolerances: Mapping[str, float]) -> MipOptions:
    lp_keys = {k: tolerances[k] for k in ("feas_tol", "opt_tol", "max_iter") if k in tolerances}
    mip_keys = {k: tolerances[k] for k in ("int_tol", "gap_tol", "node_limit") if k in tolerances}
    return MipOptions(lp=SimplexOptions(**lp_keys), **mip_keys)


@dataclass(frozen=True)
class RunConfig:
    case: str
    years: tuple[int, ...]
    scales_kt: tuple[float, ...]
    demand_kind: str = "constant"
    reduction: str = "first_hours:168"
    backend: str = "embedded"
    weather_years: tuple[int, ...] | None = None
    catalog: str | None = None
    weather: str | None = None
    demand_shape: str | None = None
    tolerances: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.case not in CASES:
            raise ConfigError(f"unknown case {self.case!r}; expected one of {CASES}")
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}; expected one of {BACKENDS}")
        if self.demand_kind not in ("constant", "variable", "ideal"):
            raise ConfigError(f"unknown demand kind {self.demand_kind!r}")
        if not self.years or not self.scales_kt:
            raise ConfigError("config needs at least one year and one scale")
        if any(not (s > 0 and math.isfinite(s)) for s in self.scales_kt):
            raise ConfigError("scales must be positive")
        try:
            ReductionPolicy.parse(self.reduction)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base_dir: str | Path | None = None) -> "RunConfig":
        data = dict(data)
        known = {"case", "year", "years", "scale", "scales", "demand_kind", "reduction", "backend",
                 "weather_years", "catalog", "weather", "demand_shape", "tolerances"}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        if "case" not in data:
            raise ConfigError("config must name a case")

        def listed(one, many):
            if many in data:
                v = data[many]
                return tuple(v) if isinstance(v, (list, tuple)) else (v,)
            if one in data:
                return (data[one],)
            raise ConfigError(f"config needs {one!r} or {many!r}")

        def path(key):
            v = data.get(key)
            if v is None or base_dir is None:
                return v
            return str((Path(base_dir) / v).resolve())

        wy = data.get("weather_years")
        return cls(
            case=data["case"],
            years=tuple(int(y) for y in listed("year", "years")),
            scales_kt=tuple(float(s) for s in listed("scale", "scales")),
            demand_kind=data.get("demand_kind", "constant"),
            reduction=str(data.get("reduction", "first_hours:168")),
            backend=data.get("backend", "embedded"),
            weather_years=None if wy is None else tuple(int(y) for y in wy),
            catalog=path("catalog"),
            weather=path("weather"),
            demand_shape=path("demand_shape"),
            tolerances=parse_tolerances(data.get("tolerances")),
        )

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data, base_dir=path.parent)


@dataclass(frozen=True)
class Variant:
    label: str
    cost_book: CostBook
    restriction: frozenset[str] | None = None


def case_variants(case: str, catalog: TechnologyCatalog, year: int) -> list[Variant]:
    book = catalog.cost_book(year)
    if case in ("base", "ideal"):
        return [Variant("base", book)]
    if case == "unique":
        return [Variant(f"{tech}+{src}", book, unique_restriction(tech, src))
                for tech in PRODUCTION_TECHS for src in POWER_SOURCES]
    if case == "no_low_c":
        return [Variant("no_low_c", book, frozenset(ALL_FACILITIES) - {"NGCC"})]
    if case == "expensive_ng":
        return [Variant("expensive_ng", book.replace(ng_price=EXPENSIVE_NG_PRICE))]
    if case == "co2_sweep":
        tax = catalog.cost_book(2050).co2_tax
        return [Variant(label, book.replace(co2_tax=f * tax)) for label, f in CO2_SWEEP]
    raise ConfigError(f"unknown case {case!r}")


def scale_label(scale_kt: float) -> str:
    return f"{scale_kt:g}kt"


def _external_solve(model: ModelInstance, workdir: Path, options: MipOptions):
    """Export to MPS, solve the file with HiGHS when it is installed, read the values back."""
    workdir.mkdir(parents=True, exist_ok=True)
    mps = workdir / "model.mps"
    write_mps(model, mps)
    try:
        import highspy
    except ImportError:
        return EXPORTED, None, {"mps": mps.name}
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", options.gap_tol)
    h.setOptionValue("random_seed", 0)
    h.setOptionValue("threads", 1)
    h.readModel(str(mps))
    h.run()
    status = h.modelStatusToString(h.getModelStatus()).lower()
    if status != "optimal":
        return (INFEASIBLE if "infeasible" in status else status), None, {"mps": mps.name}
    names = h.getLp().col_names_
    values = h.getSolution().col_value
    sol_path = workdir / "solution.txt"
    sol_path.write_text("".join(f"{n} {float(v)!r}\n" for n, v in zip(names, values)))
    sol = read_solution(sol_path, model)
    return OPTIMAL, sol, {"mps": mps.name, "solution": sol_path.name}


def solve_variant(catalog: TechnologyCatalog, variant: Variant, scenarios: ScenarioSet, backend: str,
                  options: MipOptions, workdir: Path | None = None) -> dict:
    """Build and solve one variant; returns a JSON-ready record."""
    model = build(catalog, variant.cost_book, scenarios, variant.restriction, name=variant.label.replace("+", "_"))
    stats = model.stats()
    if backend == "auto":
        small = stats["variables"] <= DESK_MAX_VARS and stats["nonzeros"] <= DESK_MAX_NONZEROS
        backend = "embedded" if small else "mps_export"
    record: dict[str, Any] = {
        "label": variant.label,
        "restriction": None if variant.restriction is None else sorted(variant.restriction),
        "ng_price": variant.cost_book.ng_price,
        "co2_tax": variant.cost_book.co2_tax,
        "backend": backend,
        "stats": stats,
    }
    if backend == "embedded":
        res = solve_mip(model, options)
        record["solver"] = {"nodes": res.nodes, "gap": res.gap, "bound": res.bound,
                            "warnings": list(res.warnings)}
        status, x = res.status, (None if res.incumbent is None else res.incumbent.x)
    else:
        status, sol, files = _external_solve(model, (workdir or Path(tempfile.mkdtemp())) / variant.label, options)
        record["solver"] = {"files": files}
        x = None if sol is None else sol.x
        if sol is not None and sol.warnings:
            record["solver"]["warnings"] = list(sol.warnings)
    record["status"] = status
    if x is None:
        record["objective"] = None
        record["report"] = None
        return record
    objective = model.objective_value(x)
    solution = extract_solution(model, x, status, objective, catalog, variant.cost_book, scenarios)
    record["objective"] = objective
    record["max_residual"] = float(max(model.residuals(x).max(initial=0.0), model.bound_violations(x).max(initial=0.0)))
    record["report"] = lcoh_breakdown(solution, catalog, variant.cost_book, scenarios).to_dict()
    return record


@dataclass(frozen=True)
class CellJob:
    config: RunConfig
    year: int
    scale_kt: float
    out_dir: str


def _load_inputs(config: RunConfig):
    catalog = load_catalog(config.catalog) if config.catalog else default_catalog()
    weather = parse_weather_csv(config.weather) if config.weather else default_weather()
    if config.weather_years is not None:
        missing = set(config.weather_years) - set(weather)
        if missing:
            raise ConfigError(f"weather years {sorted(missing)} not in the weather file")
        weather = {y: weather[y] for y in config.weather_years}
    return catalog, weather


def cell_scenarios(config: RunConfig, weather, scale_kt: float) -> ScenarioSet:
    kind = "constant" if config.demand_kind == "ideal" else config.demand_kind
    demand = demand_profiles(kind, scale_kt * 1000.0, weather, config.demand_shape)
    ideal = config.case == "ideal" or config.demand_kind == "ideal"
    return reduce_periods(weather, demand, config.reduction, ideal_weather=ideal)


def run_cell(job: CellJob) -> dict:
    """Solve every variant of one (year, scale) cell and write its three files."""
    config = job.config
    catalog, weather = _load_inputs(config)
    scenarios = cell_scenarios(config, weather, job.scale_kt)
    options = mip_options(config.tolerances)
    cell_dir = Path(job.out_dir) / config.case / str(job.year) / scale_label(job.scale_kt)
    runs = [solve_variant(catalog, v, scenarios, config.backend, options, cell_dir)
            for v in case_variants(config.case, catalog, job.year)]
    solved = [r for r in runs if r["report"] is not None and r["status"] == OPTIMAL]
    cheapest = min(solved, key=lambda r: (r["report"]["lcoh_total"], r["label"]))["label"] if solved else None
    report = {
        "case": config.case,
        "year": job.year,
        "scale_kt": job.scale_kt,
        "demand_kind": config.demand_kind,
        "reduction": config.reduction,
        "weather_years": sorted(weather),
        "cheapest": cheapest,
        "runs": [{k: v for k, v in r.items() if k != "stats"} for r in runs],
    }
    stats = {r["label"]: r["stats"] for r in runs}
    write_atomic(cell_dir / "report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    write_atomic(cell_dir / "table_e.csv", table_e_csv(runs))
    write_atomic(cell_dir / "model_stats.json", json.dumps(stats, indent=2, sort_keys=True) + "\n")
    return report


def table_e_csv(runs: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "status"] + [title for _, title, _ in TABLE_E_COLUMNS])
    for r in runs:
        row = r["report"]["design"] if r["report"] else {}
        w.writerow([r["label"], r["status"]] + [row.get(key, "") for key, _, _ in TABLE_E_COLUMNS])
    return buf.getvalue()


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def run_config(config: RunConfig, out_dir: str | Path, *, jobs: int = 1) -> list[dict]:
    """Run every (year, scale) cell; cells are independent and may run in parallel."""
    cells = [CellJob(config, y, s, str(out_dir)) for y in config.years for s in config.scales_kt]
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run_cell, cells))
    return [run_cell(c) for c in cells]


EXPORTED = "exported"


def exit_code(reports: list[dict]) -> int:
    """0 when every run is optimal (or only exported), 2 when one was infeasible or unfinished."""
    bad = [r["status"] for rep in reports for r in rep["runs"] if r["status"] not in (OPTIMAL, EXPORTED)]
    return 2 if bad else 0


# ---------------------------------------------------------------------------
# long-format export for external plotting

PLOT_FIELDS = ("case", "year", "scale", "run", "metric", "component", "value")


def _report_rows(rep: dict) -> list[list]:
    rows = []
    for run in rep["runs"]:
        head = [rep["case"], rep["year"], rep["scale_kt"], run["label"]]
        cr = run["report"]
        if cr is None:
            rows.append(head + ["status", run["status"], ""])
            continue
        for comp in LCOH_COMPONENTS:
            rows.append(head + ["lcoh", comp, cr["components"][comp]])
        rows.append(head + ["lcoh", "total", cr["lcoh_total"]])
        for key in ("lcoe", "carbon_intensity", "annual_co2_kt", "annual_ng_tbtu"):
            rows.append(head + [key, "", "" if cr[key] is None else cr[key]])
        for key, _, _ in TABLE_E_COLUMNS:
            rows.append(head + ["design", key, cr["design"][key]])
    return rows


def emit_plots_csv(results_dir: str | Path, out_path: str | Path | None = None) -> Path:
    """Collect every report.json under ``results_dir`` into one long-format CSV."""
    results_dir = Path(results_dir)
    files = sorted(results_dir.rglob("report.json"))
    if not files:
        raise FileNotFoundError(f"no report.json files under {results_dir}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLOT_FIELDS)
    for f in files:
        for row in _report_rows(json.loads(f.read_text())):
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    out = Path(out_path) if out_path else results_dir / "plots.csv"
    write_atomic(out, buf.getvalue())
    return out
