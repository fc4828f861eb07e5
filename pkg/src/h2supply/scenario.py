"""Weather/demand ingestion and reduction to weighted representative periods."""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .domain import HOURS_PER_YEAR, DemandProfile

WEATHER_COLUMNS = ("timestamp", "ghi_w_m2", "temp_c")
SHAPE_COLUMNS = ("timestamp", "demand_weight")
SEASON_MONTHS = (1, 4, 7, 10)


class DataFormatError(ValueError):
    """Malformed input file; the message carries the path and line number."""


@dataclass(frozen=True)
class WeatherYear:
    year: int
    start: datetime
    ghi: np.ndarray
    temp: np.ndarray

    def __len__(self) -> int:
        return len(self.ghi)


def _read_hourly_csv(path: str | Path, columns: Sequence[str]) -> dict[int, tuple[datetime, list[list[float]]]]:
    path = Path(path)
    years: dict[int, tuple[datetime, list[list[float]]]] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        missing = [c for c in columns if c not in header]
        if missing:
            raise DataFormatError(f"{path}: missing columns {missing}")
        pos = [header.index(c) for c in columns]
        prev: datetime | None = None
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                stamp = datetime.fromisoformat(row[pos[0]].strip())
                vals = [float(row[p]) for p in pos[1:]]
            except (ValueError, IndexError) as exc:
                raise DataFormatError(f"{path}:{line_no}: malformed row {row!r} ({exc})") from None
            if not all(math.isfinite(v) for v in vals):
                raise DataFormatError(f"{path}:{line_no}: non-finite value in {row!r}")
            if prev is not None:
                step = stamp - prev
                if step <= timedelta(0):
                    raise DataFormatError(f"{path}:{line_no}: non-monotonic timestamp {stamp.isoformat()}")
                if step != timedelta(hours=1):
                    raise DataFormatError(f"{path}:{line_no}: gap of {step} before {stamp.isoformat()}; "
                                          "hourly cadence required")
            prev = stamp
            entry = years.setdefault(stamp.year, (stamp, []))
            entry[1].append(vals + [line_no])
    if not years:
        raise DataFormatError(f"{path}: no data rows")
    for year, (start, rows) in years.items():
        if len(rows) not in (8760, 8784):
            raise DataFormatError(f"{path}: year {year} has {len(rows)} rows, expected 8760 or 8784")
        if start != datetime(year, 1, 1, start.hour, start.minute) or start.hour != 0:
            raise DataFormatError(f"{path}: year {year} does not start at 00:00 on Jan 1")
    return years


def parse_weather_csv(path: str | Path) -> dict[int, WeatherYear]:
    """Read hourly ``timestamp, ghi_w_m2, temp_c`` rows into one record per calendar year."""
    out = {}
    for year, (start, rows) in sorted(_read_hourly_csv(path, WEATHER_COLUMNS).items()):
        data = np.array(rows)
        neg = np.flatnonzero(data[:, 0] < 0)
        if neg.size:
            raise DataFormatError(f"{path}:{int(data[neg[0], 2])}: negative GHI {data[neg[0], 0]}")
        out[year] = WeatherYear(year, start, data[:, 0].copy(), data[:, 1].copy())
    return out


def read_demand_shape(path: str | Path) -> dict[int, np.ndarray]:
    """Read hourly ``timestamp, demand_weight`` rows into one array per year."""
    out = {}
    for year, (_, rows) in sorted(_read_hourly_csv(path, SHAPE_COLUMNS).items()):
        data = np.array(rows)
        neg = np.flatnonzero(data[:, 0] < 0)
        if neg.size:
            raise DataFormatError(f"{path}:{int(data[neg[0], 1])}: negative demand weight")
        out[year] = data[:, 0].copy()
    return out


def make_demand(kind: str, annual_total: float, shape: str | Path | Sequence[float] | None = None,
                *, year: int | None = None, hours: int = HOURS_PER_YEAR) -> DemandProfile:
    """Build an hourly demand profile (t/h) totalling ``annual_total`` t/yr.

    ``constant`` and ``ideal`` are flat; ``variable`` rescales ``shape`` (a
    sequence, or a CSV path read with :func:`read_demand_shape`).
    """
    if not (annual_total > 0 and math.isfinite(annual_total)):
        raise ValueError(f"annual_total must be positive, got {annual_total}")
    if kind in ("constant", "ideal"):
        return DemandProfile(kind, float(annual_total), np.full(hours, annual_total / hours))
    if kind != "variable":
        raise ValueError(f"unknown demand kind {kind!r}")
    if shape is None:
        raise ValueError("variable demand needs a shape")
    if isinstance(shape, (str, Path)):
        per_year = read_demand_shape(shape)
        if year is None:
            if len(per_year) != 1:
                raise ValueError(f"{shape} holds years {sorted(per_year)}; pass year=")
            year = next(iter(per_year))
        shape = per_year[year]
    w = np.asarray(shape, dtype=float)[:hours]
    if len(w) < hours:
        raise ValueError(f"shape has {len(w)} entries, need {hours}")
    if np.any(w < 0):
        raise ValueError("shape entries must be non-negative")
    total = w.sum()
    if total <= 0:
        raise ValueError("shape is all zero")
    return DemandProfile("variable", float(annual_total), w * (annual_total / total))


# ---------------------------------------------------------------------------
# reduction

@dataclass(frozen=True)
class ReductionPolicy:
    kind: str
    count: int = 0

    @classmethod
    def parse(cls, text: "str | ReductionPolicy") -> "ReductionPolicy":
        if isinstance(text, ReductionPolicy):
            return text
        m = re.fullmatch(r"\s*(full_year|seasonal_weeks|first_hours)\s*(?:[:(]\s*(\d+)\s*\)?)?\s*", text)
        if not m:
            raise ValueError(f"unknown reduction policy {text!r}")
        kind, count = m.group(1), m.group(2)
        if kind == "full_year":
            return cls("full_year")
        if count is None or int(count) < 1:
            raise ValueError(f"{kind} needs a positive count")
        return cls(kind, int(count))

    def __str__(self) -> str:
        return self.kind if self.kind == "full_year" else f"{self.kind}:{self.count}"


def first_monday(year: int, month: int) -> date:
    d = date(year, month, 1)
    return d + timedelta(days=(7 - d.weekday()) % 7)


def select_hours(policy: ReductionPolicy, year: int, available: int = HOURS_PER_YEAR) -> np.ndarray:
    """Hour-of-year indices kept by ``policy`` (leap days already dropped)."""
    if policy.kind == "full_year":
        return np.arange(HOURS_PER_YEAR)
    if policy.kind == "first_hours":
        if policy.count > available:
            raise ValueError(f"first_hours({policy.count}) exceeds {available} available hours")
        return np.arange(policy.count)
    span = 168 * policy.count
    idx = []
    for month in SEASON_MONTHS:
        start = (first_monday(year, month) - date(year, 1, 1)).days * 24
        if start + span > available:
            raise ValueError(f"seasonal_weeks({policy.count}) runs past the end of year {year}")
        idx.append(np.arange(start, start + span))
    return np.concatenate(idx)


@dataclass(frozen=True)
class Scenario:
    name: str
    ghi: np.ndarray
    temp: np.ndarray
    demand: np.ndarray

    def __post_init__(self) -> None:
        for attr in ("ghi", "temp", "demand"):
            arr = np.array(getattr(self, attr), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)
        if not (len(self.ghi) == len(self.temp) == len(self.demand)):
            raise ValueError(f"scenario {self.name}: sequences differ in length")


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: tuple[Scenario, ...]
    weights: tuple[float, ...]
    annualization: float
    annual_total: float
    demand_kind: str
    policy: str = "full_year"
    dt: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not self.scenarios:
            raise ValueError("scenario set is empty")
        if len(self.weights) != len(self.scenarios):
            raise ValueError("one weight per scenario required")
        if abs(sum(self.weights) - 1.0) > 1e-12 or min(self.weights) < 0:
            raise ValueError(f"weights must be non-negative and sum to 1, got {self.weights}")
        lengths = {len(s.ghi) for s in self.scenarios}
        if len(lengths) != 1:
            raise ValueError(f"scenarios have different horizons {sorted(lengths)}")
        if not self.annualization > 0:
            raise ValueError("annualization must be positive")

    @property
    def T(self) -> int:
        return len(self.scenarios[0].ghi)

    def __len__(self) -> int:
        return len(self.scenarios)

    def annualized_demand(self) -> float:
        """Expected yearly hydrogen demand (t/yr) represented by the set."""
        return float(sum(w * s.demand.sum() for w, s in zip(self.weights, self.scenarios))
                     * self.dt * self.annualization)

    def scaled(self, factor: float) -> "ScenarioSet":
        scen = tuple(Scenario(s.name, s.ghi, s.temp, s.demand * factor) for s in self.scenarios)
        return ScenarioSet(scen, self.weights, self.annualization, self.annual_total * factor,
                           self.demand_kind, self.policy, self.dt)

    def to_dict(self) -> dict:
        return {
            "annualization": self.annualization,
            "annual_total": self.annual_total,
            "demand_kind": self.demand_kind,
            "policy": self.policy,
            "dt": self.dt,
            "weights": list(self.weights),
            "scenarios": [
                {"name": s.name, "ghi": s.ghi.tolist(), "temp": s.temp.tolist(), "demand": s.demand.tolist()}
                for s in self.scenarios
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: Mapping) -> "ScenarioSet":
        scen = tuple(Scenario(s["name"], s["ghi"], s["temp"], s["demand"]) for s in data["scenarios"])
        return cls(scen, tuple(data["weights"]), data["annualization"], data["annual_total"],
                   data["demand_kind"], data.get("policy", "full_year"), data.get("dt", 1.0))

    @classmethod
    def from_json(cls, text: str) -> "ScenarioSet":
        return cls.from_dict(json.loads(text))


def reduce_periods(weather: Mapping[int, WeatherYear],
                   demand: DemandProfile | Mapping[int, DemandProfile],
                   policy: str | ReductionPolicy = "full_year",
                   *, ideal_weather: bool = False) -> ScenarioSet:
    """One scenario per weather year, restricted to the hours ``policy`` keeps.

    Leap days are dropped by truncating every year to its first 8760 hours.
    ``demand`` is either one profile shared by all years or a per-year map
    aligned by hour of year.  Weights are uniform.
    """
    policy = ReductionPolicy.parse(policy)
    if not weather:
        raise ValueError("no weather years given")
    scenarios = []
    annual_totals = set()
    kinds = set()
    for year in sorted(weather):
        wy = weather[year]
        prof = demand[year] if isinstance(demand, Mapping) else demand
        annual_totals.add(prof.annual_total)
        kinds.add(prof.kind)
        idx = select_hours(policy, year, min(len(wy), HOURS_PER_YEAR))
        ghi = wy.ghi[:HOURS_PER_YEAR]
        temp = wy.temp[:HOURS_PER_YEAR]
        if ideal_weather:
            ghi = np.full(HOURS_PER_YEAR, ghi.mean())
            temp = np.full(HOURS_PER_YEAR, temp.mean())
        scenarios.append(Scenario(str(year), ghi[idx], temp[idx], prof.shape[:HOURS_PER_YEAR][idx]))
    if len(annual_totals) != 1 or len(kinds) != 1:
        raise ValueError("all demand profiles must share kind and annual total")
    n = len(scenarios)
    T = len(scenarios[0].ghi)
    return ScenarioSet(tuple(scenarios), tuple([1.0 / n] * n), HOURS_PER_YEAR / T,
                       annual_totals.pop(), kinds.pop(), str(policy))


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("h2supply").joinpath(f"data/{name}")))


def default_weather() -> dict[int, WeatherYear]:
    """Synthetic 2019-2021 hourly weather shipped with the package."""
    return parse_weather_csv(bundled_path("synthetic_weather.csv"))


def default_demand_shape() -> dict[int, np.ndarray]:
    """Synthetic commercial-load shape shipped with the package."""
    return read_demand_shape(bundled_path("synthetic_commercial_shape.csv"))


def demand_profiles(kind: str, annual_total: float, years: Iterable[int],
                    shape: Mapping[int, np.ndarray] | str | Path | None = None) -> dict[int, DemandProfile]:
    """Per-year profiles for :func:`reduce_periods`."""
    years = list(years)
    if kind != "variable":
        return {y: make_demand(kind, annual_total) for y in years}
    if shape is None:
        shape = default_demand_shape()
    elif isinstance(shape, (str, Path)):
        shape = read_demand_shape(shape)
    out = {}
    for y in years:
        key = y if y in shape else sorted(shape)[years.index(y) % len(shape)]
        out[y] = make_demand("variable", annual_total, shape[key])
    return out
