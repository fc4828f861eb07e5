"""Sparse MILP container with named variables and rows."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

SENSES = ("<=", "=", ">=")
FIRST_STAGE, SECOND_STAGE = 1, 2

_KEY_RE = re.compile(
    r"^(?P<quantity>[A-Za-z0-9_+\-]+)\.(?P<facility>[A-Za-z0-9_+\-]+)"
    r"(?:#(?P<index>\d+))?(?:\[(?P<scenario>\d+),(?P<time>\d+)\])?$"
)


@dataclass(frozen=True)
class VarKey:
    """Symbolic variable key rendered as ``quantity.facility#index[scenario,time]``."""

    facility: str
    quantity: str
    scenario: int | None = None
    time: int | None = None
    index: int | None = None

    def __post_init__(self) -> None:
        for part in (self.facility, self.quantity):
            if not re.fullmatch(r"[A-Za-z0-9_+\-]+", part):
                raise ValueError(f"illegal key component {part!r}")
        if (self.scenario is None) != (self.time is None):
            raise ValueError("scenario and time must be given together")

    def render(self) -> str:
        s = f"{self.quantity}.{self.facility}"
        if self.index is not None:
            s += f"#{self.index}"
        if self.scenario is not None:
            s += f"[{self.scenario},{self.time}]"
        return s

    __str__ = render

    @classmethod
    def parse(cls, name: str) -> "VarKey":
        m = _KEY_RE.match(name)
        if not m:
            raise ValueError(f"not a variable key: {name!r}")
        g = m.groupdict()
        as_int = lambda v: None if v is None else int(v)  # noqa: E731
        return cls(g["facility"], g["quantity"], as_int(g["scenario"]), as_int(g["time"]), as_int(g["index"]))


@dataclass
class Variable:
    name: str
    lower: float = 0.0
    upper: float = math.inf
    cost: float = 0.0
    is_binary: bool = False
    stage: int = FIRST_STAGE


@dataclass
class Row:
    name: str
    coefs: dict[int, float]
    sense: str
    rhs: float = 0.0


@dataclass
class ModelInstance:
    name: str = "h2supply"
    variables: list[Variable] = field(default_factory=list)
    rows: list[Row] = field(default_factory=list)
    index: dict[str, int] = field(default_factory=dict)
    row_index: dict[str, int] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    # -- construction ------------------------------------------------------
    def add_var(self, key: VarKey | str, lower: float = 0.0, upper: float = math.inf, cost: float = 0.0,
                *, binary: bool = False, stage: int | None = None) -> int:
        name = key.render() if isinstance(key, VarKey) else str(key)
        if name in self.index:
            raise ValueError(f"duplicate variable {name}")
        if binary:
            lower, upper = max(0.0, lower), min(1.0, upper)
        if lower > upper:
            raise ValueError(f"{name}: lower bound {lower} exceeds upper bound {upper}")
        if stage is None:
            if not isinstance(key, VarKey):
                try:
                    key = VarKey.parse(name)
                except ValueError:
                    key = None
            stage = SECOND_STAGE if key is not None and key.scenario is not None else FIRST_STAGE
        self.index[name] = len(self.variables)
        self.variables.append(Variable(name, float(lower), float(upper), float(cost), binary, stage))
        return self.index[name]

    def add_row(self, name: str, coefs: Mapping[int | str | VarKey, float] | Iterable[tuple],
                sense: str, rhs: float = 0.0) -> int:
        if name in self.row_index:
            raise ValueError(f"duplicate row {name}")
        if sense not in SENSES:
            raise ValueError(f"{name}: sense must be one of {SENSES}, got {sense!r}")
        items = coefs.items() if isinstance(coefs, Mapping) else coefs
        merged: dict[int, float] = {}
        for k, a in items:
            j = self.var(k)
            merged[j] = merged.get(j, 0.0) + float(a)
        merged = {j: a for j, a in merged.items() if a != 0.0}
        self.row_index[name] = len(self.rows)
        self.rows.append(Row(name, merged, sense, float(rhs)))
        return self.row_index[name]

    def var(self, key: int | str | VarKey) -> int:
        if isinstance(key, (int, np.integer)):
            if not 0 <= key < len(self.variables):
                raise IndexError(f"variable position {key} out of range")
            return int(key)
        name = key.render() if isinstance(key, VarKey) else key
        try:
            return self.index[name]
        except KeyError:
            raise KeyError(f"unknown variable {name}") from None

    def has_var(self, key: str | VarKey) -> bool:
        return (key.render() if isinstance(key, VarKey) else key) in self.index

    def set_bounds(self, key, lower: float | None = None, upper: float | None = None) -> None:
        v = self.variables[self.var(key)]
        if lower is not None:
            v.lower = float(lower)
        if upper is not None:
            v.upper = float(upper)
        if v.lower > v.upper:
            raise ValueError(f"{v.name}: lower bound {v.lower} exceeds upper bound {v.upper}")

    def set_cost(self, key, cost: float) -> None:
        self.variables[self.var(key)].cost = float(cost)

    # -- views ---------------------------------------------------------------
    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def stats(self) -> dict:
        return {
            "variables": self.n_vars,
            "rows": self.n_rows,
            "nonzeros": sum(len(r.coefs) for r in self.rows),
            "binaries": sum(v.is_binary for v in self.variables),
            "first_stage": sum(v.stage == FIRST_STAGE for v in self.variables),
            "second_stage": sum(v.stage == SECOND_STAGE for v in self.variables),
        }

    def matrix(self) -> sp.csr_matrix:
        indptr = [0]
        indices: list[int] = []
        data: list[float] = []
        for r in self.rows:
            cols = sorted(r.coefs)
            indices.extend(cols)
            data.extend(r.coefs[j] for j in cols)
            indptr.append(len(indices))
        return sp.csr_matrix((np.array(data, dtype=float), np.array(indices, dtype=np.int64),
                              np.array(indptr, dtype=np.int64)), shape=(self.n_rows, self.n_vars))

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        rl = np.empty(self.n_rows)
        ru = np.empty(self.n_rows)
        for i, r in enumerate(self.rows):
            rl[i] = r.rhs if r.sense in ("=", ">=") else -math.inf
            ru[i] = r.rhs if r.sense in ("=", "<=") else math.inf
        return rl, ru

    def to_arrays(self):
        from .solver.lp import LpArrays
        rl, ru = self.row_bounds()
        return LpArrays(
            c=np.array([v.cost for v in self.variables]),
            A=self.matrix(),
            row_lo=rl,
            row_up=ru,
            lo=np.array([v.lower for v in self.variables]),
            up=np.array([v.upper for v in self.variables]),
            integer=np.array([v.is_binary for v in self.variables], dtype=bool),
        )

    def objective_value(self, x: np.ndarray) -> float:
        return float(np.array([v.cost for v in self.variables]) @ np.asarray(x, dtype=float))

    def residuals(self, x: np.ndarray) -> np.ndarray:
        """Per-row violation (0 when the row holds) at point ``x``."""
        act = self.matrix() @ np.asarray(x, dtype=float)
        rl, ru = self.row_bounds()
        with np.errstate(invalid="ignore"):
            viol = np.maximum(np.nan_to_num(rl - act, nan=0.0, neginf=0.0),
                              np.nan_to_num(act - ru, nan=0.0, neginf=0.0))
        return np.maximum(viol, 0.0)

    def bound_violations(self, x: np.ndarray) -> np.ndarray:
        lo = np.array([v.lower for v in self.variables])
        up = np.array([v.upper for v in self.variables])
        x = np.asarray(x, dtype=float)
        return np.maximum(np.maximum(lo - x, x - up), 0.0)

    def describe(self, limit: int | None = None) -> str:
        """Human-readable row listing for debugging."""
        lines = [f"model {self.name}: {self.stats()}"]
        names = [v.name for v in self.variables]
        for r in self.rows[:limit]:
            terms = " ".join(f"{a:+.6g} {names[j]}" for j, a in sorted(r.coefs.items()))
            lines.append(f"{r.name}: {terms or '0'} {r.sense} {r.rhs:.6g}")
        for v in self.variables[:limit]:
            kind = " bin" if v.is_binary else ""
            lines.append(f"  {v.lower:.6g} <= {v.name} <= {v.upper:.6g}  cost {v.cost:.6g}{kind}")
        return "\n".join(lines)
