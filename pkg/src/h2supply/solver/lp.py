"""LP data container, presolve/postsolve and the ``solve_lp`` front end."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .simplex import (INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, BoundedSimplex,
                      RawResult, SimplexOptions)

__all__ = ["LpArrays", "LpSolution", "Presolved", "presolve", "solve_lp", "solve_lp_arrays",
           "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "ITERATION_LIMIT"]


@dataclass
class LpArrays:
    """``min c x  s.t.  row_lo <= A x <= row_up,  lo <= x <= up``."""

    c: np.ndarray
    A: sp.csr_matrix
    row_lo: np.ndarray
    row_up: np.ndarray
    lo: np.ndarray
    up: np.ndarray
    integer: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float)
        self.A = sp.csr_matrix(self.A, dtype=float)
        self.row_lo = np.asarray(self.row_lo, dtype=float)
        self.row_up = np.asarray(self.row_up, dtype=float)
        self.lo = np.asarray(self.lo, dtype=float)
        self.up = np.asarray(self.up, dtype=float)
        if self.integer is None:
            self.integer = np.zeros(self.A.shape[1], dtype=bool)
        self.integer = np.asarray(self.integer, dtype=bool)
        m, n = self.A.shape
        if not (len(self.c) == len(self.lo) == len(self.up) == len(self.integer) == n):
            raise ValueError("column arrays disagree with the matrix width")
        if not (len(self.row_lo) == len(self.row_up) == m):
            raise ValueError("row arrays disagree with the matrix height")

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


@dataclass
class LpSolution:
    status: str
    objective: float
    x: np.ndarray
    duals: np.ndarray
    reduced_costs: np.ndarray
    iterations: int = 0
    warnings: tuple[str, ...] = ()

    @property
    def is_optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class Presolved:
    status: str
    original: LpArrays
    reduced: LpArrays | None
    cols: np.ndarray
    rows: np.ndarray
    values: np.ndarray
    offset: float
    singletons: list[tuple[int, int, float, float, float]] = field(default_factory=list)
    orig_lo: np.ndarray = None  # type: ignore[assignment]
    orig_up: np.ndarray = None  # type: ignore[assignment]

    def postsolve(self, x_red: np.ndarray, y_red: np.ndarray, tol: float = 1e-7):
        lp = self.original
        x = self.values.copy()
        x[self.cols] = x_red
        y = np.zeros(lp.A.shape[0])
        y[self.rows] = y_red
        AT = lp.A.T.tocsr()
        d = lp.c - AT @ y
        for i, j, a, rl, ru in reversed(self.singletons):
            lo0, up0 = self.orig_lo[j], self.orig_up[j]
            xj, dj = x[j], d[j]
            scale = tol * max(1.0, abs(xj))
            at_lo = xj <= lo0 + scale
            at_up = xj >= up0 - scale
            ok = (abs(dj) <= tol * max(1.0, abs(lp.c[j]))
                  or (at_lo and at_up) or (at_lo and dj > 0) or (at_up and dj < 0))
            if ok:
                continue
            act = a * xj
            binding = ((math.isfinite(rl) and abs(act - rl) <= scale * max(1.0, abs(a)))
                       or (math.isfinite(ru) and abs(act - ru) <= scale * max(1.0, abs(a))))
            if binding:
                yi = dj / a
                y[i] += yi
                d = lp.c - AT @ y
        return x, y, d


def presolve(lp: LpArrays, tol: float = 1e-9) -> Presolved:
    """Drop fixed columns, empty rows, singleton rows and empty columns.

    Singleton rows become bounds on their column; integer columns get their
    bounds rounded inward.
    """
    m, n = lp.A.shape
    csr = lp.A.tocsr()
    csc = lp.A.tocsc()
    lo, up = lp.lo.copy(), lp.up.copy()
    rl, ru = lp.row_lo.copy(), lp.row_up.copy()
    row_on = np.ones(m, dtype=bool)
    col_on = np.ones(n, dtype=bool)
    row_cnt = np.diff(csr.indptr).astype(np.int64)
    # explicit zeros do not count
    for i in np.flatnonzero(row_cnt):
        seg = csr.data[csr.indptr[i]:csr.indptr[i + 1]]
        row_cnt[i] = int(np.count_nonzero(seg))
    values = np.full(n, np.nan)
    offset = 0.0
    singletons: list[tuple[int, int, float, float, float]] = []

    def infeasible() -> Presolved:
        return Presolved("infeasible", lp, None, np.flatnonzero(col_on), np.flatnonzero(row_on),
                         values, offset, singletons, lp.lo.copy(), lp.up.copy())

    def fix_column(j: int, v: float) -> None:
        nonlocal offset
        values[j] = v
        col_on[j] = False
        offset += lp.c[j] * v
        for k in range(csc.indptr[j], csc.indptr[j + 1]):
            i = csc.indices[k]
            a = csc.data[k]
            if a == 0.0 or not row_on[i]:
                continue
            rl[i] -= a * v
            ru[i] -= a * v
            row_cnt[i] -= 1

    changed = True
    while changed:
        changed = False
        with np.errstate(invalid="ignore"):
            narrow = np.isfinite(lo) & np.isfinite(up) & (up - lo <= tol * np.maximum(1.0, np.abs(lo)))
        for j in np.flatnonzero(col_on & narrow):
            if lo[j] > up[j] + tol * max(1.0, abs(lo[j])):
                return infeasible()
            fix_column(int(j), float(lo[j]))
            changed = True

        for i in np.flatnonzero(row_on & (row_cnt <= 1)):
            if row_cnt[i] == 0:
                if rl[i] > tol * max(1.0, abs(rl[i])) or ru[i] < -tol * max(1.0, abs(ru[i])):
                    return infeasible()
                row_on[i] = False
                changed = True
                continue
            start, end = csr.indptr[i], csr.indptr[i + 1]
            cols = csr.indices[start:end]
            vals = csr.data[start:end]
            live = [(c, a) for c, a in zip(cols, vals) if col_on[c] and a != 0.0]
            if len(live) != 1:
                row_cnt[i] = len(live)
                continue
            j, a = int(live[0][0]), float(live[0][1])
            lo_i, up_i = (rl[i] / a, ru[i] / a) if a > 0 else (ru[i] / a, rl[i] / a)
            if lp.integer[j]:
                lo_i = math.ceil(lo_i - 1e-6) if math.isfinite(lo_i) else lo_i
                up_i = math.floor(up_i + 1e-6) if math.isfinite(up_i) else up_i
            singletons.append((int(i), j, a, float(rl[i]), float(ru[i])))
            lo[j] = max(lo[j], lo_i)
            up[j] = min(up[j], up_i)
            if lo[j] > up[j]:
                if lo[j] - up[j] > 1e-7 * max(1.0, abs(lo[j])):
                    return infeasible()
                up[j] = lo[j]
            row_on[i] = False
            changed = True

        col_live = np.zeros(n, dtype=np.int64)
        live_rows = np.flatnonzero(row_on)
        if live_rows.size:
            sub = csr[live_rows]
            sub.eliminate_zeros()
            col_live = np.bincount(sub.indices, minlength=n)
        for j in np.flatnonzero(col_on & (col_live == 0)):
            cj = lp.c[j]
            if cj > 0:
                v = lo[j]
            elif cj < 0:
                v = up[j]
            else:
                v = lo[j] if math.isfinite(lo[j]) else (up[j] if math.isfinite(up[j]) else 0.0)
            if not math.isfinite(v):
                return Presolved("unbounded", lp, None, np.flatnonzero(col_on), np.flatnonzero(row_on),
                                 values, offset, singletons, lp.lo.copy(), lp.up.copy())
            fix_column(int(j), float(v))
            changed = True

    cols = np.flatnonzero(col_on)
    rows = np.flatnonzero(row_on)
    reduced = LpArrays(
        c=lp.c[cols],
        A=csr[rows][:, cols],
        row_lo=rl[rows],
        row_up=ru[rows],
        lo=lo[cols],
        up=up[cols],
        integer=lp.integer[cols],
    )
    return Presolved("reduced", lp, reduced, cols, rows, values, offset, singletons,
                     lp.lo.copy(), lp.up.copy())


def _trivial(lp: LpArrays) -> RawResult | None:
    """Solve an LP without rows column by column."""
    from .simplex import Basis
    m, n = lp.A.shape
    if m:
        return None
    x = np.zeros(n)
    for j in range(n):
        cj = lp.c[j]
        v = lp.lo[j] if cj > 0 else lp.up[j] if cj < 0 else (
            lp.lo[j] if math.isfinite(lp.lo[j]) else lp.up[j] if math.isfinite(lp.up[j]) else 0.0)
        if not math.isfinite(v):
            return RawResult(UNBOUNDED, -math.inf, x, np.zeros(0), lp.c.copy(), 0,
                             Basis(np.zeros(0, dtype=int), np.zeros(n, dtype=np.int8)))
        x[j] = v
    if np.any(lp.lo > lp.up):
        return RawResult(INFEASIBLE, math.nan, x, np.zeros(0), lp.c.copy(), 0,
                         Basis(np.zeros(0, dtype=int), np.zeros(n, dtype=np.int8)))
    return RawResult(OPTIMAL, float(lp.c @ x), x, np.zeros(0), lp.c.copy(), 0,
                     Basis(np.zeros(0, dtype=int), np.zeros(n, dtype=np.int8)))


def _raw_solve(lp: LpArrays, options: SimplexOptions) -> RawResult:
    raw = _trivial(lp)
    if raw is not None:
        return raw
    engine = BoundedSimplex(lp.c, lp.A, lp.row_lo, lp.row_up, lp.lo, lp.up, options)
    return engine.solve()


def solve_lp_arrays(lp: LpArrays, options: SimplexOptions | None = None) -> LpSolution:
    options = options or SimplexOptions()
    n = lp.A.shape[1]
    m = lp.A.shape[0]
    if options.presolve:
        pre = presolve(lp)
        if pre.status != "reduced":
            return LpSolution(pre.status, math.nan, np.full(n, np.nan), np.zeros(m), np.zeros(n))
        raw = _raw_solve(pre.reduced, options)
        x, y, d = pre.postsolve(raw.x, raw.y, options.opt_tol)
    else:
        raw = _raw_solve(lp, options)
        x, y, d = raw.x, raw.y, raw.d
    objective = float(lp.c @ x) if raw.status in (OPTIMAL, ITERATION_LIMIT) else (
        -math.inf if raw.status == UNBOUNDED else math.nan)
    return LpSolution(raw.status, objective, x, y, d, raw.iterations)


def solve_lp(model, options: SimplexOptions | None = None) -> LpSolution:
    """Solve the LP relaxation of ``model`` (a ModelInstance or LpArrays)."""
    lp = model if isinstance(model, LpArrays) else model.to_arrays()
    return solve_lp_arrays(lp, options)
