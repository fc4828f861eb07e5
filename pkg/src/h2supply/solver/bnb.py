"""Branch-and-bound for models whose integer columns are all binaries."""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .lp import LpArrays, LpSolution, presolve, _trivial
from .simplex import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, Basis, BoundedSimplex, SimplexOptions

NODE_LIMIT = "node_limit"

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MipOptions:
    int_tol: float = 1e-6
    gap_tol: float = 1e-6
    node_limit: int = 100_000
    lp: SimplexOptions = field(default_factory=SimplexOptions)


@dataclass
class MipSolution:
    status: str
    incumbent: LpSolution | None
    objective: float
    bound: float
    gap: float
    nodes: int
    warnings: tuple[str, ...] = ()

    @property
    def is_optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass(order=True)
class _Node:
    key: tuple
    lo: np.ndarray = field(compare=False)
    up: np.ndarray = field(compare=False)
    basis: Basis | None = field(compare=False)
    bound: float = field(compare=False)
    depth: int = field(compare=False, default=0)


def _most_fractional(x: np.ndarray, ints: np.ndarray, tol: float) -> int | None:
    if ints.size == 0:
        return None
    vals = x[ints]
    frac = np.abs(vals - np.round(vals))
    best = frac.max()
    if best <= tol:
        return None
    # argmax returns the first (lowest index) among ties
    return int(ints[np.argmax(frac >= best - 1e-12)])


def gap_of(incumbent: float, bound: float) -> float:
    if not math.isfinite(incumbent):
        return math.inf
    return max(0.0, (incumbent - bound) / max(1.0, abs(incumbent)))


def solve_mip(model, options: MipOptions | None = None) -> MipSolution:
    """Depth-first dive to a first incumbent, then best-bound search.

    Branches on the most fractional binary (lowest index on ties).  Each child
    is warm-started from its parent's optimal basis on the presolved matrix.
    """
    options = options or MipOptions()
    lp: LpArrays = model if isinstance(model, LpArrays) else model.to_arrays()
    m, n = lp.A.shape
    pre = presolve(lp)
    if pre.status != "reduced":
        status = INFEASIBLE if pre.status == "infeasible" else UNBOUNDED
        return MipSolution(status, None, math.nan, math.nan, math.inf, 0)
    red = pre.reduced
    ints = np.flatnonzero(red.integer)

    trivial = _trivial(red) is not None
    engine = None if trivial else BoundedSimplex(red.c, red.A, red.row_lo, red.row_up, red.lo, red.up, options.lp)

    def relax(lo, up, basis):
        if trivial:
            return _trivial(LpArrays(red.c, red.A, red.row_lo, red.row_up, lo, up, red.integer))
        return engine.solve(lo, up, basis)

    seq = 0
    root = _Node((0,), red.lo.copy(), red.up.copy(), None, -math.inf)
    stack: list[_Node] = [root]      # dive phase
    heap: list[_Node] = []           # best-bound phase
    inc_obj = math.inf
    inc_raw = None
    nodes = 0
    warnings: list[str] = []
    iterations = 0
    lost_bounds: list[float] = []

    def cutoff() -> float:
        return inc_obj - options.gap_tol * max(1.0, abs(inc_obj)) if math.isfinite(inc_obj) else math.inf

    while stack or heap:
        if nodes >= options.node_limit:
            break
        node = stack.pop() if stack else heapq.heappop(heap)
        if node.bound >= cutoff():
            continue
        nodes += 1
        raw = relax(node.lo, node.up, node.basis)
        iterations += raw.iterations
        log.debug("node %d depth %d: %s obj %.6f after %d iterations", nodes, node.depth, raw.status,
                  raw.objective + pre.offset, raw.iterations)
        if raw.status == UNBOUNDED:
            if nodes == 1:
                return MipSolution(UNBOUNDED, None, -math.inf, -math.inf, math.inf, nodes)
            warnings.append(f"node {nodes}: unbounded relaxation ignored")
            continue
        if raw.status == INFEASIBLE:
            continue
        if raw.status != OPTIMAL:
            warnings.append(f"node {nodes}: relaxation stopped with {raw.status}")
            lost_bounds.append(node.bound)
            continue
        obj = raw.objective + pre.offset
        if obj >= cutoff():
            continue
        j = _most_fractional(raw.x, ints, options.int_tol)
        if j is None:
            inc_obj, inc_raw = obj, raw
            if stack:
                # leave the dive: everything still open moves to the bound-ordered heap
                for nd in stack:
                    heapq.heappush(heap, _Node((nd.bound, nd.key[-1]), nd.lo, nd.up, nd.basis, nd.bound, nd.depth))
                stack = []
            continue
        v = raw.x[j]
        down_up = node.up.copy()
        down_up[j] = math.floor(v)
        up_lo = node.lo.copy()
        up_lo[j] = math.ceil(v)
        children = [(node.lo, down_up), (up_lo, node.up)]
        if v - math.floor(v) >= 0.5:
            children.reverse()          # nearest side explored first
        made = []
        for lo_c, up_c in children:
            seq += 1
            made.append(_Node((obj, seq), lo_c, up_c, raw.basis, obj, node.depth + 1))
        if not math.isfinite(inc_obj):
            stack.extend(reversed(made))
        else:
            for nd in made:
                heapq.heappush(heap, nd)

    open_bounds = [nd.bound for nd in stack + heap] + lost_bounds
    if inc_raw is None:
        if open_bounds or nodes >= options.node_limit:
            return MipSolution(NODE_LIMIT, None, math.nan, min(open_bounds, default=-math.inf), math.inf,
                               nodes, tuple(warnings))
        return MipSolution(INFEASIBLE, None, math.nan, math.nan, math.inf, nodes, tuple(warnings))
    bound = min([inc_obj] + open_bounds)
    gap = gap_of(inc_obj, bound)
    status = OPTIMAL if gap <= options.gap_tol or not open_bounds else NODE_LIMIT
    x, y, d = pre.postsolve(inc_raw.x, inc_raw.y, options.lp.opt_tol)
    inc = LpSolution(OPTIMAL, float(lp.c @ x), x, y, d, iterations, tuple(warnings))
    return MipSolution(status, inc, inc.objective, bound, gap, nodes, tuple(warnings))
