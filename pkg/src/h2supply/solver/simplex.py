"""Bounded-variable primal revised simplex.

The LP is held in the logical-variable form::

    minimize    c^T x
    subject to  A x - s = 0,   lo <= x <= up,   row_lo <= s <= row_up

so every row owns one slack column and the all-slack basis is always
available.  Phase 1 minimizes the sum of bound infeasibilities of the basic
variables, which lets a solve start from any basis (branch-and-bound hands
the parent basis to its children).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

log = logging.getLogger(__name__)

BASIC, AT_LOWER, AT_UPPER, AT_ZERO = 0, 1, 2, 3

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class SimplexOptions:
    feas_tol: float = 1e-7
    opt_tol: float = 1e-7
    max_iter: int = 500_000
    refactor_every: int = 100
    harris_tol: float = 1e-9
    pivot_tol: float = 1e-9
    bland_after: int = 1000
    scale: bool = True
    presolve: bool = True
    perturb: float = 1e-6
    dual: bool = True


@dataclass
class Basis:
    head: np.ndarray
    status: np.ndarray

    def copy(self) -> "Basis":
        return Basis(self.head.copy(), self.status.copy())


@dataclass
class RawResult:
    status: str
    objective: float
    x: np.ndarray          # structural values, unscaled
    y: np.ndarray          # row duals, unscaled
    d: np.ndarray          # structural reduced costs, unscaled
    iterations: int
    basis: Basis


class _Factor:
    """LU of the basis plus a product-form eta file."""

    def __init__(self, K: sp.csc_matrix, head: np.ndarray):
        B = K[:, head].tocsc()
        self.lu = splu(B, permc_spec="COLAMD")
        self.etas: list[tuple[int, np.ndarray, np.ndarray, float]] = []

    def ftran(self, a: np.ndarray) -> np.ndarray:
        v = self.lu.solve(a)
        for r, idx, vals, piv in self.etas:
            t = v[r]
            if t != 0.0:
                t /= piv
                v[idx] -= vals * t
                v[r] = t
        return v

    def btran(self, c: np.ndarray) -> np.ndarray:
        v = np.array(c, dtype=float)
        for r, idx, vals, piv in reversed(self.etas):
            v[r] = (v[r] - vals @ v[idx]) / piv
        return self.lu.solve(v, trans="T")

    def update(self, r: int, w: np.ndarray) -> None:
        idx = np.flatnonzero(w)
        idx = idx[idx != r]
        self.etas.append((r, idx, w[idx].copy(), float(w[r])))


def _equilibrate(A: sp.csr_matrix, passes: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Geometric scaling passes followed by a max-norm equilibration."""
    m, n = A.shape
    R = np.ones(m)
    C = np.ones(n)
    if A.nnz == 0:
        return R, C
    absA = abs(A).tocsr()
    for _ in range(passes):
        S = sp.diags(R) @ absA @ sp.diags(C)
        S = S.tocsr()
        rmax = S.max(axis=1).toarray().ravel()
        rmin = _nz_min(S, axis=1)
        ok = rmax > 0
        R[ok] /= np.sqrt(rmax[ok] * rmin[ok])
        S = (sp.diags(R) @ absA @ sp.diags(C)).tocsc()
        cmax = S.max(axis=0).toarray().ravel()
        cmin = _nz_min(S, axis=0)
        ok = cmax > 0
        C[ok] /= np.sqrt(cmax[ok] * cmin[ok])
    S = (sp.diags(R) @ absA @ sp.diags(C)).tocsr()
    rmax = S.max(axis=1).toarray().ravel()
    R[rmax > 0] /= rmax[rmax > 0]
    S = (sp.diags(R) @ absA @ sp.diags(C)).tocsc()
    cmax = S.max(axis=0).toarray().ravel()
    C[cmax > 0] /= cmax[cmax > 0]
    return R, C


def _nz_min(S: sp.spmatrix, axis: int) -> np.ndarray:
    S = S.tocsr() if axis == 1 else S.tocsc()
    S.eliminate_zeros()
    out = np.ones(S.shape[0] if axis == 1 else S.shape[1])
    starts = S.indptr[:-1]
    nonempty = np.diff(S.indptr) > 0
    if S.nnz:
        out[nonempty] = np.minimum.reduceat(S.data, starts[nonempty])
    return out


def _reseat(status: np.ndarray, L: np.ndarray, U: np.ndarray) -> None:
    """Move nonbasic statuses onto bounds that exist."""
    nb = status != BASIC
    fin_l, fin_u = np.isfinite(L), np.isfinite(U)
    bad_l = nb & (status == AT_LOWER) & ~fin_l
    status[bad_l] = np.where(fin_u[bad_l], AT_UPPER, AT_ZERO)
    bad_u = nb & (status == AT_UPPER) & ~fin_u
    status[bad_u] = np.where(fin_l[bad_u], AT_LOWER, AT_ZERO)
    zero_ok = nb & (status == AT_ZERO) & (fin_l | fin_u)
    status[zero_ok] = np.where(fin_l[zero_ok], AT_LOWER, AT_UPPER)


def _nonbasic_values(status: np.ndarray, L: np.ndarray, U: np.ndarray, x: np.ndarray | None = None) -> np.ndarray:
    x = np.zeros(len(status)) if x is None else x
    at_l, at_u = status == AT_LOWER, status == AT_UPPER
    x[at_l] = L[at_l]
    x[at_u] = U[at_u]
    x[status == AT_ZERO] = 0.0
    return x


class _State:
    """Working data of one solve, shared by the primal and dual loops."""

    def __init__(self, engine: "BoundedSimplex", L: np.ndarray, U: np.ndarray, basis: Basis):
        self.engine = engine
        self.L, self.U = L, U
        self.fixed = L == U
        self.head, self.status = basis.head, basis.status
        _reseat(self.status, L, U)
        self.x = _nonbasic_values(self.status, L, U)
        self.it = 0
        try:
            self.F = _Factor(engine.K, self.head)
        except RuntimeError:
            self.reset_to_slacks()
        self.recompute_basics()

    def reset_to_slacks(self) -> None:
        basis = self.engine.initial_basis()
        self.head, self.status = basis.head, basis.status
        _reseat(self.status, self.L, self.U)
        self.x = _nonbasic_values(self.status, self.L, self.U)
        self.F = _Factor(self.engine.K, self.head)

    def recompute_basics(self) -> None:
        self.x[self.head] = self.engine._basic_values(self.F, self.x, self.head)

    def refactor(self) -> bool:
        """Fresh LU; returns False when the basis had to be abandoned."""
        try:
            self.F = _Factor(self.engine.K, self.head)
            ok = True
        except RuntimeError:
            log.debug("singular basis at iteration %d; restarting from slacks", self.it)
            self.reset_to_slacks()
            ok = False
        self.recompute_basics()
        return ok

    def reduced_costs(self) -> np.ndarray:
        e = self.engine
        d = e.cost - e.KT @ self.F.btran(e.cost[self.head])
        d[self.head] = 0.0
        return d

    def movable(self) -> tuple[np.ndarray, np.ndarray]:
        s = self.status
        can_inc = ((s == AT_LOWER) | (s == AT_ZERO)) & ~self.fixed
        can_dec = ((s == AT_UPPER) | (s == AT_ZERO)) & ~self.fixed
        return can_inc, can_dec

    def basis(self) -> Basis:
        return Basis(self.head.copy(), self.status.copy())


class BoundedSimplex:
    """Reusable solver for one constraint matrix; bounds may change per solve.

    A solve starting from a dual-feasible basis (the slack basis when costs
    are non-negative, or a parent basis after a bound change) runs the dual
    simplex first; the primal loop then confirms optimality or finishes.
    """

    def __init__(self, c, A, row_lo, row_up, lo, up, options: SimplexOptions | None = None):
        self.options = options or SimplexOptions()
        A = sp.csr_matrix(A, dtype=float)
        self.m, self.n = A.shape
        c = np.asarray(c, dtype=float)
        if self.options.scale:
            R, C = _equilibrate(A)
        else:
            R, C = np.ones(self.m), np.ones(self.n)
        self.R, self.C = R, C
        As = (sp.diags(R) @ A @ sp.diags(C)).tocsc()
        cs = c * C
        cmax = np.abs(cs).max() if cs.size else 0.0
        self.sigma = 1.0 / cmax if cmax > 0 else 1.0
        self.c_orig = c
        self.K = sp.hstack([As, -sp.identity(self.m, format="csc")], format="csc")
        self.KT = self.K.T.tocsr()
        self.cost = np.concatenate([cs * self.sigma, np.zeros(self.m)])
        self.row_lo = np.asarray(row_lo, dtype=float) * R
        self.row_up = np.asarray(row_up, dtype=float) * R
        self.lo = np.asarray(lo, dtype=float) / C
        self.up = np.asarray(up, dtype=float) / C

    # -- helpers ---------------------------------------------------------
    def _column(self, j: int) -> np.ndarray:
        a = np.zeros(self.m)
        start, end = self.K.indptr[j], self.K.indptr[j + 1]
        a[self.K.indices[start:end]] = self.K.data[start:end]
        return a

    def _basic_values(self, F: _Factor, x: np.ndarray, head: np.ndarray) -> np.ndarray:
        xn = x.copy()
        xn[head] = 0.0
        return F.ftran(-(self.K @ xn))

    def initial_basis(self) -> Basis:
        N = self.n + self.m
        status = np.empty(N, dtype=np.int8)
        lo = np.concatenate([self.lo, self.row_lo])
        up = np.concatenate([self.up, self.row_up])
        status[:] = np.where(np.isfinite(lo), AT_LOWER, np.where(np.isfinite(up), AT_UPPER, AT_ZERO))
        head = np.arange(self.n, N)
        status[head] = BASIC
        return Basis(head, status)

    # -- main entry --------------------------------------------------------
    def solve(self, lo: np.ndarray | None = None, up: np.ndarray | None = None,
              basis: Basis | None = None) -> RawResult:
        """Solve with optional replacement column bounds, starting from ``basis``."""
        opt = self.options
        m, n = self.m, self.n
        lo_s = self.lo if lo is None else np.asarray(lo, dtype=float) / self.C
        up_s = self.up if up is None else np.asarray(up, dtype=float) / self.C
        L = np.concatenate([lo_s, self.row_lo])
        U = np.concatenate([up_s, self.row_up])
        if np.any(L > U + opt.feas_tol):
            return self._result(INFEASIBLE, np.zeros(n + m), np.zeros(m), 0, self.initial_basis())

        st = _State(self, L, U, (basis or self.initial_basis()).copy())
        perturb = True
        dual_ok = opt.dual and self._make_dual_feasible(st)
        log.debug("start: dual feasible %s", dual_ok)
        if dual_ok:
            status = self._dual(st)
            if status in (INFEASIBLE, ITERATION_LIMIT):
                return self._result(status, st.x, self._duals(st), st.it, st.basis())
            perturb = status != OPTIMAL
        return self._primal(st, perturb and opt.perturb > 0)

    def _make_dual_feasible(self, st: _State) -> bool:
        """Flip boxed nonbasics whose reduced cost has the wrong sign.

        Returns False when some unboxed nonbasic is dual infeasible.
        """
        otol = self.options.opt_tol
        d = st.reduced_costs()
        s = st.status
        nb = (s != BASIC) & ~st.fixed
        wrong_lo = nb & (s == AT_LOWER) & (d < -otol)
        wrong_up = nb & (s == AT_UPPER) & (d > otol)
        wrong_free = nb & (s == AT_ZERO) & (np.abs(d) > otol)
        if wrong_free.any():
            return False
        boxed = np.isfinite(st.L) & np.isfinite(st.U)
        if np.any((wrong_lo | wrong_up) & ~boxed):
            return False
        if wrong_lo.any() or wrong_up.any():
            s[wrong_lo] = AT_UPPER
            s[wrong_up] = AT_LOWER
            _nonbasic_values(s, st.L, st.U, st.x)
            st.recompute_basics()
        return True

    # -- dual simplex ----------------------------------------------------
    def _dual(self, st: _State) -> str:
        """Dual simplex with dual Devex row pricing; basis must be dual feasible."""
        opt = self.options
        ftol, otol, ptol = opt.feas_tol, opt.opt_tol, opt.pivot_tol
        m = self.m
        d = st.reduced_costs()
        row_w = np.ones(m)
        unit = np.zeros(m)
        while True:
            if st.it >= opt.max_iter:
                return ITERATION_LIMIT
            head = st.head
            xB = st.x[head]
            lB, uB = st.L[head], st.U[head]
            below = np.maximum(lB - xB, 0.0)
            above = np.maximum(xB - uB, 0.0)
            infeas = np.where(below > ftol, below, np.where(above > ftol, above, 0.0))
            if st.it % 1000 == 0 and log.isEnabledFor(logging.DEBUG):
                log.debug("dual it %d infeas %.3e obj %.6e etas %d", st.it, float(infeas.sum()),
                          float(self.cost @ st.x), len(st.F.etas))
            if not infeas.any():
                if st.F.etas:
                    st.refactor()
                    d = st.reduced_costs()
                    continue
                return OPTIMAL
            r = int(np.argmax(infeas * infeas / row_w))
            to_lower = below[r] > ftol
            bound = lB[r] if to_lower else uB[r]

            unit[r] = 1.0
            rho = st.F.btran(unit)
            unit[r] = 0.0
            row = self.KT @ rho
            sgn = 1.0 if to_lower else -1.0
            s = st.status
            nb = (s != BASIC) & ~st.fixed
            sr = sgn * row
            elig = nb & (((s == AT_LOWER) & (sr < -ptol)) | ((s == AT_UPPER) & (sr > ptol))
                         | ((s == AT_ZERO) & (np.abs(row) > ptol)))
            idx = np.flatnonzero(elig)
            if idx.size == 0:
                if st.F.etas:
                    st.refactor()
                    d = st.reduced_costs()
                    continue
                return INFEASIBLE
            a = np.abs(row[idx])
            dj = np.abs(d[idx])
            tmax = ((dj + otol) / a).min()
            ok = idx[dj / a <= tmax]
            q = int(ok[np.argmax(np.abs(row[ok]))])
            alpha = float(row[q])

            w = st.F.ftran(self._column(q))
            if abs(w[r] - alpha) > 1e-7 * max(1.0, abs(alpha)):
                log.debug("dual pivot mismatch %.3e vs %.3e; refactoring", w[r], alpha)
                if st.F.etas:
                    st.refactor()
                    d = st.reduced_costs()
                    st.it += 1
                    continue
            step = (st.x[head[r]] - bound) / alpha
            st.x[head] -= w * step
            st.x[q] += step
            leaving = int(head[r])
            st.x[leaving] = bound
            s[leaving] = AT_LOWER if to_lower else AT_UPPER
            theta_d = d[q] / alpha
            d -= theta_d * row
            d[q] = 0.0
            # dual Devex row weights
            wr = row_w[r]
            np.maximum(row_w, (w / alpha) ** 2 * wr, out=row_w)
            row_w[r] = max(wr / (alpha * alpha), 1.0)
            if row_w.max() > 1e8:
                row_w[:] = 1.0
            head[r] = q
            s[q] = BASIC
            st.it += 1
            if len(st.F.etas) + 1 >= opt.refactor_every:
                if not st.refactor():
                    return "restart"
                d = st.reduced_costs()
            else:
                st.F.update(r, w)

    # -- primal simplex --------------------------------------------------
    def _primal(self, st: _State, perturb: bool) -> RawResult:
        """Primal simplex with Devex pricing; phase 1 minimizes bound infeasibility.

        In phase 2 the reduced costs are updated from the pivot row and
        recomputed at every refactorization.
        """
        opt = self.options
        m, n = self.m, self.n
        N = n + m
        L_true, U_true = st.L, st.U
        if perturb:
            st.L, st.U = self._perturb(st.L, st.U, st.fixed)
            _nonbasic_values(st.status, st.L, st.U, st.x)
            st.recompute_basics()
        perturbed = perturb

        ftol, otol = opt.feas_tol, opt.opt_tol
        can_inc, can_dec = st.movable()
        fixed = st.fixed
        weights = np.ones(N)
        d = None            # phase-2 reduced costs, kept current between refactorizations
        degenerate = 0
        bland = False
        unit = np.zeros(m)
        while True:
            L, U, x, head, status, F = st.L, st.U, st.x, st.head, st.status, st.F
            if st.it >= opt.max_iter:
                return self._result(ITERATION_LIMIT, x, self._duals(st), st.it, st.basis())
            xB = x[head]
            lB, uB = L[head], U[head]
            below = xB < lB - ftol
            above = xB > uB + ftol
            phase1 = bool(below.any() or above.any())
            if st.it % 1000 == 0 and log.isEnabledFor(logging.DEBUG):
                infeas = float(np.sum(np.maximum(lB - xB, 0)) + np.sum(np.maximum(xB - uB, 0)))
                log.debug("primal it %d phase %d infeas %.3e obj %.6e degenerate %d bland %s etas %d",
                          st.it, 1 if phase1 else 2, infeas, float(self.cost @ x), degenerate, bland,
                          len(F.etas))
            if phase1:
                d = None
                y = F.btran(np.where(below, -1.0, np.where(above, 1.0, 0.0)))
                dd = -(self.KT @ y)
            else:
                if d is None:
                    d = self.cost - self.KT @ F.btran(self.cost[head])
                dd = d
            dd[head] = 0.0

            cand = (can_inc & (dd < -otol)) | (can_dec & (dd > otol))
            if not cand.any():
                if F.etas:
                    # confirm on a fresh factorization
                    if not st.refactor():
                        can_inc, can_dec = st.movable()
                        weights[:] = 1.0
                    d = None
                    continue
                if phase1:
                    return self._result(INFEASIBLE, x, y, st.it, st.basis())
                if perturbed:
                    # drop the perturbation and clean up from the current basis
                    perturbed = False
                    st.L, st.U = L_true, U_true
                    _nonbasic_values(status, st.L, st.U, x)
                    st.recompute_basics()
                    d = None
                    degenerate = 0
                    bland = False
                    continue
                return self._result(OPTIMAL, x, self._duals(st), st.it, st.basis())

            if bland:
                q = int(np.flatnonzero(cand)[0])
            else:
                q = int(np.argmax(np.where(cand, dd * dd / weights, -1.0)))
            dq = float(dd[q])
            direction = 1.0 if dq < 0 else -1.0

            w = F.ftran(self._column(q))
            rate = -direction * w

            if phase1:
                lr = np.where(below, -np.inf, np.where(above, uB, lB))
                ur = np.where(below, lB, np.where(above, np.inf, uB))
            else:
                lr, ur = lB, uB
            theta, r, leave_at = self._ratio_test(xB, lr, ur, rate, bland, head)
            flip = U[q] - L[q]
            if flip <= theta and flip < np.inf:
                # bound flip, basis unchanged
                x[q] = U[q] if direction > 0 else L[q]
                status[q] = AT_UPPER if direction > 0 else AT_LOWER
                can_inc[q] = status[q] == AT_LOWER
                can_dec[q] = status[q] == AT_UPPER
                x[head] += flip * rate
                st.it += 1
                degenerate = 0
                bland = False
                continue
            if r < 0:
                if phase1:
                    # cannot happen with a consistent phase-1 cost; refactor and retry
                    st.refactor()
                    can_inc, can_dec = st.movable()
                    st.it += 1
                    continue
                return self._result(UNBOUNDED, x, self._duals(st), st.it, st.basis())

            alpha = float(w[r])
            unit[r] = 1.0
            rho = F.btran(unit)
            unit[r] = 0.0
            row = self.KT @ rho
            leaving = int(head[r])

            # Devex reference weights
            wq = weights[q]
            ratio = row / alpha
            np.maximum(weights, ratio * ratio * wq, out=weights)
            weights[leaving] = max(wq / (alpha * alpha), 1.0)
            if weights.max() > 1e8:
                weights[:] = 1.0
            if d is not None:
                d -= (dq / alpha) * row
                d[q] = 0.0

            theta = max(theta, 0.0)
            x[head] += theta * rate
            x[q] += direction * theta
            x[leaving] = leave_at
            status[leaving] = AT_LOWER if leave_at == L[leaving] else AT_UPPER
            can_inc[leaving] = status[leaving] == AT_LOWER and not fixed[leaving]
            can_dec[leaving] = status[leaving] == AT_UPPER and not fixed[leaving]
            head[r] = q
            status[q] = BASIC
            can_inc[q] = can_dec[q] = False
            st.it += 1

            if theta * abs(dq) <= 1e-12:
                degenerate += 1
                if degenerate >= opt.bland_after and not bland:
                    log.debug("switching to Bland's rule after %d degenerate pivots", degenerate)
                    bland = True
            else:
                degenerate = 0
                bland = False

            if len(F.etas) + 1 >= opt.refactor_every:
                if not st.refactor():
                    can_inc, can_dec = st.movable()
                    weights[:] = 1.0
                d = None
            else:
                F.update(r, w)

    def _perturb(self, L: np.ndarray, U: np.ndarray, fixed: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Widen every non-fixed finite bound by a small random amount against degeneracy."""
        rng = np.random.default_rng(self.m * 1_000_003 + self.n)
        eps = self.options.perturb * (1.0 + rng.random(len(L)))
        with np.errstate(invalid="ignore"):
            Lp = np.where(fixed | ~np.isfinite(L), L, L - eps * (1.0 + np.abs(L)))
            Up = np.where(fixed | ~np.isfinite(U), U, U + eps * (1.0 + np.abs(U)))
        return Lp, Up

    def _ratio_test(self, xB, lr, ur, rate, bland, head):
        """Return (theta, leaving row, bound value hit); row -1 when unblocked."""
        opt = self.options
        ptol = opt.pivot_tol
        nz = np.flatnonzero(np.abs(rate) > ptol)
        if nz.size == 0:
            return np.inf, -1, 0.0
        rt = rate[nz]
        x = xB[nz]
        lim = np.where(rt < 0, lr[nz], ur[nz])
        with np.errstate(invalid="ignore"):
            ratio = (lim - x) / rt
        finite = np.isfinite(ratio)
        if not finite.any():
            return np.inf, -1, 0.0
        if bland:
            tmin = max(ratio[finite].min(), 0.0)
            ties = np.flatnonzero(finite & (ratio <= tmin + 1e-12))
            big = np.abs(rt[ties])
            ties = ties[big >= 1e-3 * big.max()]
            k = ties[np.argmin(head[nz[ties]])]
        else:
            with np.errstate(invalid="ignore"):
                relaxed = (lim - x + np.sign(rt) * opt.harris_tol) / rt
            tmax = relaxed[finite].min()
            elig = np.flatnonzero(finite & (ratio <= tmax))
            k = elig[np.argmax(np.abs(rt[elig]))]
        r = int(nz[k])
        return float(ratio[k]), r, float(lim[k])

    def _duals(self, st: _State) -> np.ndarray:
        return st.F.btran(self.cost[st.head])

    def _result(self, status: str, x: np.ndarray, y: np.ndarray, it: int, basis: Basis) -> RawResult:
        n = self.n
        xs = x[:n] * self.C
        d_scaled = self.cost[:n] - self.KT[:n] @ y if y.size else np.zeros(n)
        y_orig = self.R * y / self.sigma
        d_orig = d_scaled / (self.sigma * self.C)
        # round-off crumbs on the wrong side of a one-sided row would read as dual infeasibility
        noise = 1e-14 * max(1.0, float(np.abs(self.c_orig).max(initial=0.0)))
        y_orig[np.abs(y_orig) < noise] = 0.0
        d_orig[np.abs(d_orig) < noise] = 0.0
        obj = float(self.c_orig @ xs)
        return RawResult(status, obj, xs, y_orig, d_orig, it, basis)
