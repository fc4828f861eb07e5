"""Independent reference computations used to freeze expected values.

Nothing here imports the package's solver or formulation code paths that the
tests check; each oracle recomputes its answer from first principles or
through a third-party solver.
"""

import itertools

import mpmath
import numpy as np
from scipy.optimize import linprog

# --- rates (t H2 basis) restated by hand from the catalog tables -------------
SMR_NG, SMR_ELEC, SMR_CO2 = 123.0, 0.96, 9.17
NGCC_FUEL, NGCC_CO2 = 7.15, 0.038
GRID_CO2 = 0.376
AC_DC = 0.95


def crf_oracle(r, years, digits=40):
    with mpmath.workdps(digits):
        r = mpmath.mpf(r)
        g = (1 + r) ** years
        return r * g / (g - 1)


def pv_coeff_oracle(ghi, temp, eta, gamma=-0.0037, noct=45.0, t_ref=25.0):
    cell = temp + ghi * (noct - 20.0) / 800.0
    return max(0.0, eta * (1.0 + gamma * (cell - t_ref)) * ghi / 1000.0)


def smr_ngcc_closed_form(demand_t):
    """SMR fed by NGCC at constant demand: capacities and annual fuel/emissions."""
    elec = demand_t * SMR_ELEC                    # MWh/yr on the AC bus
    return {
        "smr_tpd": demand_t / 365.0,
        "ngcc_mw": elec / 8760.0,
        "ng_mmbtu": demand_t * SMR_NG + elec * NGCC_FUEL,
        "co2_t": demand_t * SMR_CO2 + elec * NGCC_CO2,
    }


# --- LP vertex enumeration ----------------------------------------------------

def lp_by_vertices(c, A, row_lo, row_up, lo, up, tol=1e-9):
    """Minimum of c.x over a bounded polyhedron by trying every vertex.

    Constraints are stacked as G x <= h (equalities become two rows).  A
    vertex is the solution of n linearly independent tight constraints that
    satisfies all the others.  Returns None when no vertex exists.
    """
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    G, h, eq = [], [], []
    for i in range(m):
        if row_lo[i] == row_up[i]:
            eq.append(i)
        if np.isfinite(row_up[i]):
            G.append(A[i]); h.append(row_up[i])
        if np.isfinite(row_lo[i]):
            G.append(-A[i]); h.append(-row_lo[i])
    for j in range(n):
        e = np.zeros(n); e[j] = 1.0
        G.append(e); h.append(up[j])
        G.append(-e); h.append(-lo[j])
    G, h = np.array(G), np.array(h)
    best = None
    combos = np.array(list(itertools.combinations(range(len(G)), n)), dtype=int)
    for chunk in np.array_split(combos, max(1, len(combos) // 20000)):
        M = G[chunk]                                   # (k, n, n)
        ok = np.abs(np.linalg.det(M)) > 1e-10
        if not ok.any():
            continue
        X = np.linalg.solve(M[ok], h[chunk[ok]][..., None])[..., 0]
        feas = np.all(X @ G.T <= h + tol * (1 + np.abs(h)), axis=1)
        if feas.any():
            val = float((X[feas] @ c).min())
            best = val if best is None else min(best, val)
    return best


def random_bounded_lp(seed, m_max=8, n_max=6):
    """Feasible, boxed LP small enough for vertex enumeration."""
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, m_max + 1))
    n = int(rng.integers(1, n_max + 1))
    A = np.round(rng.normal(size=(m, n)) * (rng.random((m, n)) < 0.7), 3)
    lo = -np.round(rng.random(n) * 4, 3)
    up = np.round(rng.random(n) * 4, 3) + 0.5
    x0 = lo + rng.random(n) * (up - lo)
    act = A @ x0
    kind = rng.integers(0, 3, size=m)              # 0: <=, 1: =, 2: >=
    slack = np.round(rng.random(m) * 2, 3)
    row_lo = np.where(kind == 0, -np.inf, np.where(kind == 1, act, act - slack))
    row_up = np.where(kind == 0, act + slack, np.where(kind == 1, act, np.inf))
    c = np.round(rng.normal(size=n), 3)
    return c, A, row_lo, row_up, lo, up


def highs_lp(c, A, row_lo, row_up, lo, up):
    """Reference LP optimum through scipy's HiGHS interface."""
    A = np.asarray(A.todense() if hasattr(A, "todense") else A, dtype=float)
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for i in range(A.shape[0]):
        if row_lo[i] == row_up[i]:
            A_eq.append(A[i]); b_eq.append(row_lo[i])
            continue
        if np.isfinite(row_up[i]):
            A_ub.append(A[i]); b_ub.append(row_up[i])
        if np.isfinite(row_lo[i]):
            A_ub.append(-A[i]); b_ub.append(-row_lo[i])
    res = linprog(c, A_ub=np.array(A_ub) if A_ub else None, b_ub=b_ub or None,
                  A_eq=np.array(A_eq) if A_eq else None, b_eq=b_eq or None,
                  bounds=list(zip(lo, up)), method="highs")
    return res


# --- piecewise selector enumeration --------------------------------------------

def selector_patterns(K):
    """Every 0/1 vector over breakpoints 0..K with at most two ones, adjacent if two."""
    out = []
    for k in range(K + 1):
        v = [0] * (K + 1); v[k] = 1
        out.append(tuple(v))
    for k in range(K):
        v = [0] * (K + 1); v[k] = v[k + 1] = 1
        out.append(tuple(v))
    return out


def enumerate_mip(lp, groups):
    """Best objective over all feasible selector patterns.

    ``groups`` lists, per reformer, the column indices of its selectors
    y_0..y_K.  Each pattern fixes the binaries and the remaining LP is solved
    with HiGHS.  Returns (objective, pattern) or (None, None).
    """
    best, arg = None, None
    per_group = [selector_patterns(len(g) - 1) for g in groups]
    for combo in itertools.product(*per_group):
        lo, up = lp.lo.copy(), lp.up.copy()
        for cols, pattern in zip(groups, combo):
            for j, v in zip(cols, pattern):
                lo[j] = up[j] = v
        if np.any(lo > up + 1e-12):
            continue
        res = highs_lp(lp.c, lp.A, lp.row_lo, lp.row_up, lo, up)
        if res.status == 0 and (best is None or res.fun < best - 1e-12):
            best, arg = float(res.fun), combo
    return best, arg


# --- model census ------------------------------------------------------------------

def census(T, n_scen, breakpoints, n_electrolyzers=2, with_segments=True):
    """Closed-form variable and row counts of the full superstructure."""
    n_ref = len(breakpoints)
    first = 4 + n_electrolyzers + n_ref
    seg_vars = sum(2 * K + 1 for K in breakpoints) if with_segments else 0
    seg_rows = sum(4 + K + (K + 1) * K // 2 - K for K in breakpoints) if with_segments else 0
    per_hour_vars = 3 + 1 + n_electrolyzers + n_ref + 4 + 1
    per_hour_rows = 5 + 2 + 2 * n_electrolyzers + 4 * n_ref + 2 + 2
    return {
        "variables": first + seg_vars + n_scen * T * per_hour_vars,
        "rows": seg_rows + n_scen * T * per_hour_rows,
        "binaries": sum(K + 1 for K in breakpoints) if with_segments else 0,
        "first_stage": first + seg_vars,
        "second_stage": n_scen * T * per_hour_vars,
    }


# --- per-technology rates (NG MMBtu/t, electricity MWh/t, process CO2 t/t) -----------
TECH_RATES = {
    "ATR+CC": (142.0, 3.6, 0.62),
    "SMR+CC": (171.0, 4.4, 1.98),
    "SMR": (SMR_NG, SMR_ELEC, SMR_CO2),
    "PEM": (0.0, 48.0, 0.0),
    "Alkaline": (0.0, 50.0, 0.0),
}
SOURCE_RATES = {"PV": (0.0, 0.0), "NGCC": (NGCC_FUEL, NGCC_CO2), "grid": (0.0, GRID_CO2)}


ELECTROLYZERS = ("PEM", "Alkaline")


def single_tech_totals(tech, source, hydrogen_t):
    """Annual NG (MMBtu) and CO2 (t) when one technology and one power source make ``hydrogen_t``.

    Electrolyzers sit on the DC bus, so AC-side sources (NGCC, grid) lose the
    converter efficiency on the way; reformers draw from the AC bus directly.
    """
    ng, elec, co2 = TECH_RATES[tech]
    fuel, ci = SOURCE_RATES[source]
    mwh = hydrogen_t * elec
    if tech in ELECTROLYZERS and source != "PV":
        mwh /= AC_DC
    return hydrogen_t * ng + mwh * fuel, hydrogen_t * co2 + mwh * ci
