"""scikit-learn style front end: ``fit`` sizes the plant, ``predict`` dispatches it."""

from __future__ import annotations

import math

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .domain import PRODUCTION_TECHS, Solution, TechnologyCatalog, default_catalog, validate_catalog
from .formulation import build, extract_solution
from .metrics import CostReport, lcoh_breakdown
from .scenario import ScenarioSet
from .solver import OPTIMAL, MipOptions, SimplexOptions, solve_mip

_FACILITIES = {"PV", "battery", "NGCC", "grid", "tank", *PRODUCTION_TECHS}


class InfeasibleDesignError(ValueError):
    pass


def check_scenarios(X) -> ScenarioSet:
    """Accept a ScenarioSet or its dict form; reject anything else early."""
    if isinstance(X, ScenarioSet):
        return X
    if isinstance(X, dict):
        return ScenarioSet.from_dict(X)
    raise TypeError(f"expected a ScenarioSet, got {type(X).__name__}")


def check_restriction(restriction) -> frozenset[str] | None:
    if restriction is None:
        return None
    if isinstance(restriction, str):
        restriction = [restriction]
    out = frozenset(restriction)
    unknown = out - _FACILITIES
    if unknown:
        raise ValueError(f"unknown facilities in restriction: {sorted(unknown)}")
    return out


class SupplyChainDesigner(BaseEstimator):
    """Two-stage design of a hydrogen plant and its power supply.

    ``fit`` solves the capacity-expansion MILP on a scenario set and stores
    the design; ``predict`` re-dispatches that fixed design on new scenarios;
    ``score`` is minus the LCOH ($/kg) the fixed design achieves.
    """

    def __init__(self, catalog: TechnologyCatalog | None = None, year=2030, ng_price=None, co2_tax=None,
                 restriction=None, linear_capex=False, gap_tol=1e-6, int_tol=1e-6, feas_tol=1e-7,
                 opt_tol=1e-7, node_limit=100_000):
        self.catalog = catalog
        self.year = year
        self.ng_price = ng_price
        self.co2_tax = co2_tax
        self.restriction = restriction
        self.linear_capex = linear_capex
        self.gap_tol = gap_tol
        self.int_tol = int_tol
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.node_limit = node_limit

    def _setup(self):
        catalog = self.catalog if self.catalog is not None else default_catalog()
        problems = validate_catalog(catalog)
        if problems:
            raise ValueError("invalid catalog: " + "; ".join(problems))
        for name in ("gap_tol", "int_tol", "feas_tol", "opt_tol"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be a positive number, got {v!r}")
        if int(self.node_limit) < 1:
            raise ValueError("node_limit must be at least 1")
        book = catalog.cost_book(int(self.year), ng_price=self.ng_price, co2_tax=self.co2_tax)
        options = MipOptions(int_tol=self.int_tol, gap_tol=self.gap_tol, node_limit=int(self.node_limit),
                             lp=SimplexOptions(feas_tol=self.feas_tol, opt_tol=self.opt_tol))
        return catalog, book, options

    def _solve(self, scenarios, fixed=None):
        catalog, book, options = self._setup()
        model = build(catalog, book, scenarios, check_restriction(self.restriction),
                      linear_capex=self.linear_capex, fixed_design=fixed)
        res = solve_mip(model, options)
        if res.incumbent is None:
            raise InfeasibleDesignError(f"no feasible plan ({res.status})")
        x = res.incumbent.x
        sol = extract_solution(model, x, res.status, model.objective_value(x), catalog, book, scenarios)
        return model, res, sol

    def fit(self, X, y=None):
        scenarios = check_scenarios(X)
        model, res, sol = self._solve(scenarios)
        catalog, book, _ = self._setup()
        self.model_stats_ = model.stats()
        self.status_ = res.status
        self.gap_ = res.gap
        self.solution_ = sol
        self.design_ = sol.design
        self.objective_ = sol.objective
        self.report_ = lcoh_breakdown(sol, catalog, book, scenarios)
        self.converged_ = res.status == OPTIMAL
        return self

    def predict(self, X) -> Solution:
        """Dispatch the fitted design on ``X``; raises InfeasibleDesignError if it cannot serve it."""
        check_is_fitted(self, "design_")
        _, _, sol = self._solve(check_scenarios(X), fixed=self.design_)
        return sol

    def report(self, X) -> CostReport:
        check_is_fitted(self, "design_")
        scenarios = check_scenarios(X)
        catalog, book, _ = self._setup()
        return lcoh_breakdown(self.predict(scenarios), catalog, book, scenarios)

    def score(self, X, y=None) -> float:
        try:
            return -self.report(X).lcoh_total
        except InfeasibleDesignError:
            return -math.inf
