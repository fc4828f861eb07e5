"""Hydrogen supply-chain design as a two-stage stochastic MILP."""

from .domain import (
    CostBook, Design, DemandProfile, Dispatch, Solution, TechnologyCatalog, crf, default_catalog, load_catalog,
)
from .estimator import InfeasibleDesignError, SupplyChainDesigner
from .formulation import build, extract_solution, unique_restriction
from .metrics import CostReport, carbon_intensity, lcoe, lcoh_breakdown, table_e_row
from .model import ModelInstance, VarKey
from .scenario import ScenarioSet, default_weather, demand_profiles, make_demand, reduce_periods

__version__ = "0.1.0"

__all__ = [
    "CostBook", "CostReport", "DemandProfile", "Design", "Dispatch", "InfeasibleDesignError", "ModelInstance",
    "ScenarioSet", "Solution", "SupplyChainDesigner", "TechnologyCatalog", "VarKey",
    "build", "carbon_intensity", "crf", "default_catalog", "default_weather", "demand_profiles",
    "extract_solution", "lcoe", "lcoh_breakdown", "load_catalog", "make_demand", "reduce_periods",
    "table_e_row", "unique_restriction",
]
