"""Two-CSTR plant with flash recovery: exact model, reference model, problem wrapper."""

from .landscape import grid_minima, performance_grid
from .model import PlantState, T_RANGE, performance, plant_state, solve_cstr
from .params import SPECIES, STOICHIOMETRY, ReactorParams
from .problem import ReactorReference, reactor_problem
from .reference import ReferenceFit, fit_reference_gp, reference_fit, reference_performance

__all__ = [
    "PlantState",
    "ReactorParams",
    "ReactorReference",
    "ReferenceFit",
    "SPECIES",
    "STOICHIOMETRY",
    "T_RANGE",
    "fit_reference_gp",
    "grid_minima",
    "performance",
    "performance_grid",
    "plant_state",
    "reactor_problem",
    "reference_fit",
    "reference_performance",
    "solve_cstr",
]
