"""Positive solutions of a double-phase eigenvalue problem on 1D and 2D grids."""

__version__ = "0.1.0"

from .eigen import EigenResult, Spectrum, SpectrumConstants, first_eigenpair, li_diagnostic, spectrum_constants
from .energy import ProblemParams, SolveResult, energy, energy_gradient, minimize_global
from .grid import Field, Grid, build_grid
from .nehari import nehari_ground_state, nehari_project
from .optim import ConvergenceError, SolverOptions
from .orlicz import Exponents, WeightSpec, luxemburg_norm, modular_theta
from .spectrum import classify_theoretical, detect_existence, lambda_star, region_map, trace_curve

__all__ = [
    "ConvergenceError", "EigenResult", "Exponents", "Field", "Grid", "ProblemParams", "SolveResult",
    "SolverOptions", "Spectrum", "SpectrumConstants", "WeightSpec", "build_grid", "classify_theoretical",
    "detect_existence", "energy", "energy_gradient", "first_eigenpair", "lambda_star", "li_diagnostic",
    "luxemburg_norm", "minimize_global", "modular_theta", "nehari_ground_state", "nehari_project",
    "region_map", "spectrum_constants", "trace_curve",
]
