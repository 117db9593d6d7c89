"""Steady states, spectra and stability of reaction-diffusion-ODE systems on (0, 1)."""

from .dynamics import (RateFit, SimulationTrace, estimate_rate, perturb, picard_mild, simulate,
                       simulate_linear)
from .errors import RDODEError
from .grid import Grid, StateField, heat_propagate, laplacian_eigenvalues, laplacian_matrix
from .linearize import DiscreteOperator, JacobianField, assemble_operator, jacobian_field, linearize
from .model import (DdiParams, HysteresisParams, ModelSpec, affine_model, build_model,
                    builtin_model)
from .spectra import (SpectrumReport, Verdict, analyze, check_sufficient_stability, classify,
                      compute_spectrum, evans_function)
from .steady import (SteadyState, find_constant_steady, solve_ddi_pattern,
                     solve_hysteresis_pattern, solve_newton_steady, steady_residual)

__version__ = "0.1.0"

__all__ = [
    "DdiParams", "DiscreteOperator", "Grid", "HysteresisParams", "JacobianField", "ModelSpec",
    "RDODEError", "RateFit", "SimulationTrace", "SpectrumReport", "StateField", "SteadyState",
    "Verdict", "affine_model", "analyze", "assemble_operator", "build_model", "builtin_model",
    "check_sufficient_stability", "classify", "compute_spectrum", "estimate_rate",
    "evans_function", "find_constant_steady", "heat_propagate", "jacobian_field",
    "laplacian_eigenvalues", "laplacian_matrix", "linearize", "perturb", "picard_mild",
    "simulate", "simulate_linear", "solve_ddi_pattern", "solve_hysteresis_pattern",
    "solve_newton_steady", "steady_residual",
]
