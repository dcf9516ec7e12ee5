"""Simulation and property checks for stochastic fractional conservation laws on the torus."""

from .checks import (CheckReport, contraction_check, lp_bound_check, mean_martingale_check,
                     nld_exponent_fit, viscosity_cauchy)
from .config import RunConfig, load_config, parse_config
from .errors import FcslError
from .model import ModelSpec, additive_noise, builtin_model, multiplicative_noise
from .operators import frac_laplacian_quadrature, frac_laplacian_spectral
from .solver import SolverConfig, evolve, evolve_ensemble
from .torus import Field, make_grid

__version__ = "0.1.0"
