"""Finite element solvers for spectral and integral fractional Laplacians."""
from .analytic import FracOrder, frac_order
from .dunford_integral import DtConfig, dt_config, solve_dt_integral
from .extension import solve_extension
from .fem_core import FeFunction
from .harness import ConvergenceReport, StudyConfig, estimate_rate, l2_error, run_study
from .integral_fem import assemble_integral_stiffness, solve_integral
from .spectral_sinc import solve_spectral_sinc

__version__ = "0.1.0"
