"""Pseudospectral solver for L2-normalized solitary waves of Maxwell-Dirac and Coulomb-Dirac."""

__version__ = "0.1.0"

from .coulomb import AnalyticConstants, InteractionKernel, build_kernel, interaction_energy
from .dirac import ModelKind, apply_operator, build_spectral_data, embed_two_spinor, fw_transform, project
from .fiber import FiberConfig, MaximizerResult, certify_concavity, maximize
from .functional import energy, gradient, hessian_form, omega_estimate, residual
from .grid import Field, GridSpec, l2_inner, load_field, save_field, sobolev_inner, transform
from .minimizer import SolveConfig, SolveResult, direction_gradient, minimize, sweep, trial_upper_bound
from .reports import CheckReport

__all__ = [
    "AnalyticConstants",
    "CheckReport",
    "FiberConfig",
    "Field",
    "GridSpec",
    "InteractionKernel",
    "MaximizerResult",
    "ModelKind",
    "SolveConfig",
    "SolveResult",
    "apply_operator",
    "build_kernel",
    "build_spectral_data",
    "certify_concavity",
    "direction_gradient",
    "embed_two_spinor",
    "energy",
    "fw_transform",
    "gradient",
    "hessian_form",
    "interaction_energy",
    "l2_inner",
    "load_field",
    "maximize",
    "minimize",
    "omega_estimate",
    "project",
    "residual",
    "save_field",
    "sobolev_inner",
    "sweep",
    "transform",
    "trial_upper_bound",
]
