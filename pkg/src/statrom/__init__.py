"""Reduced-order statistical finite elements for the Helmholtz equation.

Krylov moment-matching ROM priors from quasi-Monte Carlo samples, an
adjoint estimate of the ROM error, and Bayesian conditioning of the
prior on sensor data with that error carried explicitly in the data model.
"""

from .adjoint_error import ErrorField, estimate_error_field
from .inference import (Hyperparameters, SensorData, condition_statfem, condition_statrom,
                        learn_hyperparameters, predictive_observations, predictive_true_process)
from .pipeline import (ProblemConfig, generate_data, helmholtz1d, offline, online, scatter2d)
from .stochastic import KernelSpec, MultivariateGaussian

__version__ = "0.1.0"

__all__ = [
    "ErrorField",
    "estimate_error_field",
    "Hyperparameters",
    "SensorData",
    "condition_statfem",
    "condition_statrom",
    "learn_hyperparameters",
    "predictive_observations",
    "predictive_true_process",
    "ProblemConfig",
    "generate_data",
    "helmholtz1d",
    "offline",
    "online",
    "scatter2d",
    "KernelSpec",
    "MultivariateGaussian",
]
