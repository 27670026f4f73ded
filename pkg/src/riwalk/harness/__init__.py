"""Experiment configuration, orchestration, and the displacement-exponent estimator."""

from .config import KINDS, ExperimentConfig, config_from_dict, load_config
from .exponent import ExponentFit, PhiResult, dyadic_grid, exponent_experiment, phi_n_experiment
from .runner import RunError, execute, run

__all__ = [
    "KINDS", "ExperimentConfig", "ExponentFit", "PhiResult", "RunError", "config_from_dict", "dyadic_grid",
    "execute", "exponent_experiment", "load_config", "phi_n_experiment", "run",
]
