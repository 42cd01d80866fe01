"""Tensor-based monostatic sensing for IRS-assisted OFDM systems."""

from .errors import DegenerateInputError, IrsenseError, ParameterError
from .estimators import Estimate, GridSpec, baseline_estimate, hosvd_estimate
from .experiments import MonteCarloConfig, complexity_model, draw_truth, normalized_rmse, run_sweep
from .signal_model import IrsProfile, SystemConfig, TargetTruth, add_awgn, irs_dft_profile, synthesize_echo

__version__ = "0.1.0"

__all__ = [
    "DegenerateInputError",
    "Estimate",
    "GridSpec",
    "IrsProfile",
    "IrsenseError",
    "MonteCarloConfig",
    "ParameterError",
    "SystemConfig",
    "TargetTruth",
    "add_awgn",
    "baseline_estimate",
    "complexity_model",
    "draw_truth",
    "hosvd_estimate",
    "irs_dft_profile",
    "normalized_rmse",
    "run_sweep",
    "synthesize_echo",
]
