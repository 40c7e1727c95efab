"""Toeplitz covariance and precision estimation through a variance-stabilized
log-periodogram of the DCT-I coefficients and periodic smoothing splines."""

__version__ = "0.1.0"

from .toeplitz import NotConvergedError, ToeplitzMatrix, l1_norm, min_eigenvalue_dense, spectral_norm
from .dct import Dct1Plan, dct1_apply, dct1_matrix, diagonalization_report, transform_sample
from .vst import DegenerateDataError, bin_columns, h_inverse, h_transform, mirror, stabilize
from .estimator import (
    EstimatorConfig,
    QuadratureWarning,
    SpectralDensityEstimate,
    cosine_coefficients,
    dct_whittle_nll,
    estimate_spectral_density,
    qq_data,
    spectral_to_covariance,
    spectral_to_precision,
    whittle_nll,
)

__all__ = [
    "NotConvergedError", "ToeplitzMatrix", "l1_norm", "min_eigenvalue_dense", "spectral_norm",
    "Dct1Plan", "dct1_apply", "dct1_matrix", "diagonalization_report", "transform_sample",
    "DegenerateDataError", "bin_columns", "h_inverse", "h_transform", "mirror", "stabilize",
    "EstimatorConfig", "QuadratureWarning", "SpectralDensityEstimate", "cosine_coefficients",
    "dct_whittle_nll", "estimate_spectral_density", "qq_data", "spectral_to_covariance",
    "spectral_to_precision", "whittle_nll",
]
