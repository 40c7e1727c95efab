"""Spectral density, covariance and precision estimates from stationary samples.

Pipeline: squared DCT-I coefficients, bin sums, log transform, mirroring,
penalized trigonometric regression, inverse link, and cosine integrals of
the fitted density (or of its reciprocal for the precision matrix).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
from scipy.stats import norm

from . import spline
from .dct import transform_sample
from .spline import SplineFit
from .toeplitz import ToeplitzMatrix
from .vst import (
    BinnedSeries,
    DegenerateDataError,
    RegressionData,
    bin_columns,
    h_inverse,
    mirror,
    stabilize,
)

SELECTORS = ("gcv", "ml", "fixed")
QUAD_TOL = 1e-8
QUAD_MAX_DOUBLINGS = 3


class QuadratureWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class EstimatorConfig:
    """Knobs of the estimator.

    Either ``T`` (number of bins) or ``upsilon`` (``T = floor(p**upsilon)``)
    may be given; with neither, ``upsilon`` defaults to 0.73, or 0.85 when
    ``long_memory`` is set or ``smoothness_hint`` is below 1.
    """

    T: int | None = None
    upsilon: float | None = None
    q: int = 2
    selector: str = "gcv"
    h: float | None = None
    h_min: float = 1e-4
    h_max: float = 1.0
    h_grid_size: int = 40
    eval_grid_size: int | None = None
    smoothness_hint: float | None = None
    long_memory: bool = False
    remainder: str = "spread"

    def __post_init__(self):
        if self.selector not in SELECTORS:
            raise ValueError(f"selector must be one of {SELECTORS}, got {self.selector!r}")
        if self.selector == "fixed" and not (self.h is not None and self.h > 0):
            raise ValueError("selector 'fixed' needs a positive h")
        if self.upsilon is not None and not 0 < self.upsilon < 1:
            raise ValueError(f"upsilon must lie in (0, 1), got {self.upsilon}")
        if self.T is not None and self.T < 2:
            raise ValueError(f"T must be >= 2, got {self.T}")
        if self.q < 1:
            raise ValueError(f"q must be >= 1, got {self.q}")
        if not 0 < self.h_min < self.h_max:
            raise ValueError("need 0 < h_min < h_max")
        if self.h_grid_size < 1:
            raise ValueError("h_grid_size must be >= 1")
        M = self.eval_grid_size
        if M is not None and (M < 2 or M & (M - 1)):
            raise ValueError(f"eval_grid_size must be a power of two, got {M}")

    def bins(self, p: int) -> int:
        if self.T is not None:
            T = self.T
        else:
            ups = self.upsilon
            if ups is None:
                low_smooth = self.smoothness_hint is not None and self.smoothness_hint < 1
                ups = 0.85 if (self.long_memory or low_smooth) else 0.73
            T = int(math.floor(p**ups))
        if not 2 <= T <= p:
            raise ValueError(f"bin count T={T} outside [2, p={p}]")
        return T

    def h_grid(self) -> np.ndarray:
        if self.h_grid_size == 1:
            return np.array([self.h_min])
        return np.logspace(np.log10(self.h_min), np.log10(self.h_max), self.h_grid_size)

    def quad_size(self, p: int) -> int:
        if self.eval_grid_size is not None:
            return max(self.eval_grid_size, _default_quad_size(p))
        return _default_quad_size(p)


def _default_quad_size(p: int) -> int:
    return 1 << max(int(math.ceil(math.log2(4 * max(p, 1)))), 3)


@dataclass(frozen=True)
class SpectralDensityEstimate:
    """Fitted density ``f(omega) = H^{-1}(g(omega / 2 pi))`` on ``[0, pi]``."""

    log_fit: SplineFit
    m: int
    T: int
    n: int
    p: int
    discarded: int
    selector: str
    quad_size: int = field(default=0)

    def log_mean(self, omega) -> np.ndarray:
        return spline.evaluate(self.log_fit, np.asarray(omega, dtype=float) / (2.0 * np.pi))

    def __call__(self, omega) -> np.ndarray:
        return h_inverse(self.log_mean(omega), self.m)

    def on_grid(self, M: int) -> np.ndarray:
        """Values at ``omega_i = pi i / M``, ``i = 0..M``, by one FFT."""
        a, b = self.log_fit.cos_coeffs, self.log_fit.sin_coeffs
        J = a.size - 1
        L = 2 * M
        if L <= J:
            return self(np.pi * np.arange(M + 1) / M)
        coef = np.zeros(L, dtype=complex)
        coef[1 : J + 1] = a[1:] - 1j * b
        g = a[0] + np.sqrt(2.0) * (L * np.fft.ifft(coef)).real[: M + 1]
        return h_inverse(g, self.m)

    @property
    def provenance(self) -> dict:
        return {
            "T": self.T,
            "m": self.m,
            "q": self.log_fit.q,
            "selector": self.selector,
            "h": self.log_fit.h,
            "edf": self.log_fit.edf,
            "discarded": self.discarded,
            "n": self.n,
            "p": self.p,
        }


def _as_sample(Y) -> np.ndarray:
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Y.ndim != 2:
        raise ValueError("sample must be an n x p matrix")
    if not np.all(np.isfinite(Y)):
        raise ValueError("sample contains non-finite values")
    return Y


def prepare_regression(Y, cfg: EstimatorConfig) -> tuple[RegressionData, BinnedSeries]:
    """Pipeline up to the mirrored Gaussian regression sample."""
    Y = _as_sample(Y)
    n, p = Y.shape
    if p < 8:
        raise ValueError(f"need p >= 8, got {p}")
    if not np.any(Y):
        raise DegenerateDataError("sample is identically zero")
    T = cfg.bins(p)
    binned = bin_columns(transform_sample(Y), T, remainder=cfg.remainder)
    ystar = stabilize(binned)
    return mirror(ystar, binned.m), binned


def wrap_fit(fit: SplineFit, binned: BinnedSeries, Y_shape, selector, quad_size=0):
    n, p = Y_shape
    return SpectralDensityEstimate(
        log_fit=fit, m=binned.m, T=binned.T, n=n, p=p,
        discarded=binned.discarded, selector=selector, quad_size=quad_size,
    )


def estimate_spectral_density(Y, cfg: EstimatorConfig | None = None) -> SpectralDensityEstimate:
    cfg = cfg or EstimatorConfig()
    Y = _as_sample(Y)
    data, binned = prepare_regression(Y, cfg)
    if cfg.selector == "fixed":
        fitted = spline.fit(data, cfg.h, cfg.q)
    elif cfg.selector == "gcv":
        _, fitted = spline.gcv_select(data, cfg.q, cfg.h_grid())
    else:
        _, fitted = spline.ml_select(data, cfg.q, cfg.h_grid())
    return wrap_fit(fitted, binned, Y.shape, cfg.selector, cfg.quad_size(Y.shape[1]))


# cosine integrals -------------------------------------------------------

def _grid_values(density, M: int) -> np.ndarray:
    if hasattr(density, "on_grid"):
        return np.asarray(density.on_grid(M), dtype=float)
    return np.asarray(density(np.pi * np.arange(M + 1) / M), dtype=float)


def _trapezoid_cosine(values: np.ndarray, p: int) -> np.ndarray:
    # trapezoid rule for int_0^1 v(x) cos(k pi x) dx on M+1 nodes == DCT-I / 2M
    M = values.size - 1
    return scipy.fft.dct(values, type=1)[:p] / (2.0 * M)


def cosine_coefficients(density, p: int, M: int | None = None, reciprocal: bool = False):
    """``int_0^1 g(pi x) cos(k pi x) dx`` for ``k < p``, ``g = f`` or ``1/f``.

    Starts from ``M`` nodes (default ``2^ceil(log2 4p)``) and doubles until
    the zero-lag integral moves by less than 1e-8; warns after 3 doublings.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if M is None:
        M = getattr(density, "quad_size", 0) or _default_quad_size(p)
    M = max(int(M), _default_quad_size(p) // 2, 2)

    def coeffs(M):
        v = _grid_values(density, M)
        if reciprocal:
            if np.any(v <= 0):
                raise ValueError("density must be positive to invert")
            v = 1.0 / v
        return _trapezoid_cosine(v, p)

    prev = coeffs(M)
    for _ in range(QUAD_MAX_DOUBLINGS):
        M *= 2
        cur = coeffs(M)
        if abs(cur[0] - prev[0]) < QUAD_TOL:
            return cur
        prev = cur
    warnings.warn(
        f"cosine quadrature not converged to {QUAD_TOL} after {QUAD_MAX_DOUBLINGS} doublings",
        QuadratureWarning,
        stacklevel=2,
    )
    return prev


def spectral_to_covariance(est, p: int, M: int | None = None) -> ToeplitzMatrix:
    """Toeplitz covariance whose entries are cosine integrals of ``est``."""
    return ToeplitzMatrix(cosine_coefficients(est, p, M))


def spectral_to_precision(est, p: int, M: int | None = None) -> ToeplitzMatrix:
    """Toeplitz precision estimate from cosine integrals of ``1 / est``."""
    return ToeplitzMatrix(cosine_coefficients(est, p, M, reciprocal=True))


# likelihoods and diagnostics --------------------------------------------

def _density_at(f, omega):
    vals = np.asarray(f(omega), dtype=float)
    if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
        raise ValueError("density must be positive and finite at the evaluation frequencies")
    return vals


def dct_whittle_nll(y, f) -> float:
    """``sum_j log f(pi x_j) + W_j / f(pi x_j)`` over all p DCT frequencies.

    A 2-D ``y`` sums the contributions of its rows.
    """
    Y = np.atleast_2d(np.asarray(y, dtype=float))
    p = Y.shape[1]
    fv = _density_at(f, np.pi * np.arange(p) / (p - 1))
    W = transform_sample(Y)
    return float(np.sum(np.log(fv)) * Y.shape[0] + np.sum(W / fv))


def whittle_nll(y, f) -> float:
    """Classical Whittle negative log-likelihood at Fourier frequencies.

    Uses ``j = 1..J`` with ``J`` the largest integer strictly below ``p/2``.
    """
    Y = np.atleast_2d(np.asarray(y, dtype=float))
    p = Y.shape[1]
    J = (p - 1) // 2
    j = np.arange(1, J + 1)
    fv = _density_at(f, 2.0 * np.pi * j / p)
    I = np.abs(np.fft.fft(Y, axis=1)[:, 1 : J + 1]) ** 2 / p
    return float(np.sum(np.log(fv)) * Y.shape[0] + np.sum(I / fv))


def qq_pairs(values) -> np.ndarray:
    """``(normal quantile at (k - 0.5)/T, sorted standardized value)`` pairs."""
    y = np.asarray(values, dtype=float).ravel()
    T = y.size
    y = y - y.mean()
    sd = y.std(ddof=1) if T > 1 else 0.0
    sample = np.sort(y / sd) if sd > 0 else np.zeros(T)
    theo = norm.ppf((np.arange(1, T + 1) - 0.5) / T)
    return np.column_stack([theo, sample])


def qq_data(Y, cfg: EstimatorConfig | None = None, detrend: bool = True) -> np.ndarray:
    """Normal QQ pairs of the standardized binned log data.

    Returns a ``T x 2`` array ``(theoretical, sample)``. With ``detrend`` the
    fitted log-density is removed first, so only the noise is compared.
    """
    cfg = cfg or EstimatorConfig()
    Y = _as_sample(Y)
    data, binned = prepare_regression(Y, cfg)
    T = binned.T
    y = data.z[:T].copy()
    if detrend:
        est = estimate_spectral_density(Y, cfg)
        y = y - est.log_fit.fitted[:T]
    return qq_pairs(y)
