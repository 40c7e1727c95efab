"""Penalized trigonometric regression on an equispaced periodic design.

The fit minimizes

    (1/N) sum_k (z_k - s(x_k))^2 + h^(2q) int_0^1 (s^(q)(x))^2 dx

over ``s = a_0 + sum_j sqrt(2) (a_j cos 2 pi j x + b_j sin 2 pi j x)``,
``j = 1..N/2`` (no sine at the Nyquist frequency), with ``x_k = k/N``.
On this design the basis is orthogonal, so the minimizer is a diagonal
shrinkage of the discrete Fourier coefficients of ``z``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .vst import RegressionData

DEFAULT_H_GRID = np.logspace(-4.0, 0.0, 40)
REFINE_RTOL = 1e-3
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SplineFit:
    cos_coeffs: np.ndarray  # a_0..a_J
    sin_coeffs: np.ndarray  # b_1..b_J, b_J == 0
    h: float
    q: int
    edf: float
    rss: float
    fitted: np.ndarray

    @property
    def N(self) -> int:
        return self.fitted.size


def penalty_eigenvalues(N: int, h: float, q: int) -> np.ndarray:
    """Effective shrinkage denominators ``lam_j`` for rfft index j = 0..N/2.

    The Nyquist basis function has squared empirical norm 2 instead of 1,
    which halves its effective penalty.
    """
    j = np.arange(N // 2 + 1)
    lam = (2.0 * np.pi * j * h) ** (2 * q)
    lam[-1] /= 2.0
    return lam


def _multiplicity(N: int) -> np.ndarray:
    mult = np.full(N // 2 + 1, 2.0)
    mult[0] = 1.0
    mult[-1] = 1.0
    return mult


def _check(data: RegressionData, h: float, q: int):
    N = data.N
    if N < 4 or N % 2:
        raise ValueError(f"need an even number of observations >= 4, got {N}")
    if not h > 0:
        raise ValueError(f"smoothing parameter must be positive, got {h}")
    if q < 1:
        raise ValueError(f"penalty order must be >= 1, got {q}")


def fit(data: RegressionData, h: float, q: int = 2) -> SplineFit:
    _check(data, h, q)
    z = data.z
    N = z.size
    c = np.fft.rfft(z)
    lam = penalty_eigenvalues(N, h, q)
    w = 1.0 / (1.0 + lam)
    cw = c * w
    fitted = np.fft.irfft(cw, n=N)

    a = np.empty(N // 2 + 1)
    a[0] = cw[0].real / N
    a[1:-1] = np.sqrt(2.0) * cw[1:-1].real / N
    a[-1] = cw[-1].real / (np.sqrt(2.0) * N)
    b = np.zeros(N // 2)
    b[:-1] = -np.sqrt(2.0) * cw[1:-1].imag / N

    edf = float(np.sum(_multiplicity(N) * w))
    rss = float(np.sum((z - fitted) ** 2))
    return SplineFit(a, b, float(h), int(q), edf, rss, fitted)


def evaluate(f: SplineFit, x) -> np.ndarray:
    """Fitted 1-periodic function at arbitrary ``x``."""
    x = np.asarray(x, dtype=float)
    j = np.arange(1, f.cos_coeffs.size)
    arg = 2.0 * np.pi * np.multiply.outer(x, j)
    return f.cos_coeffs[0] + np.sqrt(2.0) * (
        np.cos(arg) @ f.cos_coeffs[1:] + np.sin(arg) @ f.sin_coeffs
    )


def objective(data: RegressionData, f: SplineFit, cos_coeffs=None, sin_coeffs=None) -> float:
    """Penalized criterion at the given coefficients (default: those of ``f``)."""
    a = f.cos_coeffs if cos_coeffs is None else np.asarray(cos_coeffs)
    b = f.sin_coeffs if sin_coeffs is None else np.asarray(sin_coeffs)
    trial = SplineFit(a, b, f.h, f.q, f.edf, f.rss, f.fitted)
    s = evaluate(trial, data.x)
    j = np.arange(1, a.size)
    pen = np.sum((2.0 * np.pi * j) ** (2 * f.q) * (a[1:] ** 2 + b**2))
    return float(np.mean((data.z - s) ** 2) + f.h ** (2 * f.q) * pen)


def _one_minus_w(N, h, q):
    lam = penalty_eigenvalues(N, h, q)
    return lam / (1.0 + lam), lam


def gcv_score(data: RegressionData, h: float, q: int = 2) -> float:
    """``(RSS/N) / (1 - edf/N)^2``."""
    f = fit(data, h, q)
    N = data.N
    rest, _ = _one_minus_w(N, h, q)
    resid_df = float(np.sum(_multiplicity(N)[1:] * rest[1:]))
    if resid_df <= 0:
        return np.inf
    return (f.rss / N) / (resid_df / N) ** 2


def gml_score(data: RegressionData, h: float, q: int = 2) -> float:
    """Generalized maximum likelihood ``z'(I-S)z / det+(I-S)^(1/(N-1))``.

    The determinant runs over the ``N - 1`` non-constant smoother directions.
    """
    f = fit(data, h, q)
    N = data.N
    _, lam = _one_minus_w(N, h, q)
    lam = lam[1:]
    if np.any(lam <= 0):
        return np.inf
    log_det = np.sum(_multiplicity(N)[1:] * (np.log(lam) - np.log1p(lam)))
    num = float(np.sum(data.z * (data.z - f.fitted)))
    if num <= 0:
        return 0.0
    return float(np.exp(np.log(num) - log_det / (N - 1)))


def _golden(func, lo, hi, rtol):
    """Golden-section minimization of ``func(log h)`` on ``[lo, hi]``."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = func(c), func(d)
    tol = np.log1p(rtol)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = func(d)
    return (c, fc) if fc <= fd else (d, fd)


def _select(data, q, grid, score):
    grid = np.sort(np.asarray(grid if grid is not None else DEFAULT_H_GRID, dtype=float))
    if grid.size == 0 or np.any(grid <= 0):
        raise ValueError("h grid must be nonempty and positive")
    scores = np.array([score(data, h, q) for h in grid])
    if not np.any(np.isfinite(scores)):
        raise RuntimeError("selection criterion undefined on the whole grid")
    i = int(np.argmin(scores))
    best_h, best = grid[i], scores[i]
    if grid.size > 1:
        lo = np.log(grid[max(i - 1, 0)])
        hi = np.log(grid[min(i + 1, grid.size - 1)])
        lh, val = _golden(lambda t: score(data, float(np.exp(t)), q), lo, hi, REFINE_RTOL)
        if val < best:
            best_h, best = float(np.exp(lh)), val
    return float(best_h), fit(data, best_h, q)


def gcv_select(data: RegressionData, q: int = 2, grid=None):
    """Grid search plus golden-section refinement of the GCV criterion."""
    return _select(data, q, grid, gcv_score)


def ml_select(data: RegressionData, q: int = 2, grid=None):
    """As :func:`gcv_select` with the generalized maximum likelihood criterion."""
    return _select(data, q, grid, gml_score)
