"""Orthonormal discrete cosine transform of type I.

``D[i, j] = sqrt(2/(p-1)) cos(pi i j / (p-1))`` (0-based), with a factor
``1/sqrt(2)`` for each boundary index among ``i, j``. ``D`` is symmetric and
orthogonal, and ``D^T Sigma D`` is nearly diagonal for Toeplitz ``Sigma``
with diagonal close to ``f(pi x_j)``, ``x_j = j/(p-1)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .toeplitz import ToeplitzMatrix

DIAG_REPORT_LIMIT = 2048


def dct1_matrix(p: int) -> np.ndarray:
    """Dense O(p^2) reference matrix."""
    if p < 3:
        raise ValueError("DCT-I needs p >= 3")
    i = np.arange(p)
    D = np.sqrt(2.0 / (p - 1)) * np.cos(np.pi * np.outer(i, i) / (p - 1))
    a = np.ones(p)
    a[[0, -1]] = 1.0 / np.sqrt(2.0)
    return D * np.outer(a, a)


@dataclass(frozen=True)
class Dct1Plan:
    p: int

    def __post_init__(self):
        if self.p < 3:
            raise ValueError("DCT-I needs p >= 3")

    def __call__(self, y) -> np.ndarray:
        return dct1_apply(self, y)


def dct1_apply(plan: Dct1Plan, y) -> np.ndarray:
    """``D @ y`` in O(p log p); rows of a 2-D ``y`` are transformed independently."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != plan.p:
        raise ValueError(f"vector length {y.shape[-1]} does not match p={plan.p}")
    return scipy.fft.dct(y, type=1, norm="ortho", axis=-1)


def transform_sample(Y) -> np.ndarray:
    """Squared DCT-I coefficients ``W[i, j] = (D_j^T Y_i)^2``."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    plan = Dct1Plan(Y.shape[1])
    return dct1_apply(plan, Y) ** 2


@dataclass(frozen=True)
class DiagonalizationReport:
    max_diag_error: float
    max_offdiag_even: float
    max_offdiag_odd: float


def diagonalization_report(t: ToeplitzMatrix, f_true) -> DiagonalizationReport:
    """Compare ``D^T Sigma D`` with ``diag(f(pi x_j))``.

    ``f_true`` is an evaluator of the spectral density on ``[0, pi]``.
    """
    p = t.p
    if p > DIAG_REPORT_LIMIT:
        raise ValueError(f"p={p} exceeds the dense limit {DIAG_REPORT_LIMIT}")
    D = dct1_matrix(p)
    A = D.T @ t.to_dense() @ D
    x = np.arange(p) / (p - 1)
    diag_err = np.max(np.abs(np.diag(A) - np.asarray(f_true(np.pi * x), dtype=float)))
    lag = np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
    off = np.abs(A)
    even = (lag % 2 == 0) & (lag > 0)
    odd = lag % 2 == 1
    return DiagonalizationReport(
        max_diag_error=float(diag_err),
        max_offdiag_even=float(off[even].max()),
        max_offdiag_odd=float(off[odd].max()),
    )
