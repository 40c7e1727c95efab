"""Binning, log variance-stabilizing transform, mirroring and the H link.

Squared DCT coefficients are roughly scaled chi-square(1) variables with
mean ``f(pi x_j)``. Summing ``m`` of them into a bin and taking
``2^{-1/2} log(Q/m)`` gives nearly Gaussian data with variance ``1/m`` and
mean ``H(f)``, where ``H(y) = 2^{-1/2} (digamma(m/2) + log(2y/m))``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import digamma


class DegenerateDataError(ValueError):
    """Input carries no energy in some bin (e.g. all-zero rows)."""


@dataclass(frozen=True)
class BinnedSeries:
    q_values: np.ndarray
    m: int
    discarded: int
    width: int

    @property
    def T(self) -> int:
        return self.q_values.size


@dataclass(frozen=True)
class RegressionData:
    """Mirrored regression sample ``z`` at design points ``x = k/N``."""

    z: np.ndarray
    m: int

    @property
    def N(self) -> int:
        return self.z.size

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.N) / self.N


def _kept_columns(p: int, T: int, remainder: str) -> np.ndarray:
    width = p // T
    r = p - T * width
    if remainder == "trailing" or r == 0:
        return np.arange(T * width)
    if remainder == "spread":
        # drop r columns spaced evenly over the band, so bins still cover [0, pi]
        drop = np.floor((np.arange(r) + 0.5) * p / r).astype(int)
        keep = np.ones(p, dtype=bool)
        keep[drop] = False
        return np.flatnonzero(keep)
    raise ValueError(f"unknown remainder policy {remainder!r}")


def bin_columns(W, T: int, remainder: str = "trailing") -> BinnedSeries:
    """Sum ``W`` over rows and over ``T`` consecutive column blocks.

    Blocks are ``p // T`` columns wide. When ``T`` does not divide ``p`` the
    leftover ``p - T * (p // T)`` columns are dropped: the trailing ones by
    default, or columns spread evenly across the band with ``remainder="spread"``.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    n, p = W.shape
    if not 2 <= T <= p:
        raise ValueError(f"need 2 <= T <= p, got T={T}, p={p}")
    width = p // T
    cols = _kept_columns(p, T, remainder)
    sums = W[:, cols].sum(axis=0)
    q = sums.reshape(T, width).sum(axis=1)
    return BinnedSeries(q_values=q, m=n * width, discarded=p - cols.size, width=width)


def stabilize(b: BinnedSeries) -> np.ndarray:
    q = b.q_values
    if np.any(q <= 0) or not np.all(np.isfinite(q)):
        raise DegenerateDataError(
            "non-positive bin sum; input has (near) zero energy in some frequency band"
        )
    return np.log(q / b.m) / np.sqrt(2.0)


def mirror(ystar, m: int = 1) -> RegressionData:
    """Extend ``(y_1..y_T)`` to ``(y_1..y_T, y_{T-1}..y_2)``, length ``2T - 2``."""
    y = np.asarray(ystar, dtype=float).ravel()
    if y.size < 2:
        raise ValueError("need at least two binned values")
    return RegressionData(z=np.concatenate([y, y[-2:0:-1]]), m=m)


def h_transform(y, m: int):
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("H is defined for positive arguments only")
    return (digamma(m / 2.0) + np.log(2.0 * y / m)) / np.sqrt(2.0)


def h_inverse(y, m: int):
    y = np.asarray(y, dtype=float)
    return m * np.exp(np.sqrt(2.0) * y - digamma(m / 2.0)) / 2.0
