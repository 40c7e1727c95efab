"""Competitor estimators: Toeplitz-averaged sample covariance and tapering."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .toeplitz import ToeplitzMatrix, l1_norm, spectral_norm
from .estimator import cosine_coefficients

THIN_THRESHOLD = 2000


@dataclass(frozen=True)
class TaperSelection:
    k: int
    method: str
    candidates: np.ndarray = field(repr=False)
    cv_curve: np.ndarray = field(repr=False)
    info: dict = field(default_factory=dict)


def sample_toeplitz(Y) -> ToeplitzMatrix:
    """Average the diagonals of ``n^-1 sum_i Y_i Y_i^T``.

    ``sigma_d = (n (p - d))^-1 sum_i sum_t y_{i,t} y_{i,t+d}``, via FFT
    autocorrelations.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n, p = Y.shape
    size = 1 << int(np.ceil(np.log2(2 * p)))
    spec = np.fft.rfft(Y, n=size, axis=1)
    acf = np.fft.irfft(np.abs(spec) ** 2, n=size, axis=1)[:, :p].sum(axis=0)
    return ToeplitzMatrix(acf / (n * (p - np.arange(p))))


def taper_weights(k: int, p: int) -> np.ndarray:
    m = np.arange(p, dtype=float)
    return np.clip(2.0 - 2.0 * m / k, 0.0, 1.0)


def taper(t: ToeplitzMatrix, k: int) -> ToeplitzMatrix:
    """Trapezoidal tapering: weight 1 up to lag k/2, linear to 0 at lag k."""
    if not 2 <= k <= t.p // 2:
        raise ValueError(f"tapering parameter must satisfy 2 <= k <= p/2, got k={k}, p={t.p}")
    return ToeplitzMatrix(t.first_row * taper_weights(k, t.p))


class _Symbol:
    """Density evaluator given by the symbol of a Toeplitz matrix."""

    def __init__(self, t: ToeplitzMatrix):
        self.t = t

    def __call__(self, omega):
        return self.t.symbol(omega)

    def on_grid(self, M: int) -> np.ndarray:
        p = self.t.p
        step = -(-p // M)  # evaluate on a grid fine enough to hold every lag
        L = M * step
        x = np.zeros(L + 1)
        x[:p] = self.t.first_row
        return scipy.fft.dct(x, type=1)[::step]


def symbol_density(t: ToeplitzMatrix):
    return _Symbol(t)


def make_positive(t: ToeplitzMatrix, floor: float | None = None) -> ToeplitzMatrix:
    """Clip the symbol from below at ``floor`` (default ``1/log p``) and refit."""
    floor = 1.0 / np.log(t.p) if floor is None else floor
    sym = _Symbol(t)

    class _Clipped:
        def on_grid(self, M):
            return np.maximum(sym.on_grid(M), floor)

    return ToeplitzMatrix(cosine_coefficients(_Clipped(), t.p, M=4 * t.p))


def _norm_fn(norm: str):
    if norm == "spectral":
        return lambda t: spectral_norm(t, tol=1e-8)
    if norm == "l1":
        return l1_norm
    raise ValueError(f"norm must be 'spectral' or 'l1', got {norm!r}")


def _search(risk, kmax: int, candidates):
    """Minimize ``risk(k)`` over ``2..kmax``; returns (k, ks, risks).

    ``candidates="full"`` evaluates every k, ``"thinned"`` a geometric grid
    refined around the coarse minimizer; ties go to the smaller k.
    """
    cache: dict[int, float] = {}

    def ev(ks):
        for k in ks:
            if k not in cache:
                cache[k] = risk(k)

    if kmax < 2:
        raise ValueError("no admissible tapering parameter (need p >= 4)")
    if isinstance(candidates, str) and candidates == "full":
        ev(range(2, kmax + 1))
    elif isinstance(candidates, str) and candidates == "thinned":
        coarse = np.unique(np.round(np.geomspace(2, kmax, 24)).astype(int))
        coarse = np.unique(np.concatenate([[2, 3, 4], coarse, [kmax]]))
        coarse = coarse[(coarse >= 2) & (coarse <= kmax)]
        ev(coarse)
        lo, hi = 2, kmax
        while True:
            ks = np.array(sorted(cache))
            best = ks[np.argmin([cache[k] for k in ks])]
            pos = np.searchsorted(ks, best)
            lo = ks[max(pos - 1, 0)]
            hi = ks[min(pos + 1, ks.size - 1)]
            inner = [k for k in range(lo, hi + 1) if k not in cache]
            if not inner:
                break
            if len(inner) > 8:
                inner = np.unique(np.round(np.linspace(lo, hi, 10)).astype(int))
            ev(inner)
    else:
        ks = sorted(int(k) for k in candidates if 2 <= int(k) <= kmax)
        if not ks:
            raise ValueError("no admissible candidates")
        ev(ks)
    ks = np.array(sorted(cache))
    risks = np.array([cache[k] for k in ks])
    return int(ks[np.argmin(risks)]), ks, risks


def _resolve(candidates, p):
    if candidates == "auto":
        return "thinned" if p >= THIN_THRESHOLD else "full"
    return candidates


def cv_select_taper(
    Y, splits: int = 30, norm: str = "spectral", seed: int = 0, candidates="auto"
) -> TaperSelection:
    """Random-split cross-validation of the tapering parameter.

    Each split trains on ``round(2n/3)`` rows and tests on the rest; the
    risk of k is the split-averaged ``||Tap_k(S_train) - S_test||``.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n, p = Y.shape
    if n < 3:
        raise ValueError(f"cross-validation needs n >= 3 samples, got {n}")
    if splits < 1:
        raise ValueError("splits must be >= 1")
    n1 = int(round(2 * n / 3))
    pairs = []
    for nu in range(splits):
        perm = np.random.default_rng([seed, nu]).permutation(n)
        pairs.append((sample_toeplitz(Y[perm[:n1]]), sample_toeplitz(Y[perm[n1:]])))
    measure = _norm_fn(norm)

    def risk(k):
        w = taper_weights(k, p)
        return float(np.mean([measure(ToeplitzMatrix(a.first_row * w) - b) for a, b in pairs]))

    k, ks, risks = _search(risk, p // 2, _resolve(candidates, p))
    return TaperSelection(k, f"cv(splits={splits},norm={norm})", ks, risks,
                          {"n_train": n1, "n_test": n - n1})


def subseries_cv_select_taper(
    y, l: int, splits: int = 30, norm: str = "spectral", seed: int = 0, candidates="auto"
) -> TaperSelection:
    """Cross-validation on ``l`` non-overlapping subseries of one series.

    The subseries act as pseudo-replicates; a remainder of ``p mod l``
    trailing points is dropped and reported in ``info``.
    """
    y = np.asarray(y, dtype=float).ravel()
    p = y.size
    if l < 3:
        raise ValueError("need at least 3 subseries")
    length = p // l
    if length < 4:
        raise ValueError(f"subseries length {length} too short for tapering")
    sub = y[: l * length].reshape(l, length)
    sel = cv_select_taper(sub, splits=splits, norm=norm, seed=seed, candidates=candidates)
    info = dict(sel.info, l=l, subseries_length=length, discarded=p - l * length)
    return TaperSelection(sel.k, f"subseries(l={l},splits={splits},norm={norm})",
                          sel.candidates, sel.cv_curve, info)


def oracle_taper(Y, truth: ToeplitzMatrix, norm: str = "spectral", candidates="auto") -> TaperSelection:
    """Tapering parameter minimizing the true risk of the tapered sample estimate."""
    S = sample_toeplitz(Y)
    if truth.p != S.p:
        raise ValueError(f"truth has p={truth.p}, sample has p={S.p}")
    measure = _norm_fn(norm)

    def risk(k):
        return float(measure(ToeplitzMatrix(S.first_row * taper_weights(k, S.p)) - truth))

    k, ks, risks = _search(risk, S.p // 2, _resolve(candidates, S.p))
    return TaperSelection(k, "oracle", ks, risks)
