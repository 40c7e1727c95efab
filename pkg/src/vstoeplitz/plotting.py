"""Figures written next to the CLI's delimited output.

Every function takes plain arrays (the same ones the CLI writes to CSV),
renders with the non-interactive Agg backend and saves to ``path``.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.6),
    "figure.dpi": 120,
    "savefig.bbox": "tight",
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.linewidth": 0.8,
    "font.size": 9,
    "legend.frameon": False,
}


def _save(fig, path):
    fig.savefig(path)
    plt.close(fig)
    return path


def qq_plot(pairs: np.ndarray, path, title: str | None = None):
    """Normal QQ plot of ``(theoretical, sample)`` pairs with the identity line."""
    pairs = np.asarray(pairs, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(pairs[:, 0], pairs[:, 1], ".", ms=3, color="0.2")
        lim = np.nanmax(np.abs(pairs)) * 1.05 if pairs.size else 1.0
        ax.plot([-lim, lim], [-lim, lim], lw=0.8, color="tab:red")
        ax.set_xlabel("normal quantiles")
        ax.set_ylabel("standardized binned log data")
        if title:
            ax.set_title(title)
        return _save(fig, path)


def density_plot(omega, f_hat, path, f_true=None, label: str = "estimate"):
    """Spectral density estimate on ``[0, pi]``, optionally against the truth."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(omega, f_hat, lw=1.2, label=label)
        if f_true is not None:
            ax.plot(omega, f_true, lw=1.0, ls="--", color="0.3", label="truth")
            ax.legend()
        ax.set_xlim(0.0, np.pi)
        ax.set_xticks([0, np.pi / 2, np.pi], ["0", r"$\pi/2$", r"$\pi$"])
        ax.set_xlabel(r"$\omega$")
        ax.set_ylabel(r"$f(\omega)$")
        return _save(fig, path)


def covariance_plot(first_row, path, lags: int | None = None):
    """Estimated autocovariances ``sigma_k`` against lag."""
    row = np.asarray(first_row, dtype=float)
    lags = row.size if lags is None else min(lags, row.size)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.axhline(0.0, lw=0.6, color="0.6")
        ax.plot(np.arange(lags), row[:lags], lw=1.0)
        ax.set_xlabel("lag k")
        ax.set_ylabel(r"$\hat\sigma_k$")
        return _save(fig, path)


def error_bars(methods, processes, means, sds, path, ylabel: str):
    """Grouped bars of Monte Carlo mean errors (log scale), one group per process."""
    means = np.asarray(means, dtype=float)
    sds = np.asarray(sds, dtype=float)
    n_m, n_p = means.shape
    width = 0.8 / n_m
    x = np.arange(n_p)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(1.6 + 1.4 * n_p, 3.6))
        for i, m in enumerate(methods):
            err = np.where(np.isfinite(sds[i]), sds[i], 0.0)
            ax.bar(x + (i - (n_m - 1) / 2) * width, means[i], width, yerr=err,
                   capsize=2, label=m, error_kw={"lw": 0.6})
        ax.set_yscale("log")
        ax.set_xticks(x, processes)
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=7, ncol=min(n_m, 3), loc="upper center", bbox_to_anchor=(0.5, -0.12))
        return _save(fig, path)
