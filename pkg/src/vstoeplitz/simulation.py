"""Benchmark processes, exact samplers, error metrics and the Monte Carlo harness."""
from __future__ import annotations

import json
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft
import scipy.linalg
import scipy.signal
from scipy.integrate import trapezoid
from scipy.special import gammaln, gammasgn
from threadpoolctl import threadpool_limits

from . import baselines, spline
from .estimator import (
    EstimatorConfig,
    SpectralDensityEstimate,
    prepare_regression,
    spectral_to_covariance,
    wrap_fit,
)
from .toeplitz import ToeplitzMatrix, spectral_norm

log = logging.getLogger(__name__)

PROCESSES = ("poly", "ar2", "lipschitz")
INNOVATIONS = ("gaussian", "gamma", "uniform")
SIGMA0 = 1.44
AR_COEFS = (0.1, -0.1)
AR_INNOVATION_VAR = 1.44
LIPSCHITZ_EXPONENT = 1.7
POLY_EXPONENT = 5.1
POLY_TERMS = 4000
SQRT_DENSE_LIMIT = 5000
EMBED_DENSE_LIMIT = 2048
L2_GRID = 4096
COV_NORM_TOL = 1e-6


# processes -------------------------------------------------------------------------

@dataclass(frozen=True)
class ProcessSpec:
    """One of the benchmark processes; ``white`` (i.i.d. with variance ``scale``) is for tests."""

    kind: str
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in PROCESSES + ("white",):
            raise ValueError(f"unknown process {self.kind!r}")


def _poly_cov(k):
    return SIGMA0 * (1.0 + np.abs(k)) ** (-POLY_EXPONENT)


def _ar2_cov(p):
    a1, a2 = AR_COEFS
    s = np.empty(max(p, 2))
    s[0] = AR_INNOVATION_VAR * (1 - a2) / ((1 + a2) * ((1 - a2) ** 2 - a1**2))
    s[1] = a1 * s[0] / (1 - a2)
    for d in range(2, s.size):
        s[d] = a1 * s[d - 1] + a2 * s[d - 2]
    return s[:p]


def _lipschitz_cov(k):
    # int_0^1 |cos(pi x)|^a cos(k pi x) dx vanishes for odd k and has a
    # gamma-function closed form for even k
    a = LIPSCHITZ_EXPONENT
    k = np.asarray(k)
    j = k / 2.0
    even = k % 2 == 0
    arg1, arg2 = 1 + a / 2 + j, 1 + a / 2 - j
    mag = np.exp(gammaln(a + 1) - a * np.log(2.0) - gammaln(arg1) - gammaln(arg2))
    val = np.where(even, mag * gammasgn(arg1) * gammasgn(arg2), 0.0)
    return SIGMA0 * (val + 0.45 * (k == 0))


def true_covariance(spec: ProcessSpec, p: int) -> ToeplitzMatrix:
    if p < 1:
        raise ValueError("p must be >= 1")
    k = np.arange(p)
    if spec.kind == "poly":
        row = _poly_cov(k)
    elif spec.kind == "ar2":
        row = _ar2_cov(p)
    elif spec.kind == "lipschitz":
        row = _lipschitz_cov(k)
    else:
        row = np.zeros(p)
        row[0] = spec.scale
    return ToeplitzMatrix(row)


class _Density:
    def __init__(self, spec: ProcessSpec):
        self.spec = spec

    def __call__(self, omega):
        w = np.asarray(omega, dtype=float)
        kind = self.spec.kind
        if kind == "ar2":
            a1, a2 = AR_COEFS
            z = np.exp(-1j * w)
            return AR_INNOVATION_VAR / np.abs(1 - a1 * z - a2 * z**2) ** 2
        if kind == "lipschitz":
            return SIGMA0 * (np.abs(np.sin(w + 0.5 * np.pi)) ** LIPSCHITZ_EXPONENT + 0.45)
        if kind == "white":
            return np.full_like(w, self.spec.scale)
        # polynomial decay: cosine series; tail beyond POLY_TERMS is below 1e-14
        k = np.arange(1, POLY_TERMS)
        sig = _poly_cov(k)
        flat = np.atleast_1d(w).ravel()
        out = np.empty(flat.size)
        for s in range(0, flat.size, 512):
            out[s : s + 512] = SIGMA0 + 2.0 * np.cos(np.outer(flat[s : s + 512], k)) @ sig
        return out.reshape(np.shape(w))

    def on_grid(self, M: int) -> np.ndarray:
        if self.spec.kind != "poly":
            return self(np.pi * np.arange(M + 1) / M)
        step = -(-POLY_TERMS // M)
        L = M * step
        x = np.zeros(L + 1)
        x[:POLY_TERMS] = _poly_cov(np.arange(POLY_TERMS))
        return scipy.fft.dct(x, type=1)[::step]


def true_density(spec: ProcessSpec):
    """Spectral density ``f`` on ``[0, pi]`` as a vectorized callable."""
    return _Density(spec)


# sampling ----------------------------------------------------------------------

def _as_cov(source, p):
    return source if isinstance(source, ToeplitzMatrix) else true_covariance(source, p)


def sample_gaussian(source, p: int, n: int, seed, allow_clip: bool = False) -> np.ndarray:
    """``n`` exact draws from ``N(0, Sigma)`` by circulant embedding.

    ``source`` is a :class:`ProcessSpec` or a :class:`ToeplitzMatrix`.
    """
    if p < 2:
        raise ValueError("p must be >= 2")
    cov = _as_cov(source, p)
    rng = np.random.default_rng(seed)
    lam = cov.embedding_eigenvalues
    N = 2 * p - 2
    if lam.min() < -1e-10 * lam.max():
        if p <= EMBED_DENSE_LIMIT:
            return rng.standard_normal((n, p)) @ _sqrtm(cov.first_row.tobytes(), p)
        if not allow_clip:
            raise ValueError("circulant embedding is not nonnegative definite")
        log.warning("clipping negative embedding eigenvalues (min %.3g)", lam.min())
    lam = np.clip(lam, 0.0, None)
    full = np.concatenate([lam, lam[-2:0:-1]])
    pairs = -(-n // 2)
    xi = rng.standard_normal((pairs, N)) + 1j * rng.standard_normal((pairs, N))
    X = np.fft.fft(np.sqrt(full / N) * xi, axis=1)
    out = np.concatenate([X.real[:, :p], X.imag[:, :p]])[:n]
    return np.ascontiguousarray(out)


@lru_cache(maxsize=2)
def _sqrtm(row_bytes: bytes, p: int) -> np.ndarray:
    row = np.frombuffer(row_bytes, dtype=float)
    with threadpool_limits(1):
        vals, vecs = np.linalg.eigh(scipy.linalg.toeplitz(row))
    if vals.min() < -1e-8 * vals.max():
        raise ValueError("covariance is not positive semi-definite")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def _innovations(rng, shape, innovation):
    if innovation == "gaussian":
        return rng.standard_normal(shape)
    if innovation == "gamma":
        return rng.gamma(2.0, 2.0**-0.5, size=shape) - np.sqrt(2.0)
    if innovation == "uniform":
        return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=shape)
    raise ValueError(f"unknown innovation {innovation!r}")


def sample_nongaussian(
    spec: ProcessSpec, p: int, n: int, seed, innovation: str = "gamma",
    method: str = "auto", ar2_recursion: bool = False,
) -> np.ndarray:
    """Linear process ``Y = Sigma^{1/2} Z`` with standardized i.i.d. ``Z``.

    ``method="sqrtm"`` uses the dense symmetric square root (``p`` up to 5000);
    ``"circulant"`` uses the square root of the circulant embedding, which
    also reproduces ``Sigma`` exactly and has no size limit. With
    ``ar2_recursion`` the AR(2) process is instead generated from its
    recursion driven by the innovations (burn-in ``10 sqrt(p)``).
    """
    rng = np.random.default_rng(seed)
    if ar2_recursion:
        if spec.kind != "ar2":
            raise ValueError("ar2_recursion applies to the ar2 process only")
        burn = int(math.ceil(10 * math.sqrt(p)))
        e = _innovations(rng, (n, p + burn), innovation) * math.sqrt(AR_INNOVATION_VAR)
        a1, a2 = AR_COEFS
        return scipy.signal.lfilter([1.0], [1.0, -a1, -a2], e, axis=1)[:, burn:]
    cov = true_covariance(spec, p)
    if method == "auto":
        method = "sqrtm" if p <= SQRT_DENSE_LIMIT else "circulant"
    if method == "sqrtm":
        if p > SQRT_DENSE_LIMIT:
            raise ValueError(f"dense square root limited to p <= {SQRT_DENSE_LIMIT}")
        return _innovations(rng, (n, p), innovation) @ _sqrtm(cov.first_row.tobytes(), p)
    if method == "circulant":
        lam = np.clip(cov.embedding_eigenvalues, 0.0, None)
        N = 2 * p - 2
        Z = _innovations(rng, (n, N), innovation)
        return np.fft.irfft(np.fft.rfft(Z, axis=1) * np.sqrt(lam), n=N, axis=1)[:, :p]
    raise ValueError(f"unknown method {method!r}")


def draw_sample(spec: ProcessSpec, p: int, n: int, seed, innovation: str = "gaussian"):
    if innovation == "gaussian":
        return sample_gaussian(spec, p, n, seed)
    return sample_nongaussian(spec, p, n, seed, innovation)


# metrics ---------------------------------------------------------------------

def _on_grid(f, M):
    if hasattr(f, "on_grid"):
        return np.asarray(f.on_grid(M), dtype=float)
    return np.asarray(f(np.pi * np.arange(M + 1) / M), dtype=float)


def l2_density_error(f_hat, f_true, grid: int = L2_GRID) -> float:
    """``int_0^1 (f_hat(pi x) - f(pi x))^2 dx`` by the trapezoid rule on ``grid`` points."""
    M = grid - 1
    diff = _on_grid(f_hat, M) - _on_grid(f_true, M)
    return float(trapezoid(diff**2, dx=1.0 / M))


def covariance_error(sigma_hat: ToeplitzMatrix, sigma: ToeplitzMatrix) -> float:
    """Squared spectral norm of the difference."""
    return spectral_norm(sigma_hat - sigma, tol=COV_NORM_TOL) ** 2


# Monte Carlo -----------------------------------------------------------------------

METHOD_LABELS = {
    "vst-gcv": "our method (GCV)",
    "vst-ml": "our method (ML)",
    "taper-cv": "tapering (CV)",
    "taper-semi-oracle": "tapering (semi-oracle)",
    "sample": "sample covariance",
    "vst-oracle": "our method (oracle)",
    "taper-oracle": "tapering (oracle)",
}
DEFAULT_SUBSERIES = {"poly": 30, "ar2": 15, "lipschitz": 15}


@dataclass(frozen=True)
class ScenarioSpec:
    label: str
    p: int
    n: int
    reps: int = 100
    seed: int = 42
    innovation: str = "gaussian"
    processes: tuple = PROCESSES
    methods: tuple = ("vst-gcv", "vst-ml", "sample")
    T: int | None = None
    q: int = 2
    cv_splits: int = 30
    taper_norm: str = "l1"
    subseries: dict = field(default_factory=lambda: dict(DEFAULT_SUBSERIES))

    def __post_init__(self):
        errors = []
        if not isinstance(self.p, int) or self.p < 8:
            errors.append(f"p: must be an integer >= 8, got {self.p!r}")
        if not isinstance(self.n, int) or self.n < 1:
            errors.append(f"n: must be an integer >= 1, got {self.n!r}")
        if not isinstance(self.reps, int) or self.reps < 1:
            errors.append(f"reps: must be an integer >= 1, got {self.reps!r}")
        if not isinstance(self.seed, int):
            errors.append(f"seed: must be an integer, got {self.seed!r}")
        if self.innovation not in INNOVATIONS:
            errors.append(f"innovation: must be one of {INNOVATIONS}, got {self.innovation!r}")
        bad = [x for x in self.processes if x not in PROCESSES]
        if bad or not self.processes:
            errors.append(f"process: unknown or empty {list(self.processes)!r}")
        badm = [x for x in self.methods if x not in METHOD_LABELS]
        if badm or not self.methods:
            errors.append(f"methods: unknown or empty {list(self.methods)!r}")
        if self.taper_norm not in ("spectral", "l1"):
            errors.append(f"taper_norm: must be 'spectral' or 'l1', got {self.taper_norm!r}")
        if self.T is not None and (not isinstance(self.T, int) or not 2 <= self.T <= max(self.p, 2)):
            errors.append(f"T: must satisfy 2 <= T <= p, got {self.T!r}")
        if errors:
            raise ScenarioError(errors)
        object.__setattr__(self, "processes", tuple(self.processes))
        object.__setattr__(self, "methods", tuple(self.methods))

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        d = dict(d)
        known = set(cls.__dataclass_fields__) | {"process"}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ScenarioError([f"{k}: unknown field" for k in unknown])
        if "process" in d:
            proc = d.pop("process")
            d["processes"] = (proc,) if isinstance(proc, str) else tuple(proc)
        for key in ("p", "n"):
            if key not in d:
                raise ScenarioError([f"{key}: required"])
        d.setdefault("label", "custom")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ScenarioSpec":
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ScenarioError([f"<file>: invalid JSON ({exc})"]) from None
        if not isinstance(raw, dict):
            raise ScenarioError(["<file>: top level must be an object"])
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["processes"] = list(self.processes)
        d["methods"] = list(self.methods)
        return d


class ScenarioError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid scenario: " + "; ".join(self.problems))


SCENARIOS = {
    "A": dict(label="A", p=5000, n=1, T=500),
    "B": dict(label="B", p=1000, n=50, T=500),
    "C": dict(label="C", p=5000, n=10, T=500),
}


def scenario(label: str, **overrides) -> ScenarioSpec:
    return ScenarioSpec(**dict(SCENARIOS[label], **overrides))


def _vst_estimate(Y, sc: ScenarioSpec, selector: str):
    cfg = EstimatorConfig(T=sc.T, q=sc.q, selector=selector)
    from .estimator import estimate_spectral_density

    est = estimate_spectral_density(Y, cfg)
    return spectral_to_covariance(est, Y.shape[1]), est


def _vst_oracle(Y, sc, truth, f_true):
    # smoothing parameter minimizing the true L2 density error
    cfg = EstimatorConfig(T=sc.T, q=sc.q)
    data, binned = prepare_regression(Y, cfg)

    def est_for(h):
        return wrap_fit(spline.fit(data, h, sc.q), binned, Y.shape, "oracle")

    grid = cfg.h_grid()
    errs = [l2_density_error(est_for(h), f_true) for h in grid]
    est = est_for(grid[int(np.argmin(errs))])
    return spectral_to_covariance(est, Y.shape[1]), est


def _run_method(name, Y, sc, process, truth, f_true, seed):
    p = Y.shape[1]
    if name == "vst-gcv":
        return _vst_estimate(Y, sc, "gcv")
    if name == "vst-ml":
        return _vst_estimate(Y, sc, "ml")
    if name == "vst-oracle":
        return _vst_oracle(Y, sc, truth, f_true)
    S = baselines.sample_toeplitz(Y)
    if name == "sample":
        sel_k = None
    elif name == "taper-cv":
        sel_k = baselines.cv_select_taper(
            Y, splits=sc.cv_splits, norm=sc.taper_norm, seed=seed, candidates="thinned").k
    elif name == "taper-semi-oracle":
        sel_k = baselines.subseries_cv_select_taper(
            Y[0], l=sc.subseries.get(process, 30), splits=sc.cv_splits,
            norm=sc.taper_norm, seed=seed).k
    elif name == "taper-oracle":
        sel_k = baselines.oracle_taper(Y, truth, candidates="thinned").k
    else:
        raise ValueError(f"unknown method {name!r}")
    est = S if sel_k is None else baselines.taper(S, sel_k)
    return est, baselines.symbol_density(est)


def replication_seed(master: int, rep: int, process_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([master, rep, process_index])


def run_replication(sc: ScenarioSpec, rep: int) -> list[dict]:
    """All methods on all processes for one replication; pure given ``(sc, rep)``."""
    rows = []
    with threadpool_limits(1):
        for pi, process in enumerate(sc.processes):
            spec = ProcessSpec(process)
            truth = true_covariance(spec, sc.p)
            f_true = true_density(spec)
            ss = replication_seed(sc.seed, rep, pi)
            data_seed, cv_seed = ss.spawn(2)
            Y = draw_sample(spec, sc.p, sc.n, data_seed, sc.innovation)
            cv_int = int(cv_seed.generate_state(1)[0])
            for name in sc.methods:
                t0 = time.perf_counter()
                row = {"rep": rep, "process": process, "method": name}
                try:
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore")
                        est, dens = _run_method(name, Y, sc, process, truth, f_true, cv_int)
                    elapsed = time.perf_counter() - t0
                    row["sigma_err"] = 100.0 * covariance_error(est, truth)
                    row["f_err"] = 100.0 * l2_density_error(dens, f_true)
                    row["error"] = None
                except Exception as exc:  # recorded, not fatal
                    elapsed = time.perf_counter() - t0
                    row["sigma_err"] = float("nan")
                    row["f_err"] = float("nan")
                    row["error"] = f"{type(exc).__name__}: {exc}"
                row["time"] = elapsed
                rows.append(row)
    return rows


def _rep_worker(args):
    sc_dict, rep = args
    return run_replication(ScenarioSpec.from_dict(sc_dict), rep)


@dataclass
class McReport:
    scenario: ScenarioSpec
    rows: list  # per (method, process) aggregates
    raw: list = field(repr=False, default_factory=list)

    def cell(self, method: str, process: str) -> dict:
        for r in self.rows:
            if r["method"] == method and r["process"] == process:
                return r
        raise KeyError((method, process))

    def to_json_dict(self) -> dict:
        results, timing = [], []
        for r in self.rows:
            results.append({k: v for k, v in r.items() if k != "time_mean"})
            timing.append({"method": r["method"], "process": r["process"],
                           "time_mean": r["time_mean"]})
        return {"scenario": self.scenario.to_dict(), "results": results, "timing": timing}

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(_finite(self.to_json_dict()), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def to_csv(self, path) -> None:
        """Table layout: one row per method, two error columns per process, time last."""
        procs = self.scenario.processes
        header = ["method"]
        for pr in procs:
            header += [f"{pr}_sigma_err", f"{pr}_f_err"]
        header += ["time_sec", "failures"]
        lines = [",".join(header)]
        for m in self.scenario.methods:
            cells = [METHOD_LABELS[m]]
            times, fails = [], 0
            for pr in procs:
                c = self.cell(m, pr)
                cells += [_fmt(c["sigma_err_mean"]), _fmt(c["f_err_mean"])]
                times.append(c["time_mean"])
                fails += c["n_failed"]
            cells += [_fmt(float(np.mean(times)) if times else float("nan")), str(fails)]
            lines.append(",".join(f'"{x}"' if "," in x else x for x in cells))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _fmt(x):
    return "nan" if not np.isfinite(x) else f"{x:.3f}"


def _finite(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    return obj


def aggregate(sc: ScenarioSpec, raw: list) -> list[dict]:
    rows = []
    for process in sc.processes:
        for m in sc.methods:
            sel = [r for r in raw if r["method"] == m and r["process"] == process]
            ok = [r for r in sel if r["error"] is None]
            s = np.array([r["sigma_err"] for r in ok])
            f = np.array([r["f_err"] for r in ok])
            rows.append({
                "method": m,
                "process": process,
                "sigma_err_mean": float(s.mean()) if s.size else float("nan"),
                "sigma_err_sd": float(s.std(ddof=1)) if s.size > 1 else float("nan"),
                "f_err_mean": float(f.mean()) if f.size else float("nan"),
                "f_err_sd": float(f.std(ddof=1)) if f.size > 1 else float("nan"),
                "time_mean": float(np.mean([r["time"] for r in sel])) if sel else float("nan"),
                "n_ok": len(ok),
                "n_failed": len(sel) - len(ok),
                "errors": sorted({r["error"] for r in sel if r["error"]}),
            })
    return rows


def run_monte_carlo(sc: ScenarioSpec, methods=None, threads: int = 1, progress=None) -> McReport:
    """Run ``sc.reps`` replications, optionally across ``threads`` worker processes.

    Replication ``r`` draws its data from ``SeedSequence([seed, r, process])``,
    so results do not depend on execution order or worker count.
    """
    if methods is not None:
        if not methods:
            raise ValueError("methods must be nonempty")
        sc = ScenarioSpec.from_dict(dict(sc.to_dict(), methods=list(methods)))
    reps = range(sc.reps)
    raw = []
    if threads <= 1:
        for r in reps:
            raw.extend(run_replication(sc, r))
            if progress:
                progress(r)
    else:
        args = [(sc.to_dict(), r) for r in reps]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for r, rows in zip(reps, pool.map(_rep_worker, args)):
                raw.extend(rows)
                if progress:
                    progress(r)
    for r in raw:
        if r["error"]:
            log.warning("rep %d %s/%s failed: %s", r["rep"], r["process"], r["method"], r["error"])
    return McReport(sc, aggregate(sc, raw), raw)
