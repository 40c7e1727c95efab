"""Command-line interface.

Subcommands: ``estimate``, ``precision``, ``density``, ``diagnose``,
``whittle`` (work on a headerless CSV sample, one observation vector per
row) and ``simulate`` (Monte Carlo benchmark).

Exit codes: 0 success, 1 I/O failure, 2 usage or invalid configuration,
3 data error (unparsable or degenerate input), 4 numerical non-convergence
(warnings count only with ``--strict``).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .estimator import (
    SELECTORS,
    EstimatorConfig,
    QuadratureWarning,
    dct_whittle_nll,
    estimate_spectral_density,
    qq_data,
    spectral_to_covariance,
    spectral_to_precision,
    whittle_nll,
)
from .simulation import (
    INNOVATIONS,
    METHOD_LABELS,
    PROCESSES,
    SCENARIOS,
    ScenarioError,
    ScenarioSpec,
    run_monte_carlo,
)
from .toeplitz import NotConvergedError, ToeplitzMatrix
from .vst import DegenerateDataError

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3, 4
THREADS_ENV = "VSTOEPLITZ_THREADS"
SCENARIO_DIR = Path(__file__).parent / "scenarios"

log = logging.getLogger("vstoeplitz")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# input -------------------------------------------------------------------

def read_sample(path) -> np.ndarray:
    """Headerless numeric CSV -> ``n x p`` array; errors name row and column."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_IO) from None
    rows = []
    with fh:
        for r, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            vals = []
            for c, cell in enumerate(rec, start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise CliError(f"{path}: row {r}, column {c}: cannot parse {cell!r}",
                                   EXIT_DATA) from None
                if not np.isfinite(vals[-1]):
                    raise CliError(f"{path}: row {r}, column {c}: non-finite value", EXIT_DATA)
            if rows and len(vals) != len(rows[0]):
                raise CliError(f"{path}: row {r}: expected {len(rows[0])} columns, "
                               f"found {len(vals)}", EXIT_DATA)
            rows.append(vals)
    if not rows:
        raise CliError(f"{path}: no data", EXIT_DATA)
    return np.array(rows)


def _write_columns(path, header, columns):
    data = np.column_stack(columns)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in data:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def _outdir(args) -> Path:
    out = Path(args.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create {out}: {exc.strerror}", EXIT_IO) from None
    return out


def _config(args, **overrides) -> EstimatorConfig:
    kw = dict(
        T=getattr(args, "T", None), upsilon=args.upsilon, q=args.q, selector=args.selector, h=args.h,
        h_min=args.h_min, h_max=args.h_max, h_grid_size=args.h_grid_size,
        eval_grid_size=args.eval_grid_size, smoothness_hint=args.smoothness_hint,
        long_memory=args.long_memory, remainder=args.remainder,
    )
    kw.update(overrides)
    try:
        return EstimatorConfig(**kw)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _int_list(text):
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _name_list(choices):
    def parse(text):
        vals = [x.strip() for x in text.split(",") if x.strip()]
        bad = [v for v in vals if v not in choices]
        if bad or not vals:
            raise argparse.ArgumentTypeError(
                f"invalid choice(s) {bad or text!r}; choose from {', '.join(choices)}")
        return vals
    return parse


# commands -----------------------------------------------------------------

def _estimate(args):
    Y = read_sample(args.input)
    cfg = _config(args)
    return Y, estimate_spectral_density(Y, cfg)


def _provenance(est, args, extra=None):
    prov = dict(est.provenance)
    prov["version"] = __version__
    prov["input"] = str(args.input)
    if extra:
        prov.update(extra)
    return prov


def _density_outputs(est, out, G, plot, stem="density"):
    omega = np.pi * np.arange(G) / (G - 1)
    f = est(omega)
    _write_columns(out / f"{stem}.csv", ["omega", "f"], [omega, f])
    if plot:
        from .plotting import density_plot

        density_plot(omega, f, out / f"{stem}.png")


def cmd_estimate(args) -> int:
    Y, est = _estimate(args)
    out = _outdir(args)
    p = Y.shape[1]
    sigma = spectral_to_covariance(est, p)
    sigma.to_csv(out / "sigma.csv")
    written = ["sigma.csv"]
    if args.precision:
        spectral_to_precision(est, p).to_csv(out / "precision.csv")
        written.append("precision.csv")
    if args.density_grid:
        _density_outputs(est, out, args.density_grid, args.plot)
        written.append("density.csv")
    if args.plot:
        from .plotting import covariance_plot

        covariance_plot(sigma.first_row, out / "covariance.png", lags=min(p, 200))
    with open(out / "provenance.json", "w") as fh:
        json.dump(_provenance(est, args, {"outputs": written}), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"estimate: p={p} n={Y.shape[0]} T={est.T} h={est.log_fit.h:.6g} "
          f"sigma0={sigma.first_row[0]:.6g} -> {out}")
    return EXIT_OK


def cmd_precision(args) -> int:
    Y, est = _estimate(args)
    out = _outdir(args)
    omega = spectral_to_precision(est, Y.shape[1])
    omega.to_csv(out / "precision.csv")
    with open(out / "provenance.json", "w") as fh:
        json.dump(_provenance(est, args, {"outputs": ["precision.csv"]}), fh,
                  indent=2, sort_keys=True)
        fh.write("\n")
    print(f"precision: p={Y.shape[1]} omega0={omega.first_row[0]:.6g} -> {out}")
    return EXIT_OK


def cmd_density(args) -> int:
    Y, est = _estimate(args)
    out = _outdir(args)
    _density_outputs(est, out, args.grid, args.plot)
    with open(out / "provenance.json", "w") as fh:
        json.dump(_provenance(est, args, {"outputs": ["density.csv"], "grid": args.grid}),
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"density: {args.grid} points on [0, pi] -> {out / 'density.csv'}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    Y = read_sample(args.input)
    out = _outdir(args)
    for T in args.T_list:
        cfg = _config(args, T=T)
        pairs = qq_data(Y, cfg, detrend=not args.no_detrend)
        T = pairs.shape[0]
        name = f"qq_T{T}.csv"
        _write_columns(out / name, ["theoretical", "sample"], [pairs[:, 0], pairs[:, 1]])
        dev = float(np.max(np.abs(pairs[:, 1] - pairs[:, 0])))
        if args.plot:
            from .plotting import qq_plot

            qq_plot(pairs, out / f"qq_T{T}.png", title=f"T = {T}")
        print(f"diagnose: T={T} max|sample-theoretical|={dev:.4f} -> {out / name}")
    return EXIT_OK


def cmd_whittle(args) -> int:
    Y = read_sample(args.input)
    if args.covariance:
        try:
            t = ToeplitzMatrix.from_csv(args.covariance)
        except OSError as exc:
            raise CliError(f"cannot read {args.covariance}: {exc.strerror}", EXIT_IO) from None
        except ValueError as exc:
            raise CliError(str(exc), EXIT_DATA) from None
        f, source = t.symbol, str(args.covariance)
    else:
        f, source = estimate_spectral_density(Y, _config(args)), "estimate"
    try:
        res = {"dct_whittle_nll": dct_whittle_nll(Y, f), "whittle_nll": whittle_nll(Y, f),
               "density": source, "n": Y.shape[0], "p": Y.shape[1]}
    except ValueError as exc:
        raise CliError(str(exc), EXIT_DATA) from None
    text = json.dumps(res, indent=2, sort_keys=True)
    if args.output:
        Path(args.output).write_text(text + "\n")
    print(text)
    return EXIT_OK


def _scenario(args) -> ScenarioSpec:
    if args.scenario:
        path = Path(args.scenario)
        if not path.exists() and (SCENARIO_DIR / path.name).exists():
            path = SCENARIO_DIR / path.name
        try:
            base = ScenarioSpec.from_json(path).to_dict()
        except OSError as exc:
            raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_IO) from None
    else:
        base = ScenarioSpec(**SCENARIOS[args.preset]).to_dict()
    for flag, key in [("p", "p"), ("n", "n"), ("reps", "reps"), ("seed", "seed"),
                      ("innovation", "innovation"), ("process", "processes"),
                      ("methods", "methods"), ("T", "T"), ("q", "q"),
                      ("cv_splits", "cv_splits"), ("taper_norm", "taper_norm")]:
        val = getattr(args, flag)
        if val is not None:
            base[key] = val
    return ScenarioSpec.from_dict(base)


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    out = _outdir(args)
    threads = args.threads if args.threads is not None else _env_threads()

    def progress(r):
        if not args.quiet:
            print(f"  replication {r + 1}/{sc.reps}", file=sys.stderr, flush=True)

    report = run_monte_carlo(sc, threads=threads, progress=progress)
    stem = args.name or f"scenario_{sc.label}"
    report.to_json(out / f"{stem}.json")
    report.to_csv(out / f"{stem}.csv")
    if args.plot:
        from .plotting import error_bars

        labels = [METHOD_LABELS[m] for m in sc.methods]
        for key, ylabel in [("sigma_err", r"100 $\|\hat\Sigma-\Sigma\|^2$"),
                            ("f_err", r"100 $\|\hat f-f\|_2^2$")]:
            means = [[report.cell(m, pr)[f"{key}_mean"] for pr in sc.processes] for m in sc.methods]
            sds = [[report.cell(m, pr)[f"{key}_sd"] for pr in sc.processes] for m in sc.methods]
            error_bars(labels, list(sc.processes), means, sds, out / f"{stem}_{key}.png", ylabel)
    failures = sum(r["n_failed"] for r in report.rows)
    print(f"simulate: scenario {sc.label} p={sc.p} n={sc.n} reps={sc.reps} "
          f"failures={failures} -> {out / stem}.{{json,csv}}")
    return EXIT_OK


def _env_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return 1
    try:
        v = int(raw)
    except ValueError:
        raise CliError(f"{THREADS_ENV} must be a positive integer, got {raw!r}", EXIT_USAGE) from None
    if v < 1:
        raise CliError(f"{THREADS_ENV} must be a positive integer, got {raw!r}", EXIT_USAGE)
    return v


# parser ---------------------------------------------------------------------

def _estimator_flags(p, with_T=True):
    g = p.add_argument_group("estimator")
    if with_T:
        g.add_argument("--T", type=_positive_int, help="number of bins (default floor(p^upsilon))")
    g.add_argument("--upsilon", type=float, help="bin exponent in (0, 1)")
    g.add_argument("--q", type=_positive_int, default=2, help="penalty order (default 2)")
    g.add_argument("--selector", choices=SELECTORS, default="gcv")
    g.add_argument("--h", type=float, help="smoothing parameter for --selector fixed")
    g.add_argument("--h-min", type=float, default=1e-4)
    g.add_argument("--h-max", type=float, default=1.0)
    g.add_argument("--h-grid-size", type=_positive_int, default=40)
    g.add_argument("--eval-grid-size", type=_positive_int, help="quadrature nodes (power of two)")
    g.add_argument("--smoothness-hint", type=float)
    g.add_argument("--long-memory", action="store_true")
    g.add_argument("--remainder", choices=("spread", "trailing"), default="spread",
                   help="which columns to drop when T does not divide p")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (simulate); accepted everywhere")
    common.add_argument("--threads", type=_positive_int,
                        help=f"worker processes (default ${THREADS_ENV} or 1)")
    common.add_argument("--strict", action="store_true",
                        help="treat numerical convergence warnings as errors (exit 4)")
    common.add_argument("--plot", action="store_true", help="also render PNG figures")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="vstoeplitz", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    for name, helptext in [("estimate", "covariance (and optional precision/density) estimate"),
                           ("precision", "precision matrix estimate"),
                           ("density", "spectral density on a grid")]:
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("input", help="headerless CSV, one sample vector per row")
        sp.add_argument("-o", "--output", required=True, help="output directory")
        _estimator_flags(sp)
        if name == "estimate":
            sp.add_argument("--precision", action="store_true", help="also write precision.csv")
            sp.add_argument("--density-grid", type=_positive_int, metavar="G",
                            help="also write the density at G points")
        if name == "density":
            sp.add_argument("--grid", type=_positive_int, default=512)

    sp = sub.add_parser("diagnose", parents=[common], help="QQ data of the binned log sample")
    sp.add_argument("input")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--T", dest="T_list", type=_int_list, default=None,
                    help="comma-separated bin counts, e.g. 300,500,700")
    sp.add_argument("--no-detrend", action="store_true",
                    help="do not remove the fitted curve before standardizing")
    _estimator_flags(sp, with_T=False)

    sp = sub.add_parser("whittle", parents=[common], help="Whittle and DCT-Whittle likelihoods")
    sp.add_argument("input")
    sp.add_argument("--covariance", help="first-row CSV; its symbol is the density to score")
    sp.add_argument("-o", "--output", help="write the JSON result here as well")
    _estimator_flags(sp)

    sp = sub.add_parser("simulate", parents=[common], help="Monte Carlo benchmark")
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--scenario", help="scenario JSON (bundled: tableA.json, tableB.json, tableC.json)")
    src.add_argument("--preset", choices=sorted(SCENARIOS), default="A")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--name", help="output file stem (default scenario_<label>)")
    sp.add_argument("--process", type=_name_list(PROCESSES))
    sp.add_argument("--methods", type=_name_list(tuple(METHOD_LABELS)))
    sp.add_argument("--p", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--reps", type=int)
    sp.add_argument("--innovation", choices=INNOVATIONS)
    sp.add_argument("--T", type=int)
    sp.add_argument("--q", type=int)
    sp.add_argument("--cv-splits", type=int)
    sp.add_argument("--taper-norm", choices=("spectral", "l1"))
    sp.add_argument("--quiet", action="store_true")
    return ap


COMMANDS = {
    "estimate": cmd_estimate,
    "precision": cmd_precision,
    "density": cmd_density,
    "diagnose": cmd_diagnose,
    "whittle": cmd_whittle,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "diagnose" and args.T_list is None:
        args.T_list = [None]
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", QuadratureWarning)
            code = COMMANDS[args.command](args)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        if args.strict and any(issubclass(w.category, QuadratureWarning) for w in caught):
            print("error: numerical convergence warning with --strict", file=sys.stderr)
            return EXIT_NUMERIC
        return code
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ScenarioError as exc:
        print("error: invalid scenario", file=sys.stderr)
        for prob in exc.problems:
            print(f"  {prob}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateDataError as exc:
        print(f"error: degenerate data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NotConvergedError as exc:
        print(f"error: {exc} (last estimate {exc.estimate:.6g})", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # remaining validation problems (e.g. p too small for the config)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
