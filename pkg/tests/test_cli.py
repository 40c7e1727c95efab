import json
import subprocess
import sys
import warnings

import numpy as np
import pytest

from vstoeplitz import cli
from vstoeplitz.estimator import QuadratureWarning
from vstoeplitz.simulation import sample_gaussian, ProcessSpec
from vstoeplitz.toeplitz import ToeplitzMatrix


def write_csv(path, Y):
    np.savetxt(path, np.atleast_2d(Y), delimiter=",", fmt="%.17g")
    return path


@pytest.fixture
def white_csv(tmp_path):
    Y = np.random.default_rng(0).standard_normal((4, 1024))
    return write_csv(tmp_path / "white.csv", Y)


def test_estimate_white_noise(white_csv, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["estimate", str(white_csv), "-o", str(out)]) == cli.EXIT_OK
    sigma = ToeplitzMatrix.from_csv(out / "sigma.csv")
    assert sigma.p == 1024
    assert abs(sigma.first_row[0] - 1.0) < 0.1
    assert "sigma0=" in capsys.readouterr().out


def test_provenance_echoes_flags(white_csv, tmp_path):
    out = tmp_path / "out"
    code = cli.main(["estimate", str(white_csv), "-o", str(out), "--T", "500", "--q", "2",
                     "--selector", "gcv", "--precision", "--density-grid", "64"])
    assert code == 0
    prov = json.loads((out / "provenance.json").read_text())
    assert prov["T"] == 500 and prov["q"] == 2 and prov["selector"] == "gcv"
    assert prov["outputs"] == ["sigma.csv", "precision.csv", "density.csv"]
    dens = np.loadtxt(out / "density.csv", delimiter=",", skiprows=1)
    assert dens.shape == (64, 2)
    assert dens[0, 0] == 0 and dens[-1, 0] == pytest.approx(np.pi)
    omega = ToeplitzMatrix.from_csv(out / "precision.csv")
    assert omega.first_row[0] > 0


def test_sigma_csv_round_trip_exact(white_csv, tmp_path):
    out = tmp_path / "out"
    cli.main(["estimate", str(white_csv), "-o", str(out)])
    first = ToeplitzMatrix.from_csv(out / "sigma.csv")
    first.to_csv(tmp_path / "again.csv")
    assert (tmp_path / "again.csv").read_bytes() == (out / "sigma.csv").read_bytes()


def test_malformed_csv_names_location(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2,3\n4,x,6\n")
    assert cli.main(["estimate", str(bad), "-o", str(tmp_path / "o")]) == cli.EXIT_DATA
    assert "row 2, column 2" in capsys.readouterr().err


def test_ragged_and_nonfinite_csv(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2,3\n4,5\n")
    assert cli.main(["density", str(bad), "-o", str(tmp_path / "o")]) == cli.EXIT_DATA
    bad.write_text("1,2,nan\n")
    assert cli.main(["density", str(bad), "-o", str(tmp_path / "o")]) == cli.EXIT_DATA


def test_missing_input_is_io_error(tmp_path):
    assert cli.main(["estimate", str(tmp_path / "none.csv"), "-o", str(tmp_path)]) == cli.EXIT_IO


def test_zero_input_is_degenerate(tmp_path, capsys):
    src = write_csv(tmp_path / "c.csv", np.zeros((2, 64)))
    assert cli.main(["estimate", str(src), "-o", str(tmp_path / "o")]) == cli.EXIT_DATA
    assert "degenerate" in capsys.readouterr().err


def test_usage_errors(white_csv, tmp_path):
    with pytest.raises(SystemExit) as info:
        cli.main(["estimate", str(white_csv), "-o", str(tmp_path), "--q", "0"])
    assert info.value.code == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        cli.main(["estimate", str(white_csv), "-o", str(tmp_path), "--selector", "aic"])
    assert info.value.code == cli.EXIT_USAGE


def test_diagnose_three_T(tmp_path, capsys):
    Y = sample_gaussian(ProcessSpec("ar2"), 2000, 2, seed=1)
    src = write_csv(tmp_path / "y.csv", Y)
    out = tmp_path / "qq"
    assert cli.main(["diagnose", str(src), "-o", str(out), "--T", "50,100,200", "--plot"]) == 0
    for T in (50, 100, 200):
        pairs = np.loadtxt(out / f"qq_T{T}.csv", delimiter=",", skiprows=1)
        assert pairs.shape == (T, 2)
        assert np.all(np.diff(pairs[:, 0]) > 0)
        assert (out / f"qq_T{T}.png").stat().st_size > 0
    assert capsys.readouterr().out.count("max|sample-theoretical|") == 3


def test_diagnose_empty_input(tmp_path):
    empty = tmp_path / "e.csv"
    empty.write_text("")
    assert cli.main(["diagnose", str(empty), "-o", str(tmp_path / "o")]) == cli.EXIT_DATA


def test_whittle_with_covariance(tmp_path, capsys):
    Y = np.random.default_rng(1).standard_normal((3, 128))
    src = write_csv(tmp_path / "y.csv", Y)
    ToeplitzMatrix(np.r_[1.0, np.zeros(127)]).to_csv(tmp_path / "cov.csv")
    assert cli.main(["whittle", str(src), "--covariance", str(tmp_path / "cov.csv")]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["p"] == 128 and res["n"] == 3
    # with f = 1 the DCT-Whittle likelihood reduces to the squared norm (orthogonal DCT)
    assert res["dct_whittle_nll"] == pytest.approx(np.sum(Y**2), rel=1e-10)


def _simulate(tmp_path, *extra, name="sim"):
    return cli.main(["simulate", "--preset", "A", "--p", "96", "--n", "2", "--reps", "2",
                     "--T", "24", "--process", "poly", "--quiet", "--name", name,
                     "-o", str(tmp_path), *extra])


def test_simulate_methods_single_row(tmp_path):
    assert _simulate(tmp_path, "--methods", "sample") == 0
    lines = (tmp_path / "sim.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[1].startswith("sample covariance,")
    data = json.loads((tmp_path / "sim.json").read_text())
    assert [r["method"] for r in data["results"]] == ["sample"]


def test_simulate_invalid_scenario(tmp_path, capsys):
    assert _simulate(tmp_path, "--reps", "0") == cli.EXIT_USAGE
    assert "reps" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        _simulate(tmp_path, "--methods", "magic")
    assert info.value.code == cli.EXIT_USAGE


def test_simulate_bundled_scenario_file(tmp_path):
    code = cli.main(["simulate", "--scenario", "tableA.json", "--p", "64", "--n", "2",
                     "--reps", "1", "--T", "20", "--methods", "sample", "--quiet",
                     "-o", str(tmp_path)])
    assert code == 0
    data = json.loads((tmp_path / "scenario_A.json").read_text())
    assert data["scenario"]["processes"] == ["poly", "ar2", "lipschitz"]
    assert data["scenario"]["seed"] == 42


def test_simulate_threads_and_env(tmp_path, monkeypatch):
    _simulate(tmp_path, "--methods", "vst-gcv,sample", "--threads", "1", name="t1")
    _simulate(tmp_path, "--methods", "vst-gcv,sample", "--threads", "2", name="t2")
    monkeypatch.setenv(cli.THREADS_ENV, "2")
    _simulate(tmp_path, "--methods", "vst-gcv,sample", name="env")
    res = [json.loads((tmp_path / f"{s}.json").read_text())["results"] for s in ("t1", "t2", "env")]
    assert res[0] == res[1] == res[2]
    monkeypatch.setenv(cli.THREADS_ENV, "zero")
    assert _simulate(tmp_path, "--methods", "sample") == cli.EXIT_USAGE


def test_simulate_plot(tmp_path):
    assert _simulate(tmp_path, "--methods", "vst-gcv,sample", "--plot") == 0
    assert (tmp_path / "sim_sigma_err.png").stat().st_size > 0
    assert (tmp_path / "sim_f_err.png").stat().st_size > 0


def test_strict_turns_quadrature_warning_into_failure(white_csv, tmp_path, monkeypatch, capsys):
    real = cli.spectral_to_covariance

    def noisy(est, p, **kw):
        warnings.warn("not converged", QuadratureWarning)
        return real(est, p, **kw)

    monkeypatch.setattr(cli, "spectral_to_covariance", noisy)
    assert cli.main(["estimate", str(white_csv), "-o", str(tmp_path / "a")]) == 0
    assert "warning: not converged" in capsys.readouterr().err
    code = cli.main(["estimate", str(white_csv), "-o", str(tmp_path / "b"), "--strict"])
    assert code == cli.EXIT_NUMERIC


def test_estimate_plot_outputs(white_csv, tmp_path):
    out = tmp_path / "p"
    assert cli.main(["estimate", str(white_csv), "-o", str(out), "--plot",
                     "--density-grid", "128"]) == 0
    assert (out / "covariance.png").stat().st_size > 0
    assert (out / "density.png").stat().st_size > 0


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "vstoeplitz", "--version"],
                         capture_output=True, text=True, check=True)
    assert res.stdout.strip() == "0.1.0"
