import numpy as np
import pytest

from fraclap import cli
from fraclap.numerics import ConvergenceError


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_usage_errors(capsys):
    code, _, err = run(capsys)
    assert code == 1 and "usage" in err
    assert run(capsys, "integral", "--s", "0.5", "--n", "8", "--bogus")[0] == 1
    assert run(capsys, "integral", "--s", "1.5", "--n", "8")[0] == 1
    assert run(capsys, "study", "--s", "0.5", "--levels", "")[0] == 1
    assert run(capsys, "dt-integral", "--s", "0.5", "--n", "8", "--domain", "square")[0] == 1


def test_numerical_failure(capsys, monkeypatch):
    import fraclap.integral_fem as ifem

    def boom(*a, **k):
        raise ConvergenceError("no convergence", 1.0)
    monkeypatch.setattr(ifem, "solve_integral", boom)
    code, _, err = run(capsys, "integral", "--s", "0.5", "--n", "8")
    assert code == 2 and "numerical failure" in err


def test_integral_dump_symmetric(capsys, tmp_path):
    out = tmp_path / "sol.csv"
    assert run(capsys, "integral", "--s", "0.5", "--domain", "interval", "--n", "8",
               "--out", str(out))[0] == 0
    data = np.loadtxt(out, delimiter=",")
    assert data.shape == (7, 2)
    assert np.allclose(data[:, 0], -data[::-1, 0])
    assert np.allclose(data[:, 1], data[::-1, 1], rtol=1e-10)


@pytest.mark.parametrize("cmd", [
    ["integral", "--s", "0.4", "--domain", "disk", "--n", "3"],
    ["spectral-sinc", "--s", "0.4", "--domain", "square", "--n", "6"],
    ["dt-integral", "--s", "0.4", "--n", "16"],
    ["extension", "--s", "0.4", "--n", "8", "--format", "json"],
])
def test_deterministic_across_threads(capsys, cmd):
    c1, a, _ = run(capsys, *cmd, "--threads", "1")
    c2, b, _ = run(capsys, *cmd, "--threads", "4")
    assert c1 == c2 == 0
    assert a == b and a


def test_study_csv(capsys):
    code, out, _ = run(capsys, "study", "--s", "0.5", "--levels", "8,16,32", "--metric", "energy")
    assert code == 0
    lines = out.splitlines()
    assert lines[1].startswith("# fitted_rate=")
    assert len(lines) == 6
