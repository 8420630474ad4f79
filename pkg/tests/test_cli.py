import json
import subprocess
import sys

import numpy as np
import pytest

from anisoparab.cli import main
from anisoparab.profiles import GridFunction


def test_lambda_and_eigen(capsys):
    assert main(["lambda", "--alphas", "1,4", "--exponents", "2,2"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(2.0, rel=1e-13)
    assert main(["eigen", "--radius", "1", "--dim", "3"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(np.pi**2, abs=1e-8)


def test_rearrange(tmp_path, capsys):
    GridFunction(3, 1, 0.5, 1.0, np.array([[3.0], [1.0], [2.0]])).to_csv(tmp_path / "f.csv")
    assert main(["rearrange", str(tmp_path / "f.csv")]) == 0
    out = capsys.readouterr().out.split()
    assert out[0] == "s,level" and out[1:] == ["0.5,3.0", "1.0,2.0", "1.5,1.0"]
    assert main(["rearrange", str(tmp_path / "f.csv"), "--out", str(tmp_path / "p.csv")]) == 0
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "s,level"


def test_parabolic_and_compare(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["parabolic", "--preset", "zero", "--out", str(out)]) == 0
    assert (out / "report.json").exists()
    steps = out / "steps"
    assert main(["compare", str(steps / "anisotropic"), str(steps / "symmetrized"), "--out", str(tmp_path / "cmp")]) == 0
    assert json.loads((tmp_path / "cmp" / "report.json").read_text())["summary"]["passed"]


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"coefficients": {"alphas": [1, 1], "exponents": [1, 1]}}))
    assert main(["parabolic", "--config", str(bad)]) == 2
    assert "coefficients.exponents" in capsys.readouterr().out
    assert main(["parabolic"]) == 2
    # an impossible margin makes the comparison fail
    cfg = tmp_path / "swap.json"
    doc = {
        "coefficients": {"alphas": [1, 1], "exponents": [1.5, 3]},
        "domain": {"lx": 1, "ly": 1, "nx": 8, "ny": 8},
        "u0": {"preset": "bump"},
        "source": {"preset": "constant", "value": 1.0},
        "time": {"T": 0.1, "M": 2},
    }
    cfg.write_text(json.dumps(doc))
    run = tmp_path / "r"
    assert main(["parabolic", "--config", str(cfg), "--out", str(run)]) == 0
    steps = run / "steps"
    assert main(["compare", str(steps / "symmetrized"), str(steps / "anisotropic"), "--margin", "1e-9"]) == 1
    # solver failure: an unattainable elliptic iteration budget is not exposed, so use a tiny tolerance
    assert main(["parabolic", "--config", str(cfg), "--tol-radial", "1e-300"]) == 3


def test_batch_runs_in_parallel(tmp_path):
    docs = []
    for k, M in enumerate((2, 3)):
        p = tmp_path / f"s{k}.json"
        p.write_text(json.dumps({
            "coefficients": {"alphas": [1, 1], "exponents": [2, 2]},
            "domain": {"lx": 1, "ly": 1, "nx": 6, "ny": 6},
            "u0": {"preset": "trig"},
            "source": {"preset": "zero"},
            "time": {"T": 0.1, "M": M},
        }))
        docs.append(str(p))
    r = subprocess.run(
        [sys.executable, "-m", "anisoparab.cli", "parabolic", *docs, "--jobs", "2", "--out", str(tmp_path / "o")],
        capture_output=True, text=True,
    )
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "o" / "s0" / "report.json").exists() and (tmp_path / "o" / "s1" / "report.json").exists()
