import json
import math
import subprocess
import sys

import pytest

from spinlab.cli import main
from spinlab.graphs import complete_graph, cycle_graph, read_graph, write_graph


def call(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip().startswith("{") else out)


@pytest.fixture
def files(tmp_path):
    c4, k4 = tmp_path / "c4.txt", tmp_path / "k4.txt"
    write_graph(cycle_graph(4), c4)
    write_graph(complete_graph(4), k4)
    return {"c4": str(c4), "k4": str(k4), "dir": tmp_path}


def test_threshold(capsys):
    assert call(capsys, "threshold", "hardcore", "--d", "3") == (0, {"lambda_c": 4.0})
    code, out = call(capsys, "threshold", "ising", "--d", "3", "--B", "0")
    assert code == 0 and abs(out["beta_c_af"] + 0.5 * math.log(3)) < 1e-9


def test_partition_c4(capsys, files):
    code, out = call(capsys, "partition", "--graph", files["c4"], "--model", "hardcore:1",
                     "--phase-split", "--marginals", "0")
    assert code == 0
    assert out["log_z"] == pytest.approx(math.log(7), abs=1e-14)
    assert out["log_z_plus"] == pytest.approx(math.log(4), abs=1e-14)
    assert out["log_z_minus"] == pytest.approx(math.log(3), abs=1e-14)
    assert out["marginals"]["0"] == pytest.approx(2 / 7, abs=1e-14)


def test_partition_spec_literal(capsys, files):
    spec = '{"psi": {"++": 0, "+-": 2, "--": 1}}'
    code, out = call(capsys, "partition", "--graph", files["c4"], "--spec", spec)
    # canonical lambda = 2^2 on the 2-regular C4 with B0 = 0
    assert code == 0 and out["log_z"] == pytest.approx(math.log(1 + 4 * 4 + 2 * 16), abs=1e-12)


def test_maxcut(capsys, files):
    assert call(capsys, "maxcut", "--graph", files["k4"]) == (0, {"maxcut": 4})


def test_fixpoints_and_bethe(capsys):
    code, out = call(capsys, "fixpoints", "--model", "hardcore:5", "--d", "3")
    assert code == 0 and out["unique"] is False
    code, out = call(capsys, "bethe", "--model", "hardcore:5", "--d", "3")
    assert out["gamma"] == pytest.approx(0.44, abs=1e-12)
    assert out["theta"] == pytest.approx(0.64, abs=1e-12)


def test_gen_round_trip_and_reproducible(capsys, files):
    out1 = files["dir"] / "a.txt"
    a = call(capsys, "gen", "gadget", "--n", "10", "--k", "3", "--seed", "5", "--out", str(out1))
    b = call(capsys, "gen", "gadget", "--n", "10", "--k", "3", "--seed", "5")
    assert a == b
    g = read_graph(out1)
    assert g.n == 20 and g.properly_colored()


def test_expand(capsys, files):
    path = files["dir"] / "c8.txt"
    write_graph(cycle_graph(8), path)
    code, out = call(capsys, "expand", "--graph", str(path), "--delta", "0.25", "--lambda", "0.6")
    assert code == 0 and out["passed"] is False and out["exhaustive"] is True


def test_sample(capsys, files):
    argv = ("sample", "--graph", files["c4"], "--model", "hardcore:1", "--steps", "2000",
            "--seed", "3", "--watch", "0")
    a, b = call(capsys, *argv), call(capsys, *argv)
    assert a == b and a[0] == 0


def test_reduce(capsys, files):
    code, out = call(capsys, "reduce", "--H", files["k4"], "--model", "hardcore:5", "--n", "10",
                     "--seed", "0", "--no-direct")
    assert code == 0
    assert out["exact"] == 4 and out["lower"] <= 4 and out["upper"] == "inf"
    assert out["sandwich_ok"] is True


def test_error_codes(capsys, files, tmp_path):
    code, out = call(capsys, "--error-json", "partition", "--graph", files["c4"], "--model", "potts:2")
    assert code == 2 and out["exit_code"] == 2
    big = tmp_path / "big.txt"
    write_graph(cycle_graph(40), big)
    code, out = call(capsys, "partition", "--graph", str(big), "--model", "ising:0.1", "--error-json")
    assert code == 3 and out["error"] == "CapacityError"
    code, out = call(capsys, "reduce", "--H", files["k4"], "--model", "hardcore:5", "--n", "10",
                     "--control", "--error-json")
    assert code == 4
    code, _ = call(capsys, "maxcut", "--graph", files["k4"], "--bogus")
    assert code == 2
    code, _ = call(capsys, "partition", "--graph", str(tmp_path / "missing.txt"), "--model", "hardcore:1")
    assert code != 0


def test_global_flags_and_envelope(capsys, files):
    code, out = call(capsys, "--envelope", "maxcut", "--graph", files["k4"], "--threads", "2")
    assert code == 0 and out["outputs"] == {"maxcut": 4} and out["command"] == "maxcut"
    code, text = call(capsys, "maxcut", "--graph", files["k4"], "--pretty")
    assert code == 0 and "maxcut" in text and "4" in text


def test_console_entry_point(files):
    res = subprocess.run([sys.executable, "-m", "spinlab.cli", "maxcut", "--graph", files["k4"]],
                         capture_output=True, text=True, check=True)
    assert json.loads(res.stdout) == {"maxcut": 4}
