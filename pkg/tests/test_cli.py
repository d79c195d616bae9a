import json
import subprocess
import sys

import numpy as np
import pytest

from lucp import io
from lucp.bloch import DensityMatrix
from lucp.cli import (
    EXIT_INCONCLUSIVE,
    EXIT_INPUT,
    EXIT_NOT_EQUIVALENT,
    EXIT_OK,
    fmt_number,
    main,
    UsageError,
    parse_args,
)
from lucp.lu import random_density
from lucp.states import three_qubit_rho, three_qubit_tau, werner_qutrit


def write_state(path, rho):
    io.write_json(path, io.density_to_dict(rho))
    return str(path)


@pytest.fixture
def werner_pair(tmp_path):
    return write_state(tmp_path / "x.json", werner_qutrit(1.0)), write_state(tmp_path / "y.json", werner_qutrit(0.25))


@pytest.fixture
def qubit_pair(tmp_path):
    return write_state(tmp_path / "rho.json", three_qubit_rho()), write_state(tmp_path / "tau.json", three_qubit_tau())


def test_fmt_number():
    assert fmt_number(1 / 6) == "1/6"
    assert fmt_number(-3 / 136) == "-3/136"
    assert fmt_number(2.0) == "2"
    assert fmt_number(np.sqrt(2)) == "1.41421"


def test_parse_args_defaults():
    cfg = parse_args(["check", "--a", "x", "--b", "y"])
    assert cfg.tol == 1e-8 and cfg.seed == 0 and cfg.restarts == 20 and cfg.max_iters == 500
    assert cfg.als().restarts == 20


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["check", "--a", "x"],
        ["extract"],
        ["gen-pair", "--a", "x", "--b", "y"],
        ["decompose", "--input", "x", "--rank", "0"],
        ["decompose", "--input", "x", "--orthogonal"],
        ["check", "--a", "x", "--b", "y", "--tol", "-1"],
        ["check", "--a", "x", "--b", "y", "--seed", "-1"],
        ["check", "--a", "x", "--b", "y", "--restarts", "0"],
        ["gen-pair", "--dims", "1,2", "--a", "x", "--b", "y"],
        ["frobnicate"],
    ],
)
def test_usage_errors(argv):
    with pytest.raises(UsageError):
        parse_args(argv)
    assert main(argv) == EXIT_INPUT


def test_check_example_pair_equivalent(qubit_pair, tmp_path, capsys):
    a, b = qubit_pair
    report = tmp_path / "report.txt"
    assert main(["check", "--a", a, "--b", b, "--basis", "pauli", "--report", str(report)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["verdict"] == "equivalent" and doc["residual"] < 1e-10
    assert report.read_text().startswith("verdict   equivalent")


def test_check_werner_pair_not_equivalent(werner_pair, capsys):
    assert main(["check", "--a", werner_pair[0], "--b", werner_pair[1]]) == EXIT_NOT_EQUIVALENT
    doc = json.loads(capsys.readouterr().out)
    assert doc["verdict"] == "not_equivalent" and doc["reason"] == "norm-mismatch"


def test_check_inconclusive_exit_code(tmp_path, capsys):
    # a state against its partial transpose screens clean but admits no rotation
    m = 0.5 * random_density((2, 2), 5).matrix + np.eye(4) / 8
    pt = m.reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)
    a = write_state(tmp_path / "a.json", DensityMatrix((2, 2), m))
    b = write_state(tmp_path / "b.json", DensityMatrix((2, 2), pt))
    assert main(["check", "--a", a, "--b", b, "--format", "text"]) == EXIT_INCONCLUSIVE
    assert "verdict   inconclusive" in capsys.readouterr().out


def test_check_input_errors(tmp_path, werner_pair):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert main(["check", "--a", str(bad), "--b", werner_pair[1]]) == EXIT_INPUT
    assert main(["check", "--a", str(tmp_path / "none.json"), "--b", werner_pair[1]]) == EXIT_INPUT
    q = write_state(tmp_path / "q.json", three_qubit_rho())
    assert main(["check", "--a", q, "--b", werner_pair[1]]) == EXIT_INPUT
    notstate = tmp_path / "ns.json"
    notstate.write_text(json.dumps({"dims": [2], "matrix": [[1, 0], [0, 1]]}))
    assert main(["check", "--a", str(notstate), "--b", str(notstate)]) == EXIT_INPUT


def test_extract_reconstruct_round_trip(werner_pair, tmp_path):
    out = tmp_path / "x_bloch.json"
    back = tmp_path / "x_back.json"
    assert main(["extract", "--input", werner_pair[0], "--output", str(out)]) == EXIT_OK
    doc = io.read_json(out)
    assert doc["dims"] == [3, 3] and doc["shape"] == [9, 9]
    assert main(["reconstruct", "--input", str(out), "--output", str(back)]) == EXIT_OK
    np.testing.assert_allclose(io.density_from_dict(io.read_json(back)).matrix, werner_qutrit(1.0).matrix, atol=1e-14)


def test_invariants_text(werner_pair, capsys):
    assert main(["invariants", "--input", werner_pair[0], "--format", "text"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "X12 rank" in out and "full rank" in out


def test_decompose_variants(qubit_pair, tmp_path, capsys):
    a = qubit_pair[0]
    assert main(["decompose", "--input", a, "--rank", "2", "--restarts", "3"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["shape"] == [4, 4, 4] and len(doc["weights"]) == 2
    assert main(["decompose", "--input", a, "--rank", "2", "--orthogonal", "--restarts", "3"]) == EXIT_OK
    cp = io.cp_from_dict(json.loads(capsys.readouterr().out))
    for f in cp.factors:
        np.testing.assert_allclose(f.T @ f, np.eye(2), atol=1e-10)


def test_gen_pair_then_check(tmp_path):
    a, b = str(tmp_path / "a.json"), str(tmp_path / "b.json")
    assert main(["gen-pair", "--dims", "2,3", "--seed", "4", "--a", a, "--b", b]) == EXIT_OK
    assert main(["check", "--a", a, "--b", b, "--output", str(tmp_path / "d.json")]) == EXIT_OK


def test_module_entry_point(werner_pair):
    proc = subprocess.run(
        [sys.executable, "-m", "lucp", "check", "--a", werner_pair[0], "--b", werner_pair[1]],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == EXIT_NOT_EQUIVALENT
    assert json.loads(proc.stdout)["reason"] == "norm-mismatch"
