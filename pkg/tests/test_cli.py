import json
import subprocess
import sys

import pytest

from pathortho.cli import format_poly, main
from pathortho.words import TensorPoly


def run(args, capsys):
    code = main(args)
    return code, capsys.readouterr()


def test_basis_table_row(capsys):
    code, out = run(["basis", "--max-degree", "3"], capsys)
    assert code == 0
    data = json.loads(out.out)
    assert "001 → 001 − 1/2·01 + 1/12·1" in data["rows"]
    assert data["gram_diagonal"]["001"] == "1/720"
    assert data["config"]["max_degree"] == 3


def test_basis_degree_zero(capsys):
    code, out = run(["basis", "--max-degree", "0"], capsys)
    data = json.loads(out.out)
    assert [e["word"] for e in data["entries"]] == [""]


def test_basis_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["basis", "--max-degree", "3", "--d", "2", "--out", str(a)]) == 0
    assert main(["basis", "--max-degree", "3", "--d", "2", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_csv_has_config_header(capsys):
    code, out = run(["basis", "--max-degree", "2", "--format", "csv"], capsys)
    lines = out.out.splitlines()
    assert "# command=basis" in lines and "# max_degree=2" in lines
    assert "word,polynomial,sq_norm" in lines


def test_usage_errors_exit_2(capsys):
    for args in (["basis", "--max-degree", "-1"], ["bogus"], ["bs", "--d", "2"], ["naturality", "--degree", "8"]):
        with pytest.raises(SystemExit) as exc:
            main(args)
        assert exc.value.code == 2


def test_computational_failure_exits_1(capsys):
    # zero volatility makes the call payoff constant, so R² is undefined
    code, out = run(["expand", "--target", "call", "--sigma", "0", "--paths", "50", "--steps", "5"], capsys)
    assert code == 1
    assert "R2 is undefined" in out.err


def test_naturality_report(capsys):
    code, out = run(["naturality", "--degree", "5"], capsys)
    assert code == 0
    data = json.loads(out.out)
    assert (data["vars"], data["rank_A"], data["rank_aug"], data["consistent"]) == (25, 25, 26, False)
    assert data["certificate"]
    code, out = run(["naturality", "--degree", "3"], capsys)
    data = json.loads(out.out)
    assert data["solution"] == {"{12}": "-1/4", "{13}": "0/1", "{23}": "-1/4"}


def test_recurrence_report(capsys):
    code, out = run(["recurrence", "--d", "2", "--degree", "3"], capsys)
    data = json.loads(out.out)
    assert code == 0 and data["all_ok"]
    assert data["commutativity_residual"] < 1e-8


def test_experiment_commands(capsys):
    code, out = run(["bs", "--paths", "300", "--steps", "10", "--degrees", "1,2"], capsys)
    assert code == 0
    lines = [ln for ln in out.out.splitlines() if not ln.startswith("#")]
    assert lines[0] == "method,N,paths,seed,metric,value"
    assert {ln.split(",")[0] for ln in lines[1:]} == {"Orth-call", "Regr-call", "Orth-lookback", "Regr-lookback"}
    code, out = run(["sde-compare", "--paths", "200", "--steps", "10", "--degrees", "1", "--repeats", "2"], capsys)
    rows = [ln.split(",") for ln in out.out.splitlines() if not ln.startswith("#")][1:]
    assert {r[0] for r in rows} == {"Taylor", "Orth"} and {r[3] for r in rows} == {"0", "1"}


def test_expand_and_regress(capsys):
    code, out = run(["expand", "--paths", "4000", "--steps", "20", "--max-degree", "3"], capsys)
    data = json.loads(out.out)
    assert abs(data["model"]["coefficients"]["111"] - 6.0) < 1.5
    code, out = run(["regress", "--paths", "2000", "--steps", "20", "--max-degree", "3"], capsys)
    data = json.loads(out.out)
    assert data["metrics"]["out_of_sample"]["R2"] > 0.999


def test_orthcheck(capsys):
    code, out = run(["orthcheck", "--paths", "500", "--steps", "20", "--max-degree", "3", "--format", "json"], capsys)
    data = json.loads(out.out)
    assert code == 0 and data["summary"]["max_offdiag_stratonovich"] > 0.2


def test_format_poly():
    p = TensorPoly.of("001") - TensorPoly.of("01", 0.5) + TensorPoly.of("", 2)
    assert format_poly(p) == "001 − 1/2·01 + 2·∅"
    assert format_poly(-TensorPoly.of("1")) == "−1"


def test_console_script_entry():
    out = subprocess.run([sys.executable, "-m", "pathortho.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "pathortho" in out.stdout
