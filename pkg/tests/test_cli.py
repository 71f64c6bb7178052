import json
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

from cqp_loqc.cli import main
from cqp_loqc.models import source

SCHEMA = json.loads((Path(__file__).parent.parent / "docs" / "report.schema.json").read_text())


def invoke(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def invoke_json(capsys, *argv):
    code, out, err = invoke(capsys, *argv, "--json")
    report = json.loads(out)
    jsonschema.validate(report, SCHEMA)
    return code, report, out


@pytest.fixture
def mutant(tmp_path):
    path = tmp_path / "inverted.cqp"
    path.write_text(source("Model1").replace("then 1 else 0].0", "then 0 else 1].0"))
    return path


def test_parse_ok_and_syntax_error(capsys, corpus_dir):
    code, report, _ = invoke_json(capsys, "parse", str(corpus_dir / "Model1.cqp"))
    assert code == 0 and report["ok"] and "CNOT" in report["definitions"]
    code, report, _ = invoke_json(capsys, "parse", str(corpus_dir / "broken.cqp"))
    assert code == 3
    assert (report["error"]["line"], report["error"]["column"]) == (3, 13)


def test_parse_reports_ownership(capsys, tmp_path):
    path = tmp_path / "bad.cqp"
    path.write_text("Main = (qbit q)c![q].d![q].0\n")
    code, report, _ = invoke_json(capsys, "parse", str(path))
    assert code == 3
    assert [d["message"] for d in report["diagnostics"]] == ["use after send: q"]


def test_run_model1(capsys):
    code, report, _ = invoke_json(capsys, "run", "Model1", "--input", "10")
    assert code == 0
    dist = {(o["outputs"]["out1"][0], o["outputs"]["out2"][0], o["outputs"]["cnt"][0]): o["probability"]
            for o in report["terminal_distribution"]}
    assert dist == {(0, 0, 0): pytest.approx(8 / 9), (1, 1, 1): pytest.approx(1 / 9)}
    code, out, _ = invoke(capsys, "run", "Model1", "--input", "10")
    assert "p=0.111111111" in out


def test_state_probe_text(capsys):
    code, out, _ = invoke(capsys, "state", "Model1", "--input", "00", "--at", "cnot-output")
    assert code == 0
    assert "|1010>|00>  +0.333333333+0.000000000j" in out
    assert "|0100>|10>  +0.471404521+0.000000000j" in out


def test_state_probe_json(capsys):
    code, report, _ = invoke_json(capsys, "state", "Model2", "--input", "0.5,0:0.5,-0.5,0.5")
    assert code == 0 and report["ports"] == ["k", "l", "q", "r", "j", "p"]
    assert sum(a["re"] ** 2 + a["im"] ** 2 for a in report["amplitudes"]) == pytest.approx(1.0)


def test_equiv_equivalent_and_deterministic(capsys):
    code, report, first = invoke_json(capsys, "equiv", "Model2", "Specification2", "--inputs", "basis")
    assert code == 0 and report["equivalent"] and len(report["results"]) == 4
    _, _, second = invoke_json(capsys, "equiv", "Model2", "Specification2", "--inputs", "basis")
    assert first == second


def test_equiv_mutant_exits_one(capsys, mutant):
    code, report, _ = invoke_json(capsys, "equiv", str(mutant), "Specification1", "--inputs", "basis")
    assert code == 1 and not report["equivalent"]
    assert all(r["verdict"]["counterexample"] for r in report["results"])
    code, out, _ = invoke(capsys, "equiv", str(mutant), "Specification1", "--inputs", "basis")
    assert "NOT equivalent" in out


def test_equiv_inputs_file_and_jobs(capsys, tmp_path):
    inputs = tmp_path / "inputs.txt"
    inputs.write_text("# two states\n01\n0.6, 0, 0, 0.8\n")
    args = ("equiv", "Model2", "Specification2", "--inputs", str(inputs))
    code, serial, _ = invoke_json(capsys, *args)
    code2, parallel, _ = invoke_json(capsys, *args, "--jobs", "2")
    assert code == code2 == 0
    assert serial == parallel


def test_tolerance_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("CQP_LOQC_TOL", "1e-3")
    _, report, _ = invoke_json(capsys, "equiv", "Model2", "Specification2", "--inputs", "basis")
    assert report["tolerance"] == 1e-3
    _, report, _ = invoke_json(capsys, "equiv", "Model2", "Specification2", "--inputs", "basis", "--tol", "1e-8")
    assert report["tolerance"] == 1e-8
    monkeypatch.setenv("CQP_LOQC_TOL", "nope")
    assert invoke(capsys, "equiv", "Model2", "Specification2")[0] == 2


def test_lts_dump(capsys, tmp_path):
    out = tmp_path / "lts.json"
    code, text, _ = invoke(capsys, "lts", "Specification2", "--input", "11", "-o", str(out))
    assert code == 0 and "written to" in text
    report = json.loads(out.read_text())
    jsonschema.validate(report, SCHEMA)
    assert report["stats"]["nodes"] == len(report["nodes"])


@pytest.mark.parametrize("argv", [
    ["run", "Model3", "--input", "00"],
    ["run", "CNOT", "--input", "00"],
    ["run", "Model1", "--input", "1,1,0,0"],
    ["run", "Model1"],
    ["equiv", "Model1", "Specification2", "--inputs", "basis"],
    ["state", "Specification1", "--input", "00"],
    ["frobnicate"],
])
def test_usage_errors(capsys, argv):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 2


def test_limit_exceeded(capsys):
    code, _, err = invoke(capsys, "run", "Model1", "--input", "00", "--max-nodes", "10")
    assert code == 4 and "limit exceeded" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cqp_loqc", "equiv", "Model1", "Specification1",
                           "--inputs", "basis"], capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    assert "equivalent on 4 inputs" in proc.stdout
