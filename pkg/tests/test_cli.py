import csv
import io
import json
import subprocess
import sys

import pytest

from multiplierlab.cli import EXIT_CHECK_FAILED, EXIT_INPUT, EXIT_NONCONVERGED, EXIT_OK, main


@pytest.fixture(autouse=True)
def no_env_out(monkeypatch):
    monkeypatch.delenv("MULTIPLIERLAB_OUT", raising=False)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_norms_schur_example(capsys):
    code, out, _ = run(capsys, "norms", "schur", "--group", "zmod:2", "--symbol", "builtin:two-point:2", "--p", "4", "--seed", "7")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["config"]["seed"] == 7
    assert doc["estimates"][0]["value"] == pytest.approx(2, abs=1e-4)
    assert doc["estimates"][0]["certificate"]["shape"] == [2, 2]


def test_norms_fourier_example(capsys):
    code, out, _ = run(capsys, "norms", "fourier", "--group", "zmod:2", "--symbol", "builtin:one", "--p", "1")
    assert code == EXIT_OK
    assert json.loads(out)["estimates"][0]["value"] == pytest.approx(1, rel=1e-10)


def test_norms_cb(capsys):
    code, out, _ = run(capsys, "norms", "cb", "--group", "zmod:3", "--symbol", "builtin:random", "--p", "4", "--levels", "1,2", "--restarts", "8")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert [e["level"] for e in doc["estimates"]] == [1, 2]


def test_missing_symbol_file(capsys, tmp_path):
    code, _, err = run(capsys, "norms", "fourier", "--group", "zmod:2", "--symbol", str(tmp_path / "none.json"), "--p", "1")
    assert code == EXIT_INPUT and "error" in err


def test_line_numbered_symbol_error(capsys, tmp_path):
    path = tmp_path / "phi.json"
    path.write_text('{\n  "entries": [\n    {"element": "0", "re": 1},\n    {"element": "7", "re": 1}\n  ]\n}\n')
    code, _, err = run(capsys, "norms", "schur", "--group", "zmod:2", "--symbol", str(path), "--p", "4")
    assert code == EXIT_INPUT
    assert "phi.json:4:" in err


def test_bad_arguments(capsys):
    assert run(capsys, "norms", "schur", "--group", "zmod:2")[0] == EXIT_INPUT
    assert run(capsys, "norms", "schur", "--group", "nonsense:3", "--symbol", "builtin:one", "--p", "2")[0] == EXIT_INPUT
    assert run(capsys, "verify", "nothing")[0] == EXIT_INPUT
    assert run(capsys, "norms", "schur", "--group", "zmod:2", "--symbol", "builtin:one", "--p", "1/2")[0] == EXIT_INPUT


def test_nonconvergence_exit_code(capsys):
    code, out, _ = run(
        capsys, "norms", "schur", "--group", "zmod:6", "--symbol", "builtin:random", "--p", "3", "--max-iters", "1", "--polish-iters", "0", "--restarts", "2",
    )
    assert code == EXIT_NONCONVERGED
    assert json.loads(out)["converged"] is False


def test_verify_corner_example(capsys):
    code, out, _ = run(capsys, "verify", "corner", "--group", "zd:1", "--x", "builtin:ball1", "--p", "4", "--radii", "2,4,8")
    assert code == EXIT_OK
    reports = json.loads(out)["reports"]
    assert len(reports) == 3 and all(r["pass"] for r in reports)


def test_verify_thm42_example(capsys):
    code, out, _ = run(capsys, "verify", "thm42", "--group", "zmod:4", "--seed", "3", "--k", "3", "--p", "4")
    assert code == EXIT_OK
    rep = json.loads(out)["reports"][0]
    assert rep["seed"] == 3 and rep["quantities"]["identity_rel_error"] <= 1e-10


def test_verify_free_contrast_is_report_only(capsys):
    code, out, _ = run(capsys, "verify", "free-contrast")
    assert code == EXIT_OK
    rep = json.loads(out)["reports"][0]
    assert rep["status"] == "report-only" and rep["report_only"]


def test_failed_check_exit_code(capsys):
    code, _, _ = run(capsys, "verify", "folner-curve", "--group", "zd:1", "--x", "builtin:ball1", "--p", "4", "--radii", "8,16", "--threshold", "0.99999")
    assert code == EXIT_CHECK_FAILED


@pytest.mark.parametrize(
    "argv",
    [
        ["verify", "lemma23", "--group", "zmod:5", "--samples", "20", "--seed", "2"],
        ["verify", "defect", "--group", "zd:1", "--radii", "8,16,32"],
        ["verify", "defect", "--group", "free:2", "--radii", "1,2,3"],
        ["verify", "equality", "--group", "zmod:2", "--symbol", "builtin:two-point:2", "--p", "4", "--restarts", "8"],
        ["verify", "convexity", "--group", "zmod:4", "--symbol", "builtin:random", "--p", "1,2,inf", "--restarts", "8"],
        ["verify", "folner-curve", "--group", "zd:1", "--x", "builtin:ball1", "--p", "4", "--radii", "8,16,32"],
    ],
)
def test_verify_commands_pass(capsys, argv):
    code, out, _ = run(capsys, *argv)
    assert code == EXIT_OK, out
    assert all(r["pass"] for r in json.loads(out)["reports"])


def test_csv_output(capsys):
    code, out, _ = run(capsys, "verify", "corner", "--group", "zmod:4", "--x", "builtin:random", "--p", "1,inf", "--format", "csv")
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 2 and rows[0]["name"] == "corner"
    assert set(rows[0]) == {"name", "inputs_digest", "pass", "status", "tolerance", "seed", "quantities"}


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"group": "zmod:2", "symbol": "builtin:two-point:2", "p": "4", "seed": 5, "restarts": 8}))
    code, out, _ = run(capsys, "norms", "schur", "--config", str(cfg))
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["config"]["seed"] == 5 and doc["config"]["restarts"] == 8
    code, out, _ = run(capsys, "norms", "schur", "--config", str(cfg), "--seed", "6")
    assert json.loads(out)["config"]["seed"] == 6


def test_config_errors(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text('{\n  "group": "zmod:2",\n  "colour": "red"\n}\n')
    code, _, err = run(capsys, "norms", "schur", "--config", str(cfg))
    assert code == EXIT_INPUT and "colour" in err and ":3" in err
    cfg.write_text('{\n  "group": "zmod:2",\n')
    code, _, err = run(capsys, "norms", "schur", "--config", str(cfg))
    assert code == EXIT_INPUT and "invalid JSON" in err


def test_output_file_and_env_dir(capsys, tmp_path, monkeypatch):
    out = tmp_path / "a.json"
    code, stdout, _ = run(capsys, "verify", "thm42", "--group", "zmod:3", "--p", "2", "--out", str(out))
    assert code == EXIT_OK and stdout == "" and json.loads(out.read_text())["reports"]
    monkeypatch.setenv("MULTIPLIERLAB_OUT", str(tmp_path / "env"))
    code, stdout, _ = run(capsys, "verify", "thm42", "--group", "zmod:3", "--p", "2")
    written = list((tmp_path / "env").iterdir())
    assert code == EXIT_OK and stdout == "" and len(written) == 1 and written[0].suffix == ".json"


def test_byte_identical_reruns(capsys):
    argv = ["norms", "fourier", "--group", "sym:3", "--symbol", "builtin:random", "--p", "inf", "--seed", "4", "--restarts", "8"]
    first = run(capsys, *argv)[1]
    second = run(capsys, *argv)[1]
    assert first == second
    third = run(capsys, *argv[:-3], "5", "--restarts", "8")[1]
    assert json.loads(third)["config"]["seed"] == 5


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "multiplierlab", "verify", "thm42", "--group", "zmod:2", "--p", "4", "--format", "csv"],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0
    assert res.stdout.startswith("name,inputs_digest,pass")
