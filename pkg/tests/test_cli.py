import json
import subprocess
import sys

import pytest

from gdcert.cli import OUTPUT_DIR_ENV, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_table_pretty(capsys):
    code, out, _ = run(capsys, "table", "--N", "5", "--mu", "0.1", "--L", "1")
    assert code == 0
    lines = out.splitlines()
    assert lines[1].split()[:3] == ["*", "0.0000", "0.0384"]
    assert lines[-2].split()[-1] == "0.6719"


def test_rate_examples(capsys):
    code, out, _ = run(capsys, "rate", "--N", "3", "--gamma", "1", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["branch"] == "eta-branch"
    assert doc["tau"] == pytest.approx(1 / 7, rel=1e-14)
    code, out, _ = run(capsys, "rate", "--N", "1", "--gamma", "1.9", "--format", "json")
    assert json.loads(out)["tau"] == pytest.approx(0.81, rel=1e-14)


def test_gamma_star(capsys):
    code, out, _ = run(capsys, "gamma-star", "--N", "1", "--format", "json")
    assert code == 0 and json.loads(out)["gamma_star"] == pytest.approx(1.5, abs=1e-12)


@pytest.mark.parametrize(
    "argv",
    [
        ["rate", "--N", "3", "--mu", "2"],
        ["rate", "--N", "3", "--gamma", "2.5"],
        ["rate", "--N", "0"],
        ["rate", "--N", "2", "--format", "csv"],
    ],
)
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and err.startswith("gdcert:")


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["rate"])
    assert exc.value.code == 2


@pytest.mark.parametrize("gamma", [None, "0.7", "1.8"])
def test_certificate(capsys, gamma):
    argv = ["certificate", "--N", "3", "--mu", "0.1"] + ([] if gamma is None else ["--gamma", gamma])
    code, out, _ = run(capsys, *argv)
    doc = json.loads(out)
    assert code == 0 and doc["psd"] and all(doc["verdicts"].values())


def test_certificate_fault(capsys):
    code, out, _ = run(capsys, "certificate", "--N", "5", "--mu", "0.1", "--inject-fault")
    assert code == 1 and not json.loads(out)["psd"]


def test_certificate_includes_tightness_at_mu_zero(capsys):
    _, out, _ = run(capsys, "certificate", "--N", "2")
    assert "tightness" in json.loads(out)


def test_lambda_and_fault(capsys):
    code, out, _ = run(capsys, "lambda", "--N", "4", "--mu", "0.2")
    assert code == 0 and json.loads(out)["checks"]["dual_maps_equivalent"]
    code, _, _ = run(capsys, "lambda", "--N", "4", "--mu", "0.2", "--inject-fault")
    assert code == 1


def test_lambda_csv(capsys):
    code, out, _ = run(capsys, "lambda", "--N", "2", "--format", "csv")
    assert code == 0 and out.splitlines()[0] == ",*,0,1,2"


def test_verify(capsys):
    code, out, _ = run(capsys, "verify", "--N", "4", "--mu", "0.1", "--trials", "500", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and all(doc["checks"].values())
    assert [r["label"] for r in doc["reports"]] == ["F", "G", "G-modified"]
    code, _, _ = run(capsys, "verify", "--N", "4", "--mu", "0.1", "--trials", "500", "--inject-fault")
    assert code == 1


def test_verify_moved_parameters_runs_strengthening(capsys):
    _, out, _ = run(capsys, "verify", "--N", "3", "--gamma", "0.6", "--trials", "300", "--format", "json")
    assert "strengthening" in json.loads(out)["checks"]


def test_simulate(capsys):
    code, out, _ = run(capsys, "simulate", "--N", "6", "--gamma", "0.9", "--trials", "100")
    assert code == 0 and "huber ratio / bound = 1.0000000000" in out
    code, out, _ = run(capsys, "simulate", "--N", "3", "--mu", "0.1", "--trials", "100")
    assert code == 0 and "tightness: n/a (mu>0)" in out


def test_json_is_deterministic(capsys):
    argv = ["verify", "--N", "3", "--trials", "200", "--seed", "5", "--format", "json"]
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert first == second


def test_output_dir_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
    code, out, _ = run(capsys, "certificate", "--N", "2", "--output", "sub/cert.json")
    assert code == 0 and out == ""
    assert json.loads((tmp_path / "sub" / "cert.json").read_text())["psd"]


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "gdcert", "gamma-star", "--N", "1"], capture_output=True, text=True
    )
    assert proc.returncode == 0 and proc.stdout.startswith("gamma* = 1.5")
