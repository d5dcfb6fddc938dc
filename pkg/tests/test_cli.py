import csv
import json
import subprocess
import sys

import pytest

from gradterm import cli


def run_json(argv, capsys):
    code = cli.run(argv)
    out = capsys.readouterr().out
    return code, json.loads(out), out


def test_constants_document(capsys):
    code, doc, _ = run_json(["constants", "--no-time"], capsys)
    assert code == 0
    led = doc["data"]["ledger"]
    assert led["eta"] == pytest.approx(1 / 3)
    assert led["nu_hat"] == 4
    assert led["n"] == 2 and led["N"] == 4 and led["R"] == 1.1 and led["K"] == 4.0
    assert "wall_time" not in doc
    assert doc["version"]


def test_constants_with_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"N": 3, "K": 0}))
    code, doc, _ = run_json(["constants", "--config", str(cfg)], capsys)
    assert code == 0
    assert doc["data"]["ledger"]["nu_hat"] == 4
    assert doc["data"]["ledger"]["kappa"] == 1.0
    assert "wall_time" in doc


def test_unknown_subcommand_prints_usage(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.run(["bogus"])
    assert exc.value.code != 0
    assert "usage" in capsys.readouterr().err


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "gradterm.cli", "bogus"], capture_output=True, text=True)
    assert proc.returncode != 0
    assert "usage" in proc.stderr


@pytest.mark.parametrize("payload, path", [
    ({"N": "x"}, "config.N"),
    ({"nope": 1}, "config.nope"),
    ({"K": True}, "config.K"),
])
def test_malformed_config_reports_field_path(tmp_path, capsys, payload, path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps(payload))
    assert cli.run(["constants", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert path in err


def test_invalid_json_config(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    assert cli.run(["constants", "--config", str(cfg)]) == 2
    assert "not valid JSON" in capsys.readouterr().err


def test_nested_full_suite_config_path(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"jet-demo": {"value": ["one"]}}))
    assert cli.run(["full-suite", "--config", str(cfg)]) == 2
    assert "config.jet-demo.value" in capsys.readouterr().err


def test_spacing_override_rejected_for_constants(capsys):
    assert cli.run(["constants", "--spacing", "0.1"]) == 2


@pytest.mark.parametrize("argv", [
    ["constants"], ["moser-run", "--seed", "3"], ["potential-check", "--seed", "7"], ["jet-demo"],
])
def test_deterministic_report_body(argv, capsys):
    _, _, a = run_json(argv + ["--no-time"], capsys)
    _, _, b = run_json(argv + ["--no-time"], capsys)
    assert a == b


def test_out_file_and_resolution_table(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"cases": 5}))
    out = tmp_path / "pot.json"
    code = cli.run(["potential-check", "--config", str(cfg), "--out", str(out), "--resolution-study"])
    assert code == 0
    assert capsys.readouterr().out == ""
    doc = json.loads(out.read_text())
    assert doc["data"]["refinement"]
    rows = list(csv.DictReader(open(str(out) + ".refinement.csv")))
    assert rows and {"label", "spacing", "fine_spacing", "ratio"} <= set(rows[0])
    assert float(rows[0]["fine_spacing"]) == pytest.approx(float(rows[0]["spacing"]) / 2)


def test_bochner_check_emits_refinement_table(capsys):
    code, doc, _ = run_json(["bochner-check"], capsys)
    assert code == 0
    table = doc["data"]["refinement"]
    assert set(table) == {"flat", "gaussian", "rank2"}
    assert [r["spacing"] for r in table["flat"]] == [0.1, 0.05]


def test_failed_check_exits_one(capsys):
    # rank-2 residual is about 11% at spacing 0.1, above the 5% tolerance
    code, doc, _ = run_json(["bochner-check", "--spacing", "0.1", "--no-time"], capsys)
    assert code == 1
    assert doc["passed"] is False


@pytest.mark.slow
def test_full_suite_defaults(tmp_path):
    out = tmp_path / "full.json"
    code = cli.run(["full-suite", "--out", str(out)])
    doc = json.loads(out.read_text())
    assert code == 0
    assert doc["passed"] is True
    assert doc["summary"]["pass"] >= 30
    assert doc["summary"]["fail"] == 0
    # every record names its anchor or the literal plumbing
    assert all(isinstance(c["anchor"], str) and c["anchor"] for c in doc["checks"])
    assert doc["config"]["seed"] == 0
