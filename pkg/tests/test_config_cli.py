import csv
import json
from pathlib import Path

import pytest

from hetnetlab import cli
from hetnetlab.config import SpecError, defaulted_fields, load_spec

SPECS = Path(__file__).resolve().parent.parent / "specs"


def _write(tmp_path, data, name="spec.json"):
    p = tmp_path / name
    p.write_text(data if isinstance(data, str) else json.dumps(data))
    return p


def test_minimal_file_gets_defaults(tmp_path):
    spec = load_spec(_write(tmp_path, {"command": "sweep-power"}))
    assert spec.scenario.pilot_length == 2 and spec.scenario.antennas_per_cell == 8
    assert spec.sweep.p_max_dbm == [float(v) for v in range(0, 31, 2)]
    defaults = defaulted_fields(spec)
    assert "scenario.pilot_length" in defaults and "command" not in defaults


def test_partial_section_reports_only_missing_fields(tmp_path):
    spec = load_spec(_write(tmp_path, {"command": "sweep-power", "scenario": {"num_ues": 6}}))
    defaults = defaulted_fields(spec)
    assert "scenario.num_ues" not in defaults and "scenario.num_small_cells" in defaults


def test_pilot_constraint_named(tmp_path):
    with pytest.raises(SpecError, match="pilot_length < coherence_block"):
        load_spec(_write(tmp_path, {"command": "validate-capacity",
                                    "scenario": {"pilot_length": 200, "coherence_block": 200}}))


def test_unknown_field_rejected(tmp_path):
    with pytest.raises(SpecError, match="bogus"):
        load_spec(_write(tmp_path, {"command": "sweep-power", "bogus": 1}))


def test_all_violations_reported_together(tmp_path):
    with pytest.raises(SpecError) as exc:
        load_spec(_write(tmp_path, {"command": "sweep-power", "trials": 0,
                                    "sweep": {"p_max_dbm": []}, "tolerance": -1}))
    msg = str(exc.value)
    assert "3 problem(s)" in msg and "trials" in msg and "sweep.p_max_dbm" in msg and "tolerance" in msg


def test_json_error_has_line_and_column(tmp_path):
    with pytest.raises(SpecError, match=r"spec\.json:3:\d+: invalid JSON"):
        load_spec(_write(tmp_path, '{\n  "command": "sweep-power",\n  oops\n}'))


def test_missing_file(tmp_path):
    with pytest.raises(SpecError, match="cannot read"):
        load_spec(tmp_path / "nope.json")


def test_seed_precedence(monkeypatch):
    monkeypatch.delenv(cli.SEED_ENV, raising=False)
    assert cli.resolve_seed(None, None) == (0, "default")
    assert cli.resolve_seed(None, 5) == (5, "spec")
    monkeypatch.setenv(cli.SEED_ENV, "9")
    assert cli.resolve_seed(None, 5) == (9, "env")
    assert cli.resolve_seed(3, 5) == (3, "cli")
    monkeypatch.setenv(cli.SEED_ENV, "abc")
    with pytest.raises(SpecError):
        cli.resolve_seed(None, 5)


def test_sweep_power_output(tmp_path, monkeypatch):
    monkeypatch.delenv(cli.SEED_ENV, raising=False)
    out = tmp_path / "sweep.csv"
    assert cli.main(["sweep-power", "--spec", str(SPECS / "sweep-power.json"), "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == ["scheme", "p_max_dbm", "sum_rate", "total_power_w", "ee", "active_cells"]
    mrt = [float(r["p_max_dbm"]) for r in rows if r["scheme"] == "mrt"]
    assert mrt == [float(v) for v in range(0, 31, 2)]
    meta = json.loads(Path(str(out) + ".meta.json").read_text())
    assert meta["seed"] == 0 and meta["seed_source"] == "spec"
    assert meta["spec"]["command"] == "sweep-power"
    assert "numpy" in meta["versions"] and "scenario.num_ues" in meta["defaults_applied"]


def test_cli_seed_override_recorded(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.SEED_ENV, "11")
    out = tmp_path / "p.csv"
    assert cli.main(["place-replicas", "--spec", str(SPECS / "place-replicas.json"), "--out", str(out), "--seed", "4"]) == 0
    meta = json.loads(Path(str(out) + ".meta.json").read_text())
    assert (meta["seed"], meta["seed_source"]) == (4, "cli")


def test_bad_spec_exits_nonzero(tmp_path, capsys):
    bad = _write(tmp_path, {"command": "sweep-power", "nope": True})
    assert cli.main(["sweep-power", "--spec", str(bad), "--out", str(tmp_path / "x.csv")]) != 0
    assert "nope" in capsys.readouterr().err


def test_command_mismatch(tmp_path, capsys):
    assert cli.main(["train-rl", "--spec", str(SPECS / "sweep-power.json"), "--out", str(tmp_path / "x.csv")]) != 0
    assert "sweep-power" in capsys.readouterr().err


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    rc = cli.main(["place-replicas", "--spec", str(SPECS / "place-replicas.json"), "--out", str(blocker / "x.csv")])
    assert rc != 0 and "error" in capsys.readouterr().err


def test_train_rl_artifacts(tmp_path):
    out = tmp_path / "rl.csv"
    rc = cli.main(["train-rl", "--spec", str(SPECS / "train-rl-hetnet.json"), "--out", str(out), "--trials", "3"])
    assert rc == 0
    assert len(out.read_text().splitlines()) == 4
    assert (tmp_path / "rl.weights.bin").read_bytes()[:8] == b"HNETRLW1"
    assert (tmp_path / "rl.policy.csv").read_text().startswith("step,action,parameter,reward")


def test_capacity_mismatch_reported(tmp_path, capsys):
    spec = _write(tmp_path, {"command": "validate-capacity", "trials": 50, "tolerance": 1e-9, "scheme": "mrt"})
    rc = cli.main(["validate-capacity", "--spec", str(spec), "--out", str(tmp_path / "v.csv")])
    assert rc != 0
    assert "mismatch" in capsys.readouterr().err
