import json
import subprocess
import sys

import numpy as np
import pytest

from minplus_filter import cli
from minplus_filter.oracle import Certificate

from builders import config_dict, config_path


def run_cli(*args):
    return cli.main([str(a) for a in args])


@pytest.mark.parametrize("name", ["failure", "failure_init_error"])
def test_run_writes_trace_and_report(tmp_path, name):
    assert run_cli("run", "--config", config_path(name), "--out", tmp_path, "--quiet") == 0
    rows = cli.read_trace_csv(tmp_path / "trace.csv")
    report = json.loads((tmp_path / "report.json").read_text())
    assert [r["k"] for r in rows] == [1, 2, 3, 4, 5]
    assert set(rows[0]) == {"k", "x_true", "x_est", "err", "active_sensor", "v_min", "terms_pre", "terms_post"} | {
        f"y_{j}" for j in range(1, 6)
    }
    assert report["scenario"]["name"] == name
    assert len(report["reports"]) == 5 and len(report["x_true"]) == 6
    s = report["summary"]
    assert s["active_sensors"] == [r["active_sensor"] for r in rows]
    assert s["estimate_beats_prior"] is True


def test_trace_round_trip_is_exact(tmp_path):
    run_cli("run", "--config", config_path("failure_init_error_spike"), "--out", tmp_path, "--quiet")
    rows = cli.read_trace_csv(tmp_path / "trace.csv")
    report = json.loads((tmp_path / "report.json").read_text())
    for row, rep in zip(rows, report["reports"]):
        assert row["x_est"] == rep["x_est"][0]
        assert row["v_min"] == rep["v_min"]
        assert row["terms_post"] == rep["terms_post"]
    assert [row["x_true"] for row in rows] == [x[0] for x in report["x_true"][1:]]


def test_header_names_for_vector_states():
    assert cli.trace_header(2, [1, 2]) == [
        "k", "x_true_1", "x_true_2", "x_est_1", "x_est_2", "err", "active_sensor",
        "v_min", "terms_pre", "terms_post", "y_1", "y_2_1", "y_2_2",
    ]


def test_prune_flag(tmp_path):
    assert run_cli("run", "--config", config_path("failure"), "--out", tmp_path, "--prune", "off", "--quiet") == 0
    rows = cli.read_trace_csv(tmp_path / "trace.csv")
    assert [r["terms_post"] for r in rows] == [5, 25, 125, 625, 3125]
    assert run_cli("run", "--config", config_path("failure"), "--out", tmp_path, "--prune", "cap:4", "--quiet") == 0
    assert all(r["terms_post"] <= 4 for r in cli.read_trace_csv(tmp_path / "trace.csv"))
    with pytest.raises(SystemExit):
        run_cli("run", "--config", config_path("failure"), "--out", tmp_path, "--prune", "sometimes")


def test_seed_flag(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_cli("run", "--config", config_path("failure"), "--out", a, "--quiet")
    run_cli("run", "--config", config_path("failure"), "--out", b, "--seed", "7", "--quiet")
    ra, rb = (json.loads((p / "report.json").read_text()) for p in (a, b))
    assert rb["scenario"]["seed"] == 7
    assert ra["x_true"] != rb["x_true"]


def test_bad_prior_weight_exits_2_with_line(tmp_path, caplog):
    d = config_dict("failure")
    d["weights"]["L"] = [[0.0]]
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps(d, indent=2))
    assert run_cli("run", "--config", cfg, "--out", tmp_path / "o") == 2
    assert "weights.L" in caplog.text and "line " in caplog.text
    assert not (tmp_path / "o" / "report.json").exists()


def test_malformed_json_exits_2(tmp_path, caplog):
    cfg = tmp_path / "broken.json"
    cfg.write_text('{\n  "horizon": 5,\n  "system": {\n}}}\n')
    assert run_cli("run", "--config", cfg, "--out", tmp_path / "o") == 2
    assert "line 4" in caplog.text
    assert run_cli("certify", "--config", tmp_path / "missing.json") == 2


def test_numeric_failure_exits_3(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise np.linalg.LinAlgError("singular")

    monkeypatch.setattr(cli, "simulate", boom)
    assert run_cli("run", "--config", config_path("failure"), "--out", tmp_path, "--quiet") == 3


def test_failed_certificate_exits_1(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "certify", lambda *a, **k: [Certificate("stub", False, 1.0, 0.1)])
    assert run_cli("run", "--config", config_path("failure"), "--out", tmp_path, "--certify", "--quiet") == 1
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["certificates"][0]["passed"] is False
    assert run_cli("certify", "--config", config_path("failure")) == 1


def test_run_with_certificates(tmp_path):
    assert run_cli("run", "--config", config_path("failure_spike"), "--out", tmp_path, "--certify", "--quiet") == 0
    certs = json.loads((tmp_path / "report.json").read_text())["certificates"]
    assert {c["name"] for c in certs} >= {"structure_preservation", "numerical_hygiene", "grid_dp_step1"}


def test_certify_subcommand_json(capsys):
    assert run_cli("certify", "--config", config_path("failure_init_error"), "--json") == 0
    certs = json.loads(capsys.readouterr().out)
    assert all(c["passed"] for c in certs)


def test_module_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "minplus_filter", "certify", "--config", str(config_path("failure"))],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0
    assert res.stdout.count("PASS") == 3
