"""CLI subcommands run in process through main(argv)."""

import json

import pytest

from efsm import ActionCodec, EfsmModel, ModelConfig, case_config, run_case, save_model
from efsm.cli import main
from efsm.snapshot import load_model


def write_cfg(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc) + "\n")
    return str(path)


def run_cfg(tmp_path, horizon=200, case_id=2, **extra):
    doc = {"scenario": {"case_id": case_id, "horizon_steps": horizon}}
    doc.update(extra)
    return write_cfg(tmp_path, doc)


# ------------------------------------------------------------------------ run

def test_run_writes_all_artifacts(tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(["run", "--config", run_cfg(tmp_path), "--out", str(out)])
    assert rc == 0
    for name in ("runlog.csv", "runlog.summary.json", "model.json", "runlog.png"):
        assert (out / name).exists(), name
    summary = json.loads((out / "runlog.summary.json").read_text())
    assert summary["steps"] == 200
    assert summary["terminal"] == "horizon"
    assert "case 2" in capsys.readouterr().out


def test_run_quiet_suppresses_output(tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(["run", "--config", run_cfg(tmp_path, horizon=60), "--out", str(out), "--quiet"])
    assert rc == 0
    assert capsys.readouterr().out == ""


def test_run_set_overrides_dotted_paths(tmp_path):
    out = tmp_path / "out"
    rc = main(
        [
            "run", "--config", run_cfg(tmp_path),
            "--out", str(out),
            "--set", "scenario.horizon_steps=80",
            "--set", "model.var_beta=0.4",
        ]
    )
    assert rc == 0
    summary = json.loads((out / "runlog.summary.json").read_text())
    assert summary["steps"] == 80
    model = load_model(out / "model.json")
    assert model.var_beta == 0.4


def test_run_model_out_location(tmp_path):
    out = tmp_path / "out"
    model_path = tmp_path / "elsewhere.json"
    rc = main(
        [
            "run", "--config", run_cfg(tmp_path, horizon=60),
            "--out", str(out), "--model-out", str(model_path),
        ]
    )
    assert rc == 0
    assert model_path.exists()
    assert not (out / "model.json").exists()


def test_run_resumes_from_model_in(tmp_path):
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    cfg = run_cfg(tmp_path, horizon=150)
    assert main(["run", "--config", cfg, "--out", str(out1), "--quiet"]) == 0
    first = load_model(out1 / "model.json")
    rc = main(
        [
            "run", "--config", cfg, "--out", str(out2),
            "--model-in", str(out1 / "model.json"), "--quiet",
        ]
    )
    assert rc == 0
    resumed = load_model(out2 / "model.json")
    assert resumed.accumulators.t == first.accumulators.t + 150


@pytest.mark.parametrize(
    "doc",
    [
        {},                                           # no scenario section
        {"scenario": {"horizon_steps": 10}},          # no case_id
        {"scenario": {"case_id": 2}, "bogus": 1},     # unknown top-level key
        {"scenario": {"case_id": 2, "warp": 9}},      # unknown scenario key
        {"scenario": {"case_id": 7}},                 # bad case id
    ],
)
def test_run_config_errors_exit_2(tmp_path, doc, capsys):
    cfg = write_cfg(tmp_path, doc)
    rc = main(["run", "--config", cfg, "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_run_rejects_non_json_config(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{nope")
    rc = main(["run", "--config", str(path), "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_run_bad_set_expression_exits_2(tmp_path):
    rc = main(
        [
            "run", "--config", run_cfg(tmp_path),
            "--out", str(tmp_path / "out"), "--set", "horizonsteps",
        ]
    )
    assert rc == 2


def test_run_mismatched_model_in_exits_3(tmp_path, capsys):
    snap = tmp_path / "narrow.json"
    save_model(EfsmModel(dim=3, codec=ActionCodec(-1.0, 1.0, 0.5)), snap)
    rc = main(
        [
            "run", "--config", run_cfg(tmp_path),
            "--out", str(tmp_path / "out"), "--model-in", str(snap),
        ]
    )
    assert rc == 3
    assert "error:" in capsys.readouterr().err


def test_run_controller_preset_and_inline_params(tmp_path):
    doc = {
        "scenario": {
            "case_id": 1,
            "horizon_steps": 60,
            "follower_params_initial": "normal",
            "preceding_params": {
                "a_max": 1.2, "v0": 25.0, "s0": 1.0, "T": 1.0, "b_comf": 2.5,
            },
        }
    }
    rc = main(
        ["run", "--config", write_cfg(tmp_path, doc), "--out", str(tmp_path / "out"), "--quiet"]
    )
    assert rc == 0


def test_run_unknown_preset_exits_2(tmp_path):
    doc = {
        "scenario": {
            "case_id": 1, "horizon_steps": 60,
            "follower_params_initial": "reckless",
        }
    }
    rc = main(
        ["run", "--config", write_cfg(tmp_path, doc), "--out", str(tmp_path / "out")]
    )
    assert rc == 2


# ----------------------------------------------------------------- experiment

def test_experiment_writes_report_and_figures(tmp_path, capsys):
    doc = {
        "cycles": 1,
        "cases": [{"case_id": 2, "horizon_steps": 150, "repetitions": 2}],
    }
    out = tmp_path / "out"
    rc = main(["experiment", "--config", write_cfg(tmp_path, doc), "--out", str(out)])
    assert rc == 0
    for name in ("report.json", "jsd.csv", "long.csv", "model.json", "jsd.png", "states.png"):
        assert (out / name).exists(), name
    report = json.loads((out / "report.json").read_text())
    assert report["total_runs"] == 2
    assert "2 runs" in capsys.readouterr().out


def test_experiment_set_overrides_cycles(tmp_path):
    doc = {"cycles": 1, "cases": [{"case_id": 2, "horizon_steps": 100}]}
    out = tmp_path / "out"
    rc = main(
        [
            "experiment", "--config", write_cfg(tmp_path, doc),
            "--out", str(out), "--set", "cycles=2", "--quiet",
        ]
    )
    assert rc == 0
    assert json.loads((out / "report.json").read_text())["total_runs"] == 2


def test_experiment_rejects_empty_cases(tmp_path):
    doc = {"cases": []}
    rc = main(
        [
            "experiment", "--config", write_cfg(tmp_path, doc),
            "--out", str(tmp_path / "out"),
        ]
    )
    assert rc == 2


# ----------------------------------------------------------------------- eval

def test_eval_rebuilds_report_from_runlogs(tmp_path):
    logs_dir = tmp_path / "logs"
    out1, out2 = logs_dir / "r1", logs_dir / "r2"
    cfg = run_cfg(tmp_path, horizon=120)
    assert main(["run", "--config", cfg, "--out", str(out1), "--quiet"]) == 0
    assert main(["run", "--config", cfg, "--out", str(out2), "--quiet"]) == 0
    out = tmp_path / "evalout"
    rc = main(
        [
            "eval", str(out1 / "runlog.csv"), str(out2 / "runlog.csv"),
            "--out", str(out), "--quiet",
        ]
    )
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert report["total_runs"] == 2
    assert (out / "jsd.png").exists()


def test_eval_missing_log_exits_2(tmp_path):
    rc = main(["eval", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "out")])
    assert rc == 2


# --------------------------------------------------------------- export-model

@pytest.fixture()
def trained_snapshot(tmp_path):
    model = ModelConfig().build()
    run_case(case_config(1, horizon_steps=300), model)
    path = tmp_path / "model.json"
    save_model(model, path)
    return path, model


def test_export_model_tables(tmp_path, trained_snapshot):
    path, model = trained_snapshot
    out = tmp_path / "export"
    rc = main(["export-model", "--model-in", str(path), "--out", str(out), "--quiet"])
    assert rc == 0
    n, q = model.n_states, model.codec.q
    centers = (out / "centers.csv").read_text().splitlines()
    assert len(centers) == 1 + n
    assert centers[0].startswith("id,center_0")
    transitions = (out / "transitions.csv").read_text().splitlines()
    assert len(transitions) == 1 + q * n * n
    marginal = (out / "marginal.csv").read_text().splitlines()
    assert len(marginal) == 1 + n * n


def test_export_model_empty_snapshot(tmp_path):
    path = tmp_path / "fresh.json"
    save_model(ModelConfig().build(), path)
    out = tmp_path / "export"
    rc = main(["export-model", "--model-in", str(path), "--out", str(out), "--quiet"])
    assert rc == 0
    assert (out / "transitions.csv").read_text() == "action,from,to,F,P\n"
    assert (out / "marginal.csv").read_text() == "from,to,P\n"


# -------------------------------------------------------------------- inspect

def test_inspect_audit_ok(tmp_path, trained_snapshot, capsys):
    path, model = trained_snapshot
    rc = main(["inspect", "--model-in", str(path)])
    assert rc == 0
    text = capsys.readouterr().out
    assert f"{model.n_states} states" in text
    assert "row-sum audit: ok" in text


def test_inspect_detects_mass_drift(tmp_path, trained_snapshot, capsys):
    path, _ = trained_snapshot
    doc = json.loads(path.read_text())
    doc["transitions"]["F_o"][0][0] *= 2.0
    drifted = tmp_path / "drifted.json"
    drifted.write_text(json.dumps(doc))
    rc = main(["inspect", "--model-in", str(drifted)])
    assert rc == 4
    assert "FAILED" in capsys.readouterr().out


def test_inspect_corrupt_snapshot_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"format": "other"}')
    rc = main(["inspect", "--model-in", str(bad)])
    assert rc == 2
    assert "error:" in capsys.readouterr().err
