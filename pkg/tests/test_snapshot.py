"""Snapshot persistence: exact resume, clone isolation, rejection paths."""

import json

import numpy as np
import pytest

from efsm import (
    ModelConfig,
    SnapshotError,
    case_config,
    clone_model,
    from_snapshot,
    load_model,
    run_case,
    save_model,
    to_snapshot,
)


def trained_model(steps=400):
    model = ModelConfig().build()
    run_case(case_config(1, horizon_steps=steps), model)
    return model


def assert_models_identical(a, b):
    assert a.n_states == b.n_states
    assert a.dim == b.dim
    assert (a.rho, a.eps, a.phi, a.eps_bar) == (b.rho, b.eps, b.phi, b.eps_bar)
    assert (a.spread_floor, a.var_beta) == (b.spread_floor, b.var_beta)
    np.testing.assert_array_equal(a._centers, b._centers)
    np.testing.assert_array_equal(a._potentials, b._potentials)
    np.testing.assert_array_equal(a._member_counts, b._member_counts)
    np.testing.assert_array_equal(a._member_means, b._member_means)
    np.testing.assert_array_equal(a._member_m2, b._member_m2)
    np.testing.assert_array_equal(a.stack.F, b.stack.F)
    np.testing.assert_array_equal(a.stack.F_o, b.stack.F_o)
    np.testing.assert_array_equal(a._col_sums, b._col_sums)
    assert a._b == b._b
    assert a._count == b._count
    np.testing.assert_array_equal(a._last_z, b._last_z)


def test_snapshot_round_trip_is_exact():
    model = trained_model()
    assert_models_identical(model, from_snapshot(to_snapshot(model)))


def test_file_round_trip_is_exact(tmp_path):
    model = trained_model()
    path = tmp_path / "model.json"
    save_model(model, path)
    assert_models_identical(model, load_model(path))


def test_save_after_load_reproduces_the_file(tmp_path):
    model = trained_model()
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_model(model, p1)
    save_model(load_model(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_resumed_model_continues_bit_identically(tmp_path):
    cfg = case_config(2, horizon_steps=300)
    straight = ModelConfig().build()
    run_case(cfg, straight)
    run_case(cfg, straight)

    resumed = ModelConfig().build()
    run_case(cfg, resumed)
    path = tmp_path / "mid.json"
    save_model(resumed, path)
    resumed = load_model(path)
    log = run_case(cfg, resumed)

    assert_models_identical(straight, resumed)
    assert log.steps == 300


def test_fresh_model_round_trips():
    model = ModelConfig().build()
    back = from_snapshot(to_snapshot(model))
    assert back.n_states == 0
    assert back._count == 0
    assert back._last_z is None
    assert back.last_estimate is None


def test_clone_is_isolated():
    model = trained_model(steps=200)
    twin = clone_model(model)
    assert_models_identical(model, twin)
    run_case(case_config(2, horizon_steps=200), twin)
    # the original must not have moved
    assert model._count == 200
    again = clone_model(model)
    assert_models_identical(model, again)


def test_snapshot_carries_last_estimate():
    model = trained_model(steps=50)
    twin = clone_model(model)
    np.testing.assert_array_equal(
        twin.last_estimate.probs, model.last_estimate.probs
    )


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.update(format="something-else"),
        lambda d: d.update(version=99),
        lambda d: d.pop("clusters"),
        lambda d: d["codec"].update(q=5),
        lambda d: d["clusters"][0].update(id=7),
        lambda d: d["clusters"][0].update(potential=0.0),
        lambda d: d["clusters"][0].update(member_count=0),
        lambda d: d["accumulators"].update(t=-1),
        lambda d: d.update(last_observation=None),
        lambda d: d.update(last_estimate=[0.5] * (len(d["clusters"]) + 1)),
        lambda d: d["transitions"].update(F_o=[[0.0] * 3] * 17),
    ],
)
def test_malformed_snapshots_are_rejected(mutate):
    doc = to_snapshot(trained_model(steps=120))
    assert doc["clusters"], "premise: the trained model has clusters"
    mutate(doc)
    with pytest.raises(SnapshotError):
        from_snapshot(doc)


def test_transition_shape_mismatch_rejected():
    doc = to_snapshot(trained_model(steps=120))
    doc["transitions"]["F"] = [[[0.5]]]
    with pytest.raises(SnapshotError):
        from_snapshot(doc)


def test_load_rejects_non_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("not json {")
    with pytest.raises(SnapshotError):
        load_model(path)


def test_load_rejects_non_object_root(tmp_path):
    path = tmp_path / "list.json"
    path.write_text("[1, 2]\n")
    with pytest.raises(SnapshotError):
        load_model(path)


def test_snapshot_document_shape():
    model = trained_model(steps=80)
    doc = to_snapshot(model)
    assert doc["format"] == "efsm-model"
    assert doc["version"] == 1
    assert doc["codec"]["q"] == 17
    assert len(doc["clusters"]) == model.n_states
    assert json.loads(json.dumps(doc)) == doc   # JSON-serializable throughout
