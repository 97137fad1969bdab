import json
from pathlib import Path

import numpy as np
import polars as pl
import pytest

from vorstab.errors import ConfigError
from vorstab.experiments import (
    EXIT_CODES,
    FAIL,
    INVALID,
    PASS,
    Criterion,
    ExperimentReport,
    ExperimentSpec,
    evaluate,
    run_experiment,
)
from vorstab.experiments.harness import parallel_map
from vorstab.experiments.report import conservation_criterion, drift_summary
from vorstab.experiments.rigidity import classifier_candidates, classify, mixed_state
from vorstab.grid import make_grid


def _tiny_spec(**overrides) -> ExperimentSpec:
    base = {
        "nr": 8,
        "ntheta": 16,
        "t_end": 0.05,
        "amplitudes": [1e-1, 1e-2],
        "annulus": False,
        "wave_ns": [1],
        "period_fraction": 0.01,
        "ascent_seeds": 1,
        "affine_seeds": 0,
        "max_iters": 5,
    }
    return ExperimentSpec(**(base | overrides))


def _series(frame_overrides: dict | None = None) -> pl.DataFrame:
    data = {
        "t": [0.0, 0.5, 1.0],
        "E": [1.0, 1.0, 1.0],
        "I": [2.0, 2.0, 2.0],
        "mean": [0.0, 0.0, 0.0],
        "I_scale": [2.0, 2.0, 2.0],
        "mean_scale": [1.0, 1.0, 1.0],
    }
    return pl.DataFrame(data | (frame_overrides or {}))


def test_spec_validation():
    with pytest.raises(ConfigError):
        ExperimentSpec(amplitudes=[])
    with pytest.raises(ConfigError):
        ExperimentSpec(amplitudes=[1e-2, 1e-1])
    with pytest.raises(ConfigError):
        ExperimentSpec(t_end=0.0)
    with pytest.raises(ConfigError):
        ExperimentSpec(wave_ns=[0])
    with pytest.raises(ConfigError):
        ExperimentSpec(period_fraction=1.5)
    with pytest.raises(ConfigError):
        ExperimentSpec.from_dict({"amplitude": [0.1]})


def test_spec_from_json(tmp_path: Path):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps({"name": "structural", "nr": 8, "amplitudes": [0.2, 0.1]}))
    spec = ExperimentSpec.from_json(path)
    assert spec.amplitudes == [0.2, 0.1]
    assert spec.to_dict()["name"] == "structural"


def test_thresholds_are_harness_policy():
    thresholds = ExperimentSpec().thresholds()
    assert thresholds["source"] == "harness"
    assert thresholds["drift_gate"] == 1e-3
    assert thresholds["mean_gate"] == 1e-8


def test_report_verdict_and_exit_code(tmp_path: Path):
    ok = Criterion("a", PASS, "x.csv")
    bad = Criterion("b", FAIL, "x.csv")
    invalid = Criterion("c", INVALID, "x.csv")

    assert ExperimentReport("e", [ok]).exit_code == 0
    assert ExperimentReport("e", [ok, bad]).verdict == FAIL
    assert ExperimentReport("e", [bad, invalid]).verdict == INVALID
    assert EXIT_CODES == {PASS: 0, FAIL: 2, INVALID: 3}

    report = ExperimentReport("e", [ok, bad], {"x.csv": {"E": np.float64(1e-5)}})
    payload = json.loads(report.save(tmp_path).read_text())
    assert payload["verdict"] == FAIL
    assert payload["drifts"]["x.csv"]["E"] == 1e-5


def test_drift_summary_is_relative():
    frame = _series({"E": [1.0, 1.01, 0.99], "I": [2.0, 2.0, 2.2]})
    drifts = drift_summary(frame)
    assert drifts["E"] == pytest.approx(0.01)
    assert drifts["I"] == pytest.approx(0.1)
    assert drifts["mean"] == 0.0


def test_conservation_gate_marks_runs_invalid(tmp_path: Path):
    spec = ExperimentSpec()
    _series().write_csv(tmp_path / "steady.csv")
    _series({"mean": [0.0, 0.0, 1e-6]}).write_csv(tmp_path / "drifting.csv")

    criterion, _ = conservation_criterion(tmp_path, "steady.csv", spec)
    assert criterion.verdict == PASS
    criterion, drifts = conservation_criterion(tmp_path, "drifting.csv", spec)
    assert criterion.verdict == INVALID
    assert drifts["mean"] == pytest.approx(1e-6)


def test_classifier_separates_orbit_members():
    grid = make_grid(0.0, 24, 32)
    reference = mixed_state(grid, 1.0, 1.0)
    for label, candidate, expected in classifier_candidates(grid):
        assert classify(reference, candidate, 1e-8)["member"] == expected, label


def test_parallel_map_keeps_order(monkeypatch):
    monkeypatch.setenv("VORSTAB_THREADS", "3")
    assert parallel_map(lambda x: x * x, range(6)) == [0, 1, 4, 9, 16, 25]


def test_unknown_experiment_is_rejected(tmp_path: Path):
    with pytest.raises(ConfigError):
        run_experiment("vortex", ExperimentSpec(), tmp_path)
    with pytest.raises(ConfigError):
        evaluate("vortex", ExperimentSpec(), tmp_path)


def test_stability_report_is_recomputed_from_csvs(tmp_path: Path):
    spec = _tiny_spec()
    report = run_experiment("stability", spec, tmp_path)

    assert (tmp_path / "report.json").exists()
    assert {"stability_delta_0.csv", "stability_threshold.csv"} <= set(report.files)
    rebuilt = evaluate("stability", spec, tmp_path)
    assert [(c.name, c.verdict) for c in rebuilt.criteria] == [
        (c.name, c.verdict) for c in report.criteria
    ]
    threshold = next(c for c in report.criteria if c.name == "threshold:disk")
    assert threshold.verdict == PASS


@pytest.mark.slow
@pytest.mark.parametrize("name", ["rotating-wave", "structural", "rigidity"])
def test_experiments_run_on_a_tiny_grid(tmp_path: Path, name):
    spec = _tiny_spec(name=name)
    report = run_experiment(name, spec, tmp_path)

    assert report.verdict in (PASS, FAIL, INVALID)
    assert all((tmp_path / f).exists() for f in report.files)
    rebuilt = evaluate(name, spec, tmp_path)
    assert rebuilt.verdict == report.verdict


@pytest.mark.slow
def test_rigidity_classifier_rows(tmp_path: Path):
    run_experiment("rigidity", _tiny_spec(nr=24, ntheta=32), tmp_path)
    frame = pl.read_csv(tmp_path / "rigidity_classifier.csv")
    assert frame["member"].to_list() == frame["expected_member"].to_list()
