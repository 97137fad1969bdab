import json
import logging
from pathlib import Path

import numpy as np
import pytest
import structlog

from vorstab import __version__
from vorstab.bessel import bessel_table
from vorstab.cli import main
from vorstab.grid import ScalarField, make_grid
from vorstab.logging import reset_structlog
from vorstab.storage import RunManifest, read_field, write_field


def _main(argv: list[str]) -> int:
    reset_structlog()
    logging.shutdown()
    structlog.reset_defaults()
    return main(argv)


def _manifest(out: Path) -> RunManifest:
    manifest = RunManifest.load(out / "manifest.json")
    assert manifest.validate() == []
    return manifest


def test_missing_required_argument_exits_1(capsys):
    with pytest.raises(SystemExit) as info:
        _main(["eig", "--domain", "disk", "--ntheta", "8", "--out", "x"])
    assert info.value.code == 1
    assert "--nr" in capsys.readouterr().err


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        _main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_eig_prints_eigenvalues_and_writes_manifest(tmp_path: Path, capsys):
    out = tmp_path / "eig"
    code = _main(
        ["eig", "--domain", "disk", "--nr", "24", "--ntheta", "16", "--out", str(out)]
    )

    assert code == 0
    first = float(capsys.readouterr().out.splitlines()[0])
    assert first == pytest.approx(bessel_table().j11 ** 2, rel=2e-2)
    manifest = _manifest(out)
    assert "eigen.json" in manifest.outputs
    assert manifest.grid["nr"] == 24
    assert manifest.tolerances["solve_rtol"] == 1e-12
    assert (out / "logs" / "run.log").exists()


def test_solve_writes_stream_function_and_summary(tmp_path: Path):
    grid = make_grid(0.5, 8, 16)
    field = ScalarField.from_function(grid, lambda r, th: r * np.cos(th))
    field_path = write_field(field, tmp_path / "v.csv")
    out = tmp_path / "solve"

    code = _main(["solve", "--field", str(field_path), "--gamma", "0.5", "--out", str(out)])

    assert code == 0
    assert read_field(out / "psi.csv").grid == grid
    summary = json.loads((out / "summary.json").read_text())
    assert summary["gamma"] == [0.5]
    assert len(summary["fluxes"]) == 2
    assert set(_manifest(out).outputs) == {"psi.csv", "summary.json"}


def test_solve_rejects_circulation_on_disk(tmp_path: Path):
    field_path = write_field(ScalarField.zeros(make_grid(0.0, 8, 8)), tmp_path / "v.csv")
    code = _main(["solve", "--field", str(field_path), "--gamma", "1", "--out", str(tmp_path)])
    assert code == 1


def test_simulate_missing_config_exits_1(tmp_path: Path):
    code = _main(["simulate", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)])
    assert code == 1


def test_simulate_runs_config(tmp_path: Path):
    config = tmp_path / "sim.json"
    config.write_text(json.dumps({"nr": 8, "ntheta": 16, "t_end": 0.05, "wave_n": 1}))
    out = tmp_path / "run"

    assert _main(["simulate", "--config", str(config), "--out", str(out)]) == 0
    manifest = _manifest(out)
    assert {"series.csv", "config.json", "final.csv"} <= set(manifest.outputs)
    assert str(config) in manifest.config_hashes


def test_ascend_on_disk_with_zero_circulation(tmp_path: Path):
    grid = make_grid(0.0, 8, 16)
    seed = ScalarField(grid, np.random.default_rng(0).standard_normal(grid.shape))
    seed_path = write_field(seed, tmp_path / "seed.csv")
    out = tmp_path / "ascent"

    code = _main(
        ["ascend", "--seed", str(seed_path), "--gamma", "0", "--max-iters", "5", "--out", str(out)]
    )

    assert code == 0
    payload = json.loads((out / "ascent.json").read_text())
    assert payload["iterations"] <= 5
    assert _manifest(out).tolerances["class_tol"] == 1e-10


def test_experiment_rejects_unknown_name(tmp_path: Path):
    with pytest.raises(SystemExit) as info:
        _main(["experiment", "vortex", "--out", str(tmp_path)])
    assert info.value.code == 1


def test_experiment_bad_config_exits_1(tmp_path: Path):
    config = tmp_path / "exp.json"
    config.write_text(json.dumps({"amplitudes": [0.01, 0.1]}))
    code = _main(["experiment", "stability", "--config", str(config), "--out", str(tmp_path)])
    assert code == 1


def test_experiment_config_for_another_experiment_exits_1(tmp_path: Path):
    config = tmp_path / "exp.json"
    config.write_text(json.dumps({"name": "rigidity", "nr": 8, "ntheta": 16}))
    out = tmp_path / "run"
    code = _main(["experiment", "stability", "--config", str(config), "--out", str(out)])
    assert code == 1
    assert not (out / "report.json").exists()
