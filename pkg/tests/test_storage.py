import json
import logging
from pathlib import Path

import numpy as np
import pytest
import structlog

from vorstab.errors import FieldFormatError
from vorstab.grid import ScalarField, make_grid
from vorstab.logging import configure_structlog, get_logger, reset_structlog
from vorstab.storage import OutputConfig, RunManifest, read_field, sha256_file, write_field
from vorstab.storage.paths import eigenfield_name, manifest_path, snapshot_name


def _reset_structlog() -> None:
    """Reset structlog/global logging between tests."""
    reset_structlog()
    logging.shutdown()
    structlog.reset_defaults()


def _field(a: float = 0.0, nr: int = 6, ntheta: int = 8) -> ScalarField:
    grid = make_grid(a, nr, ntheta)
    return ScalarField.from_function(grid, lambda r, th: np.exp(r) * np.sin(3 * th) + r / 3)


def test_write_field_header_and_rows(tmp_path: Path):
    field = _field(a=0.25)
    path = write_field(field, tmp_path / "f.csv")

    lines = path.read_text().splitlines()
    assert lines[0] == "# a=0.25 nr=6 ntheta=8"
    assert lines[1] == "j,k,r,theta,value"
    assert len(lines) == 2 + 6 * 8


def test_read_field_recovers_values_bit_for_bit(tmp_path: Path):
    field = _field()
    path = write_field(field, tmp_path / "f.csv")

    loaded = read_field(path)
    assert loaded.grid == field.grid
    assert np.array_equal(loaded.values, field.values)


def test_read_field_accepts_shuffled_rows(tmp_path: Path):
    field = _field()
    path = write_field(field, tmp_path / "f.csv")
    header, columns, *rows = path.read_text().splitlines()
    shuffled = tmp_path / "shuffled.csv"
    shuffled.write_text("\n".join([header, columns, *reversed(rows)]) + "\n")

    assert np.array_equal(read_field(shuffled).values, field.values)


def test_read_field_rejects_bad_header(tmp_path: Path):
    path = tmp_path / "bad.csv"
    path.write_text("# nr=4\nj,k,r,theta,value\n")

    with pytest.raises(FieldFormatError):
        read_field(path)


def test_read_field_rejects_missing_rows(tmp_path: Path):
    path = write_field(_field(), tmp_path / "f.csv")
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")

    with pytest.raises(FieldFormatError):
        read_field(path)


def test_read_field_rejects_grid_mismatch(tmp_path: Path):
    path = write_field(_field(), tmp_path / "f.csv")

    with pytest.raises(FieldFormatError):
        read_field(path, grid=make_grid(0.0, 6, 16))


def test_read_field_missing_file(tmp_path: Path):
    with pytest.raises(FileNotFoundError):
        read_field(tmp_path / "nope.csv")


def test_path_helpers():
    assert snapshot_name(3) == "snap_3.csv"
    assert eigenfield_name(0, 2) == "eig_0_2.csv"
    with pytest.raises(ValueError):
        snapshot_name(-1)


def test_manifest_round_trip_and_validate(tmp_path: Path):
    config = tmp_path / "config.json"
    config.write_text('{"nr": 8}')
    output = write_field(_field(), tmp_path / "out.csv")

    manifest = RunManifest(out_dir=tmp_path, command=["vorstab", "simulate"])
    manifest.add_config(config)
    manifest.add_output(output)
    manifest.add_output(output)
    manifest.wall_time = 1.5
    path = manifest.save()

    assert path == manifest_path(tmp_path)
    assert not path.with_suffix(".json.tmp").exists()
    loaded = RunManifest.load(path)
    assert loaded.outputs == ["out.csv"]
    assert loaded.config_hashes[str(config)] == sha256_file(config)
    assert loaded.command == ["vorstab", "simulate"]
    assert loaded.validate() == []
    assert not path.with_suffix(".json.tmp").exists()

    output.unlink()
    assert loaded.validate() == ["out.csv"]


def test_output_config_log_path(tmp_path: Path):
    config = OutputConfig(base_path=tmp_path / "run")
    assert config.log_path() == (tmp_path / "run" / "logs" / "run.log").resolve()


def test_configure_structlog_idempotent(tmp_path: Path):
    log_file = tmp_path / "logs" / "custom.log"
    try:
        configure_structlog(log_file=log_file)
        configure_structlog(log_file=log_file)
        logger = get_logger(component="test")
        logger.info("hello", step=1)
    finally:
        _reset_structlog()

    lines = log_file.read_text().strip().splitlines()
    assert len(lines) == 1
    record = json.loads(lines[0])
    assert record["event"] == "hello"
    assert record["component"] == "test"
    assert record["step"] == 1
    assert "timestamp" in record


def test_module_logger_follows_reconfiguration(tmp_path: Path):
    from vorstab.elliptic import build_context

    log_file = tmp_path / "logs" / "run.log"
    try:
        configure_structlog(log_file=log_file)
        build_context(make_grid(0.0, 8, 8))
    finally:
        _reset_structlog()

    records = [json.loads(line) for line in log_file.read_text().splitlines()]
    built = [r for r in records if r["event"] == "context_built"]
    assert len(built) == 1
    assert built[0]["component"] == "elliptic"
    assert built[0]["nr"] == 8
