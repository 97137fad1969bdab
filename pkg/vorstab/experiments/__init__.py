"""Experiment suite: each experiment writes CSVs and a report whose verdicts
are recomputed from those CSVs."""

from __future__ import annotations

from collections.abc import Callable
from pathlib import Path

from vorstab.errors import ConfigError
from vorstab.experiments.report import (
    EXIT_CODES,
    FAIL,
    INVALID,
    PASS,
    Criterion,
    ExperimentReport,
    ExperimentSpec,
)
from vorstab.experiments.rigidity import rigidity_verdicts, run_rigidity
from vorstab.experiments.rotating_wave import rotating_wave_verdicts, run_rotating_wave
from vorstab.experiments.stability import run_stability, stability_verdicts
from vorstab.experiments.structural import run_structural, structural_verdicts
from vorstab.logging import get_logger

Runner = Callable[[ExperimentSpec, Path], ExperimentReport]
Verdicts = Callable[
    [ExperimentSpec, Path], tuple[list[Criterion], dict[str, dict[str, float]]]
]

EXPERIMENTS: dict[str, tuple[Runner, Verdicts]] = {
    "stability": (run_stability, stability_verdicts),
    "rotating-wave": (run_rotating_wave, rotating_wave_verdicts),
    "structural": (run_structural, structural_verdicts),
    "rigidity": (run_rigidity, rigidity_verdicts),
}

logger = get_logger(component="experiments")


def _lookup(name: str) -> tuple[Runner, Verdicts]:
    try:
        return EXPERIMENTS[name]
    except KeyError:
        known = ", ".join(sorted(EXPERIMENTS))
        raise ConfigError(f"unknown experiment {name!r}; expected one of {known}") from None


def run_experiment(
    name: str, spec: ExperimentSpec, out_dir: str | Path
) -> ExperimentReport:
    """Run ``name`` into ``out_dir`` and save its ``report.json``."""
    runner, _ = _lookup(name)
    out_dir = Path(out_dir)
    logger.info("experiment_started", experiment=name, out_dir=str(out_dir))
    report = runner(spec, out_dir)
    report.save(out_dir)
    logger.info("experiment_finished", experiment=name, verdict=report.verdict)
    return report


def evaluate(name: str, spec: ExperimentSpec, out_dir: str | Path) -> ExperimentReport:
    """Rebuild the report of a finished run from its CSVs alone."""
    _, verdicts = _lookup(name)
    out_dir = Path(out_dir)
    criteria, drifts = verdicts(spec, out_dir)
    files = sorted({c.evidence for c in criteria if "," not in c.evidence})
    return ExperimentReport(name, criteria, drifts, spec.thresholds(), files=files)


def exp_stability(spec: ExperimentSpec, out_dir: str | Path) -> ExperimentReport:
    return run_experiment("stability", spec, out_dir)


def exp_rotating_wave(spec: ExperimentSpec, out_dir: str | Path) -> ExperimentReport:
    return run_experiment("rotating-wave", spec, out_dir)


def exp_structural(spec: ExperimentSpec, out_dir: str | Path) -> ExperimentReport:
    return run_experiment("structural", spec, out_dir)


def exp_rigidity(spec: ExperimentSpec, out_dir: str | Path) -> ExperimentReport:
    return run_experiment("rigidity", spec, out_dir)


__all__ = [
    "EXIT_CODES",
    "EXPERIMENTS",
    "FAIL",
    "INVALID",
    "PASS",
    "Criterion",
    "ExperimentReport",
    "ExperimentSpec",
    "evaluate",
    "exp_rigidity",
    "exp_rotating_wave",
    "exp_stability",
    "exp_structural",
    "run_experiment",
]
