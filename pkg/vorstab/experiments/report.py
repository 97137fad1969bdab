"""Experiment configuration, criteria and reports."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import polars as pl

from vorstab.config import from_mapping, load_json
from vorstab.errors import ConfigError
from vorstab.storage.paths import REPORT_NAME

PASS = "PASS"
FAIL = "FAIL"
INVALID = "INVALID"

EXIT_CODES = {PASS: 0, FAIL: 2, INVALID: 3}


@dataclass(slots=True)
class ExperimentSpec:
    """Grid, steady state, amplitude ladder and thresholds of one experiment.

    Thresholds are harness policy: ``response_factor`` bounds the sup distance
    by a multiple of the perturbation, ``monotone_ratio`` bounds successive
    sup distances along the ladder, and ``drift_gate`` invalidates runs whose
    energy or moment of inertia drift too much.
    """

    name: str = "stability"
    a: float = 0.0
    nr: int = 32
    ntheta: int = 64
    amplitudes: list[float] = field(default_factory=lambda: [1e-1, 1e-2, 1e-3])
    p: float = 2.0
    t_end: float = 10.0
    cfl: float = 0.5
    snapshot_stride: int = 5
    hyperdiffusion: float = 0.0
    seed: int = 0
    response_factor: float = 5.0
    monotone_ratio: float = 0.5
    drift_gate: float = 1e-3
    mean_gate: float = 1e-8
    wave_ns: list[int] = field(default_factory=lambda: [4, 8, 16])
    instability_fraction: float = 0.5
    propagation_tol: float = 1e-2
    period_fraction: float = 1.0
    ascent_seeds: int = 20
    affine_seeds: int = 3
    max_iters: int = 500
    convergence_tol: float = 1e-2
    classifier_tol: float = 1e-8
    annulus: bool = True
    annulus_a: float = 0.5

    def __post_init__(self) -> None:
        amps = [float(x) for x in self.amplitudes]
        if not amps or any(x <= 0 for x in amps):
            raise ConfigError("amplitudes must be positive")
        if any(b >= a for a, b in zip(amps, amps[1:])):
            raise ConfigError("amplitudes must be strictly decreasing")
        self.amplitudes = amps
        if not self.t_end > 0:
            raise ConfigError(f"t_end must be > 0, got {self.t_end}")
        if self.p < 1:
            raise ConfigError(f"p must be >= 1, got {self.p}")
        if not self.wave_ns or any(n < 1 for n in self.wave_ns):
            raise ConfigError("wave_ns must be positive integers")
        if self.ascent_seeds < 1 or self.affine_seeds < 0:
            raise ConfigError("ascent_seeds must be >= 1 and affine_seeds >= 0")
        if not 0 < self.period_fraction <= 1:
            raise ConfigError("period_fraction must be in (0, 1]")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentSpec":
        return from_mapping(cls, data)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentSpec":
        return cls.from_dict(load_json(path))

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def thresholds(self) -> dict[str, Any]:
        """Thresholds used by the verdicts, all of them harness policy."""
        keys = (
            "response_factor",
            "monotone_ratio",
            "drift_gate",
            "mean_gate",
            "instability_fraction",
            "propagation_tol",
            "convergence_tol",
            "classifier_tol",
        )
        return {key: getattr(self, key) for key in keys} | {"source": "harness"}


@dataclass(slots=True)
class Criterion:
    name: str
    verdict: str
    evidence: str
    detail: dict[str, Any] = field(default_factory=dict)


@dataclass(slots=True)
class ExperimentReport:
    name: str
    criteria: list[Criterion]
    drifts: dict[str, dict[str, float]] = field(default_factory=dict)
    thresholds: dict[str, Any] = field(default_factory=dict)
    files: list[str] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        verdicts = {c.verdict for c in self.criteria}
        if INVALID in verdicts:
            return INVALID
        if FAIL in verdicts:
            return FAIL
        return PASS

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.verdict]

    def to_dict(self) -> dict[str, Any]:
        return asdict(self) | {"verdict": self.verdict}

    def save(self, out_dir: str | Path) -> Path:
        path = Path(out_dir) / REPORT_NAME
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, default=_json_default))
        return path


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    return str(value)


def verdict(ok: bool) -> str:
    return PASS if ok else FAIL


def read_series(out_dir: Path, name: str) -> pl.DataFrame:
    return pl.read_csv(out_dir / name)


def drift_summary(frame: pl.DataFrame) -> dict[str, float]:
    """Relative drifts of E, I and the mean vorticity over a run."""
    e = frame["E"].to_numpy()
    i = frame["I"].to_numpy()
    m = frame["mean"].to_numpy()
    e_scale = abs(e[0]) or 1.0
    i_scale = float(frame["I_scale"][0]) or 1.0
    m_scale = float(frame["mean_scale"][0]) or 1.0
    return {
        "E": float(np.max(np.abs(e - e[0])) / e_scale),
        "I": float(np.max(np.abs(i - i[0])) / i_scale),
        "mean": float(np.max(np.abs(m - m[0])) / m_scale),
    }


def conservation_criterion(
    out_dir: Path, name: str, spec: ExperimentSpec
) -> tuple[Criterion, dict[str, float]]:
    """INVALID when a run drifts beyond the conservation gates."""
    drifts = drift_summary(read_series(out_dir, name))
    ok = (
        drifts["E"] <= spec.drift_gate
        and drifts["I"] <= spec.drift_gate
        and drifts["mean"] <= spec.mean_gate
    )
    criterion = Criterion(
        f"conservation:{name}", PASS if ok else INVALID, name, dict(drifts)
    )
    return criterion, drifts
