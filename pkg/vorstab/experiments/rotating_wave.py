"""Instability of ``J1(j11 r) cos(theta)`` and orbital stability up to rotation.

The exact solutions ``J1(j11 r) cos(theta - t/n) + 2/n`` start arbitrarily
close to the steady state as ``n`` grows yet drift a fixed distance away
from it, while staying close to its rotation orbit.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from vorstab.bessel import bessel_j, bessel_table
from vorstab.elliptic import build_context
from vorstab.euler import rotating_wave
from vorstab.experiments.harness import parallel_map, simulate
from vorstab.experiments.report import (
    Criterion,
    ExperimentReport,
    ExperimentSpec,
    conservation_criterion,
    read_series,
    verdict,
)
from vorstab.grid import Grid, ScalarField, lp_distance, lp_norm, make_grid


def series_name(n: int) -> str:
    return f"rotating_wave_n{n}.csv"


def critical_state(grid: Grid) -> ScalarField:
    j11 = bessel_table().j11
    return ScalarField.from_function(
        grid, lambda r, th: bessel_j(1, j11 * r) * np.cos(th)
    )


def horizon(spec: ExperimentSpec, n: int) -> float:
    """One rotation period ``2 pi n`` scaled by ``period_fraction``."""
    return 2.0 * np.pi * n * spec.period_fraction


def run_rotating_wave(spec: ExperimentSpec, out_dir: Path) -> ExperimentReport:
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = make_grid(0.0, spec.nr, spec.ntheta)
    ctx = build_context(grid)
    omega_s = critical_state(grid)

    def job(n: int) -> str:
        omega0 = rotating_wave(grid, n, 0.0)

        def exact_error(t: float, omega: ScalarField) -> dict[str, float]:
            exact = rotating_wave(grid, n, t)
            return {"exact_err": lp_distance(omega, exact, 2.0) / lp_norm(exact, 2.0)}

        return simulate(
            spec,
            ctx,
            omega0,
            omega_s,
            out_dir,
            series_name(n),
            t_end=horizon(spec, n),
            monitor=exact_error,
        )

    files = parallel_map(job, list(spec.wave_ns))
    criteria, drifts = rotating_wave_verdicts(spec, out_dir)
    return ExperimentReport(
        "rotating-wave", criteria, drifts, spec.thresholds(), files=sorted(files)
    )


def rotating_wave_verdicts(
    spec: ExperimentSpec, out_dir: Path
) -> tuple[list[Criterion], dict[str, dict[str, float]]]:
    """Recompute the per-``n`` verdicts from the series CSVs."""
    grid = make_grid(0.0, spec.nr, spec.ntheta)
    omega_s = critical_state(grid)
    norm_s = lp_norm(omega_s, spec.p)
    criteria: list[Criterion] = []
    drifts: dict[str, dict[str, float]] = {}
    for n in spec.wave_ns:
        name = series_name(n)
        frame = read_series(out_dir, name)
        initial = float(frame["dist_ref_p"][0])
        fixed = float(frame["dist_ref_p"].max())
        orbit = float(frame["orbit_dist"].max())
        error = float(frame["exact_err"][-1])
        criteria.append(
            Criterion(
                f"instability:n={n}",
                verdict(fixed > spec.instability_fraction * norm_s),
                name,
                {"sup_fixed_distance": fixed, "threshold": spec.instability_fraction * norm_s},
            )
        )
        criteria.append(
            Criterion(
                f"orbital:n={n}",
                verdict(orbit <= spec.response_factor * initial),
                name,
                {"sup_orbit_distance": orbit, "bound": spec.response_factor * initial},
            )
        )
        criteria.append(
            Criterion(
                f"propagation:n={n}",
                verdict(error <= spec.propagation_tol),
                name,
                {"final_relative_error": error},
            )
        )
        criterion, drift = conservation_criterion(out_dir, name, spec)
        criteria.append(criterion)
        drifts[name] = drift
    return criteria, drifts
