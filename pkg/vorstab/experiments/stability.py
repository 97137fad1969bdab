"""Nonlinear stability below the first constrained eigenvalue.

Disk: the radial state ``J0(j01 r)`` has vorticity-stream slope ``j01^2``,
below the first constrained eigenvalue ``j11^2``. Each amplitude of the ladder
perturbs it by a smooth mean-zero field; the sup over time of the distance
to the steady state must stay within ``response_factor`` times the
perturbation. An annulus variant perturbs a radial swirl together with its
circulation.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import polars as pl

from vorstab.bessel import bessel_j, bessel_table
from vorstab.config import make_rng
from vorstab.elliptic import build_context, solve_vcp
from vorstab.experiments.harness import parallel_map, simulate
from vorstab.experiments.report import (
    Criterion,
    ExperimentReport,
    ExperimentSpec,
    conservation_criterion,
    read_series,
    verdict,
)
from vorstab.grid import Grid, ScalarField, lp_norm, make_grid
from vorstab.perturbations import smooth_perturbation
from vorstab.spectra import constrained_spectrum

THRESHOLD_FILE = "stability_threshold.csv"
ANNULUS_GAMMA = -2.0 * np.pi


def series_name(index: int, prefix: str = "stability") -> str:
    return f"{prefix}_delta_{index}.csv"


def steady_state(grid: Grid) -> ScalarField:
    j01 = bessel_table().j01
    return ScalarField.from_function(grid, lambda r, th: bessel_j(0, j01 * r))


def annulus_state(grid: Grid) -> ScalarField:
    return ScalarField.from_function(grid, lambda r, th: 1.0 + r**2)


def slope_profile(omega: ScalarField, psi: ScalarField) -> np.ndarray:
    """Finite-difference slope ``d omega / d psi`` along the radius of radial fields."""
    w = omega.values.mean(axis=1)
    s = psi.values.mean(axis=1)
    return np.diff(w) / np.diff(s)


def run_stability(spec: ExperimentSpec, out_dir: Path) -> ExperimentReport:
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = make_grid(0.0, spec.nr, spec.ntheta)
    ctx = build_context(grid)
    omega_s = steady_state(grid)
    norm_s = lp_norm(omega_s, 2.0)
    lambda1 = constrained_spectrum(ctx, 1).first
    rows = [{"domain": "disk", "g_prime": bessel_table().j01 ** 2, "lambda1": lambda1}]

    def job(item: tuple[int, float]) -> str:
        index, delta = item
        rng = make_rng(spec.seed + index)
        omega0 = omega_s + smooth_perturbation(ctx, rng, delta * norm_s)
        return simulate(spec, ctx, omega0, omega_s, out_dir, series_name(index))

    files = parallel_map(job, list(enumerate(spec.amplitudes)))
    files.append(simulate(spec, ctx, omega_s, omega_s, out_dir, "stability_baseline.csv"))

    if spec.annulus:
        agrid = make_grid(spec.annulus_a, spec.nr, spec.ntheta)
        actx = build_context(agrid)
        omega_a = annulus_state(agrid)
        psi_a = solve_vcp(actx, omega_a, [ANNULUS_GAMMA])
        rows.append(
            {
                "domain": "annulus",
                "g_prime": float(np.max(slope_profile(omega_a, psi_a))),
                "lambda1": constrained_spectrum(actx, 1).first,
            }
        )
        delta = spec.amplitudes[min(1, len(spec.amplitudes) - 1)]
        rng = make_rng(spec.seed + 1000)
        omega0 = omega_a + smooth_perturbation(actx, rng, delta * lp_norm(omega_a, 2.0))
        gamma = [ANNULUS_GAMMA * (1.0 + delta)]
        files.append(
            simulate(
                spec, actx, omega0, omega_a, out_dir, "stability_annulus.csv", gamma=gamma
            )
        )
    pl.DataFrame(rows).write_csv(out_dir / THRESHOLD_FILE)
    files.append(THRESHOLD_FILE)

    criteria, drifts = stability_verdicts(spec, out_dir)
    return ExperimentReport(
        "stability", criteria, drifts, spec.thresholds(), files=sorted(files)
    )


def stability_verdicts(
    spec: ExperimentSpec, out_dir: Path
) -> tuple[list[Criterion], dict[str, dict[str, float]]]:
    """Recompute every stability verdict from the CSVs in ``out_dir``."""
    criteria: list[Criterion] = []
    drifts: dict[str, dict[str, float]] = {}
    thresholds = read_series(out_dir, THRESHOLD_FILE)
    for row in thresholds.iter_rows(named=True):
        ok = row["g_prime"] < row["lambda1"]
        criteria.append(
            Criterion(f"threshold:{row['domain']}", verdict(ok), THRESHOLD_FILE, row)
        )

    grid = make_grid(0.0, spec.nr, spec.ntheta)
    norm_s = lp_norm(steady_state(grid), 2.0)
    sups = []
    for index, delta in enumerate(spec.amplitudes):
        name = series_name(index)
        sup = float(read_series(out_dir, name)["dist_ref_p"].max())
        sups.append(sup)
        bound = spec.response_factor * delta * norm_s
        criteria.append(
            Criterion(
                f"response:{delta:g}",
                verdict(sup <= bound),
                name,
                {"sup_distance": sup, "bound": bound},
            )
        )
    for i in range(len(sups) - 1):
        s0, s1 = sups[i], sups[i + 1]
        d0, d1 = spec.amplitudes[i], spec.amplitudes[i + 1]
        criteria.append(
            Criterion(
                f"monotone:{d0:g}->{d1:g}",
                verdict(s1 <= spec.monotone_ratio * s0),
                f"{series_name(i)},{series_name(i + 1)}",
                {"sup_before": s0, "sup_after": s1},
            )
        )
    baseline = float(read_series(out_dir, "stability_baseline.csv")["dist_ref_p"].max())
    bound = min(spec.amplitudes) * norm_s
    criteria.append(
        Criterion(
            "baseline",
            verdict(baseline <= bound),
            "stability_baseline.csv",
            {"sup_distance": baseline, "bound": bound},
        )
    )
    names = [series_name(i) for i in range(len(spec.amplitudes))]
    names.append("stability_baseline.csv")
    if (out_dir / "stability_annulus.csv").exists():
        frame = read_series(out_dir, "stability_annulus.csv")
        delta = spec.amplitudes[min(1, len(spec.amplitudes) - 1)]
        agrid = make_grid(spec.annulus_a, spec.nr, spec.ntheta)
        bound = spec.response_factor * delta * lp_norm(annulus_state(agrid), 2.0)
        sup = float(frame["dist_ref_p"].max())
        criteria.append(
            Criterion(
                "response:annulus",
                verdict(sup <= bound),
                "stability_annulus.csv",
                {"sup_distance": sup, "bound": bound, "gamma": float(frame["gamma_1"][0])},
            )
        )
        names.append("stability_annulus.csv")
    for name in names:
        criterion, drift = conservation_criterion(out_dir, name, spec)
        criteria.append(criterion)
        drifts[name] = drift
    return criteria, drifts
