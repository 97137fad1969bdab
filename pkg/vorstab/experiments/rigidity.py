"""Rigidity: energy maximizers below the threshold are radial, and at the
threshold the orbit of a steady state is pinned down by ``I`` and the L2 norm.

Three checks write one CSV each:

* ``rigidity_ascent.csv``: energy ascents from random rearrangements of
  ``J0(j01 r)`` return to the radial state;
* ``rigidity_classifier.csv``: candidates built from
  ``alpha J0(j11 r) + beta J1(j11 r) cos(theta)`` are sorted into orbit
  members and non-members by their moment of inertia and L2 norm;
* ``rigidity_affine.csv``: ascents in the class of ``J1(j11 r) cos(theta)``
  end near the affine set spanned by the first constrained eigenspace.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import polars as pl

from vorstab.bessel import (
    bessel_j,
    bessel_table,
    e1_basis,
    radial_moment_closed_form,
    radial_moment_integral,
)
from vorstab.config import make_rng
from vorstab.elliptic import EllipticContext, build_context, moment_of_inertia
from vorstab.euler import orbit_distance
from vorstab.experiments.harness import parallel_map
from vorstab.experiments.report import (
    Criterion,
    ExperimentReport,
    ExperimentSpec,
    read_series,
    verdict,
)
from vorstab.experiments.rotating_wave import critical_state
from vorstab.experiments.stability import steady_state
from vorstab.grid import Grid, ScalarField, inner, lp_distance, lp_norm, make_grid, rotate
from vorstab.logging import get_logger
from vorstab.rearrangement import burton_ascent, transport_rearrange
from vorstab.spectra import constrained_spectrum, rayleigh_check

ASCENT_FILE = "rigidity_ascent.csv"
CLASSIFIER_FILE = "rigidity_classifier.csv"
AFFINE_FILE = "rigidity_affine.csv"
MOMENT_TOL = 1e-10

logger = get_logger(component="experiments")


def random_rearrangement(seed_field: ScalarField, rng: np.random.Generator) -> ScalarField:
    """Class member of ``seed_field`` ordered like white noise."""
    noise = seed_field.with_values(rng.standard_normal(seed_field.grid.shape))
    return transport_rearrange(seed_field, order=noise)


def mixed_state(grid: Grid, alpha: float, beta: float) -> ScalarField:
    j11 = bessel_table().j11
    return ScalarField.from_function(
        grid,
        lambda r, th: alpha * bessel_j(0, j11 * r) + beta * bessel_j(1, j11 * r) * np.cos(th),
    )


def classifier_candidates(grid: Grid) -> list[tuple[str, ScalarField, bool]]:
    """``(label, field, expected_member)`` for the orbit of ``J0 + J1 cos``."""
    base = mixed_state(grid, 1.0, 1.0)
    return [
        ("rotated_0.7", rotate(base, 0.7), True),
        ("beta_flipped", mixed_state(grid, 1.0, -1.0), True),
        ("alpha_1.1", mixed_state(grid, 1.1, 1.0), False),
        ("beta_1.2", mixed_state(grid, 1.0, 1.2), False),
    ]


def classify(reference: ScalarField, candidate: ScalarField, tol: float) -> dict[str, float | bool]:
    """Orbit membership from matching moment of inertia and L2 norm."""
    i_ref = moment_of_inertia(reference)
    n_ref = lp_norm(reference, 2.0)
    di = abs(moment_of_inertia(candidate) - i_ref)
    dn = abs(lp_norm(candidate, 2.0) - n_ref)
    scale = max(lp_norm(reference, 1.0), n_ref)
    return {
        "delta_I": di,
        "delta_norm": dn,
        "member": bool(di <= tol * scale and dn <= tol * scale),
    }


def _ascent_check(spec: ExperimentSpec, ctx: EllipticContext, out_dir: Path) -> None:
    omega_s = steady_state(ctx.grid)
    norm_s = lp_norm(omega_s, 2.0)

    def job(index: int) -> dict[str, object]:
        rng = make_rng(spec.seed + index)
        seed_field = random_rearrangement(omega_s, rng)
        report = burton_ascent(ctx, seed_field, max_iters=spec.max_iters)
        energies = np.asarray(report.energies)
        return {
            "seed": spec.seed + index,
            "iterations": report.iterations,
            "cause": report.cause,
            "energy_first": float(energies[0]),
            "energy_last": float(energies[-1]),
            "monotone": bool(np.all(np.diff(energies) >= -1e-10 * np.abs(energies[1:]))),
            "final_rel_dist": lp_distance(report.final, omega_s, 2.0) / norm_s,
            "max_class_defect": float(max(report.class_defects)),
        }

    rows = parallel_map(job, range(spec.ascent_seeds))
    pl.DataFrame(rows).write_csv(out_dir / ASCENT_FILE)


def _classifier_check(spec: ExperimentSpec, grid: Grid, out_dir: Path) -> None:
    reference = mixed_state(grid, 1.0, 1.0)
    rows = []
    for label, candidate, expected in classifier_candidates(grid):
        result = classify(reference, candidate, spec.classifier_tol)
        dist, angle = orbit_distance(candidate, reference, 2.0)
        rows.append(
            {
                "candidate": label,
                "expected_member": expected,
                **result,
                "orbit_dist": dist,
                "orbit_angle": angle,
            }
        )
    pl.DataFrame(rows).write_csv(out_dir / CLASSIFIER_FILE)


def _affine_check(spec: ExperimentSpec, ctx: EllipticContext, out_dir: Path) -> None:
    omega_s = critical_state(ctx.grid)
    norm_s = lp_norm(omega_s, 2.0)
    basis = e1_basis(ctx.grid)
    lambda1 = constrained_spectrum(ctx, 1).first

    def job(index: int) -> dict[str, object]:
        rng = make_rng(spec.seed + 500 + index)
        seed_field = random_rearrangement(omega_s, rng)
        report = burton_ascent(ctx, seed_field, max_iters=spec.max_iters)
        deviation = report.final - omega_s
        residual = deviation
        for e in basis:
            residual = residual - e * inner(deviation, e)
        poincare = rayleigh_check(ctx, deviation, "X", lambda1)
        return {
            "seed": spec.seed + 500 + index,
            "iterations": report.iterations,
            "cause": report.cause,
            "projection_defect": lp_norm(residual, 2.0) / norm_s,
            "final_rel_dist": lp_norm(deviation, 2.0) / norm_s,
            "x_member": poincare.member,
            "x_defect": np.nan if poincare.defect is None else poincare.defect,
        }

    rows = parallel_map(job, range(spec.affine_seeds))
    pl.DataFrame(rows).write_csv(out_dir / AFFINE_FILE)


def run_rigidity(spec: ExperimentSpec, out_dir: Path) -> ExperimentReport:
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = make_grid(0.0, spec.nr, spec.ntheta)
    ctx = build_context(grid)
    _ascent_check(spec, ctx, out_dir)
    _classifier_check(spec, grid, out_dir)
    files = [ASCENT_FILE, CLASSIFIER_FILE]
    if spec.affine_seeds:
        _affine_check(spec, ctx, out_dir)
        files.append(AFFINE_FILE)
    logger.info("rigidity_checks_written", files=files)
    criteria, _ = rigidity_verdicts(spec, out_dir)
    return ExperimentReport("rigidity", criteria, {}, spec.thresholds(), files=sorted(files))


def rigidity_verdicts(
    spec: ExperimentSpec, out_dir: Path
) -> tuple[list[Criterion], dict[str, dict[str, float]]]:
    """Recompute the rigidity verdicts from the CSVs in ``out_dir``.

    The radial moment integral is recomputed as well; it does not depend on
    any output.
    """
    criteria: list[Criterion] = []

    ascent = read_series(out_dir, ASCENT_FILE)
    worst = float(ascent["final_rel_dist"].max())
    monotone = bool(ascent["monotone"].all())
    criteria.append(
        Criterion(
            "ascent",
            verdict(worst <= spec.convergence_tol and monotone),
            ASCENT_FILE,
            {"worst_rel_dist": worst, "monotone": monotone, "runs": ascent.height},
        )
    )

    integral = radial_moment_integral()
    closed = radial_moment_closed_form()
    criteria.append(
        Criterion(
            "radial_moment",
            verdict(integral < 0 and abs(integral - closed) <= MOMENT_TOL),
            CLASSIFIER_FILE,
            {"integral": integral, "closed_form": closed},
        )
    )

    classifier = read_series(out_dir, CLASSIFIER_FILE)
    for row in classifier.iter_rows(named=True):
        criteria.append(
            Criterion(
                f"classifier:{row['candidate']}",
                verdict(row["member"] == row["expected_member"]),
                CLASSIFIER_FILE,
                row,
            )
        )

    if (out_dir / AFFINE_FILE).exists():
        affine = read_series(out_dir, AFFINE_FILE)
        worst = float(affine["projection_defect"].max())
        criteria.append(
            Criterion(
                "affine",
                verdict(worst <= spec.convergence_tol),
                AFFINE_FILE,
                {"worst_projection_defect": worst, "runs": affine.height},
            )
        )
    return criteria, {}
