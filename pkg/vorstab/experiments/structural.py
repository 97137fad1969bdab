"""Structural stability of the critical state ``J1(j11 r) cos(theta)``.

At the critical slope the steady state is not stable in the fixed-point
sense, but the flow stays close to the set of class members whose deviation
from the steady state lies in the first constrained eigenspace. That set has
no computable projection; the proxy used here takes the follower of the
current vorticity and projects its deviation onto ``e1_basis`` by least
squares. The proxy's own defect is tracked next to the distance.
"""

from __future__ import annotations

from pathlib import Path

from vorstab.bessel import e1_basis
from vorstab.config import make_rng
from vorstab.elliptic import build_context
from vorstab.euler import Monitor
from vorstab.experiments.harness import parallel_map, simulate
from vorstab.experiments.report import (
    Criterion,
    ExperimentReport,
    ExperimentSpec,
    conservation_criterion,
    read_series,
    verdict,
)
from vorstab.experiments.rotating_wave import critical_state
from vorstab.grid import ScalarField, inner, lp_distance, lp_norm, make_grid, rotate
from vorstab.perturbations import smooth_perturbation
from vorstab.rearrangement import follower

ROTATION_CELLS = 1
ROTATION_FILE = "structural_rotation.csv"


def series_name(index: int) -> str:
    return f"structural_delta_{index}.csv"


def target_proxy(
    omega: ScalarField,
    omega_s: ScalarField,
    basis: tuple[ScalarField, ...],
    p: float = 2.0,
) -> tuple[ScalarField, ScalarField]:
    """Return ``(follower, projection)`` for the current vorticity."""
    nearest = follower(omega, omega_s, p)
    deviation = nearest - omega_s
    projection = omega_s
    for e in basis:
        projection = projection + e * inner(deviation, e)
    return nearest, projection


def proxy_monitor(omega_s: ScalarField, p: float) -> Monitor:
    basis = e1_basis(omega_s.grid)

    def monitor(t: float, omega: ScalarField) -> dict[str, float]:
        nearest, projection = target_proxy(omega, omega_s, basis, p)
        return {
            "proxy_dist": lp_distance(omega, projection, p),
            "proxy_defect": lp_distance(nearest, projection, p),
        }

    return monitor


def run_structural(spec: ExperimentSpec, out_dir: Path) -> ExperimentReport:
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = make_grid(0.0, spec.nr, spec.ntheta)
    ctx = build_context(grid)
    omega_s = critical_state(grid)
    norm_s = lp_norm(omega_s, 2.0)
    monitor = proxy_monitor(omega_s, spec.p)

    def job(item: tuple[int, float]) -> str:
        index, delta = item
        rng = make_rng(spec.seed + index)
        omega0 = omega_s + smooth_perturbation(ctx, rng, delta * norm_s)
        return simulate(
            spec, ctx, omega0, omega_s, out_dir, series_name(index), monitor=monitor
        )

    files = parallel_map(job, list(enumerate(spec.amplitudes)))
    files.append(
        simulate(
            spec,
            ctx,
            rotate(omega_s, ROTATION_CELLS * grid.dtheta),
            omega_s,
            out_dir,
            ROTATION_FILE,
            monitor=monitor,
        )
    )
    criteria, drifts = structural_verdicts(spec, out_dir)
    return ExperimentReport(
        "structural", criteria, drifts, spec.thresholds(), files=sorted(files)
    )


def structural_verdicts(
    spec: ExperimentSpec, out_dir: Path
) -> tuple[list[Criterion], dict[str, dict[str, float]]]:
    grid = make_grid(0.0, spec.nr, spec.ntheta)
    norm_s = lp_norm(critical_state(grid), 2.0)
    criteria: list[Criterion] = []
    drifts: dict[str, dict[str, float]] = {}
    names = []
    for index, delta in enumerate(spec.amplitudes):
        name = series_name(index)
        frame = read_series(out_dir, name)
        sup = float(frame["proxy_dist"].max())
        bound = spec.response_factor * delta * norm_s
        criteria.append(
            Criterion(
                f"response:{delta:g}",
                verdict(sup <= bound),
                name,
                {
                    "sup_proxy_distance": sup,
                    "bound": bound,
                    "sup_proxy_defect": float(frame["proxy_defect"].max()),
                },
            )
        )
        names.append(name)

    # A rotation by whole cells permutes the steady state within each ring,
    # so it starts inside the target set.
    frame = read_series(out_dir, ROTATION_FILE)
    sup = float(frame["proxy_dist"].max())
    bound = spec.response_factor * min(spec.amplitudes) * norm_s
    criteria.append(
        Criterion(
            "rotation",
            verdict(sup <= bound),
            ROTATION_FILE,
            {
                "angle": ROTATION_CELLS * grid.dtheta,
                "sup_proxy_distance": sup,
                "bound": bound,
                "sup_fixed_distance": float(frame["dist_ref_p"].max()),
            },
        )
    )
    names.append(ROTATION_FILE)
    for name in names:
        criterion, drift = conservation_criterion(out_dir, name, spec)
        criteria.append(criterion)
        drifts[name] = drift
    return criteria, drifts
