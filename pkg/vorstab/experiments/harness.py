"""Shared plumbing: simulations that write their series CSV, and parallel job maps."""

from __future__ import annotations

from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import TypeVar

import numpy as np

from vorstab.config import worker_count
from vorstab.elliptic import EllipticContext
from vorstab.euler import Monitor, SimConfig, run
from vorstab.experiments.report import ExperimentSpec
from vorstab.grid import Grid, ScalarField, integrate
from vorstab.logging import get_logger

T = TypeVar("T")
R = TypeVar("R")

logger = get_logger(component="experiments")


def sim_config(
    spec: ExperimentSpec,
    grid: Grid,
    t_end: float | None = None,
    gamma: Sequence[float] = (),
) -> SimConfig:
    return SimConfig(
        a=grid.a,
        nr=grid.nr,
        ntheta=grid.ntheta,
        gamma=list(gamma),
        t_end=spec.t_end if t_end is None else t_end,
        cfl=spec.cfl,
        snapshot_stride=spec.snapshot_stride,
        hyperdiffusion=spec.hyperdiffusion,
        p=spec.p,
        seed=spec.seed,
    )


def simulate(
    spec: ExperimentSpec,
    ctx: EllipticContext,
    omega0: ScalarField,
    reference: ScalarField,
    out_dir: Path,
    name: str,
    *,
    t_end: float | None = None,
    gamma: Sequence[float] = (),
    monitor: Monitor | None = None,
) -> str:
    """Run one simulation and write its series as ``out_dir / name``."""
    grid = ctx.grid
    config = sim_config(spec, grid, t_end, gamma)
    r, _ = grid.mesh()
    i_scale = integrate(omega0.with_values(r**2 * np.abs(omega0.values)))
    mean_scale = integrate(omega0.with_values(np.abs(omega0.values))) / grid.area

    def observe(t: float, omega: ScalarField) -> dict[str, float]:
        row = {"I_scale": i_scale, "mean_scale": mean_scale}
        if monitor is not None:
            row.update(monitor(t, omega))
        return row

    series = run(config, omega0, ctx=ctx, reference=reference, monitor=observe)
    series.to_csv(out_dir / name)
    logger.info("experiment_run", file=name, t_end=config.t_end, rows=series.frame.height)
    return name


def parallel_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """Map ``fn`` over ``items`` with up to ``VORSTAB_THREADS`` workers, keeping order."""
    items = list(items)
    workers = min(worker_count(), max(1, len(items)))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
