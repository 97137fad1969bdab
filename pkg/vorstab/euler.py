"""Vorticity-stream time stepping of the planar Euler equations on the disk and annulus.

The advection term uses the Arakawa average of three Jacobian forms in the
computational ``(r, theta)`` coordinates, divided by ``r``. Theta is periodic.
Radial ghost rows close the stencil: constant-trace reflection for ``psi``
and an even reflection for ``omega`` at physical boundaries, and the
antipodal ring across the pole on the disk.
"""

from __future__ import annotations

import json
import math
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import polars as pl
from scipy.optimize import minimize_scalar

from vorstab.bessel import bessel_j, bessel_table
from vorstab.config import from_mapping, load_json, make_rng
from vorstab.elliptic import (
    CirculationVector,
    EllipticContext,
    as_circulation,
    build_context,
    energy,
    moment_of_inertia,
    stream_function,
)
from vorstab.errors import ConfigError, GridError, SimulationError
from vorstab.grid import (
    Grid,
    ScalarField,
    integrate,
    lp_distance,
    lp_norm,
    make_grid,
    mean,
    mode_numbers,
    rotate,
)
from vorstab.logging import get_logger
from vorstab.perturbations import smooth_perturbation
from vorstab.rearrangement import quantile_distance
from vorstab.storage.fields import read_field, write_field
from vorstab.storage.paths import SERIES_NAME, snapshot_name

__all__ = [
    "SimConfig",
    "SimState",
    "TimeSeries",
    "velocity",
    "rhs",
    "step",
    "cfl_dt",
    "run",
    "initial_field",
    "rotating_wave",
    "orbit_distance",
    "save_series",
]

logger = get_logger(component="euler")

INITIAL_KINDS = ("rotating_wave", "j0", "j1cos", "file")
Monitor = Callable[[float, ScalarField], dict[str, float]]


@dataclass(slots=True)
class SimConfig:
    """Simulation settings; ``dt=None`` selects a CFL-derived step."""

    a: float = 0.0
    nr: int = 32
    ntheta: int = 64
    gamma: list[float] = field(default_factory=list)
    t_end: float = 1.0
    dt: float | None = None
    cfl: float = 0.5
    snapshot_stride: int = 10
    hyperdiffusion: float = 0.0
    p: float = 2.0
    save_snapshots: bool = False
    seed: int = 0
    initial: str = "rotating_wave"
    wave_n: int = 4
    initial_file: str | None = None
    perturbation: float = 0.0

    def __post_init__(self) -> None:
        if not self.t_end > 0:
            raise ConfigError(f"t_end must be > 0, got {self.t_end}")
        if not 0 < self.cfl <= 1:
            raise ConfigError(f"cfl must be in (0, 1], got {self.cfl}")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.snapshot_stride < 1:
            raise ConfigError(f"snapshot_stride must be >= 1, got {self.snapshot_stride}")
        if self.hyperdiffusion < 0:
            raise ConfigError(f"hyperdiffusion must be >= 0, got {self.hyperdiffusion}")
        if self.p < 1:
            raise ConfigError(f"p must be >= 1, got {self.p}")
        if self.initial not in INITIAL_KINDS:
            raise ConfigError(f"initial must be one of {INITIAL_KINDS}, got {self.initial!r}")
        if self.initial == "file" and not self.initial_file:
            raise ConfigError("initial 'file' requires initial_file")
        if self.wave_n < 1:
            raise ConfigError(f"wave_n must be >= 1, got {self.wave_n}")
        if self.perturbation < 0:
            raise ConfigError(f"perturbation must be >= 0, got {self.perturbation}")
        self.gamma = [float(g) for g in self.gamma]

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SimConfig":
        return from_mapping(cls, data)

    @classmethod
    def from_json(cls, path: str | Path) -> "SimConfig":
        return cls.from_dict(load_json(path))

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def grid(self) -> Grid:
        try:
            return make_grid(self.a, self.nr, self.ntheta)
        except GridError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True, slots=True)
class SimState:
    t: float
    omega: ScalarField
    psi: ScalarField
    traces: np.ndarray


@dataclass(slots=True)
class TimeSeries:
    """Per-snapshot diagnostics; ``t`` strictly increasing."""

    frame: pl.DataFrame
    final: ScalarField | None = None
    snapshots: list[Path] = field(default_factory=list)

    def __post_init__(self) -> None:
        t = self.frame["t"].to_numpy()
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise SimulationError("time series timestamps must increase", float(t[-1]))

    def column(self, name: str) -> np.ndarray:
        return self.frame[name].to_numpy()

    def sup(self, name: str) -> float:
        return float(np.max(self.column(name)))

    def relative_drift(self, name: str, scale: float | None = None) -> float:
        """``max |x(t) - x(0)| / scale`` with ``scale`` defaulting to ``|x(0)|``."""
        x = self.column(name)
        scale = abs(float(x[0])) if scale is None else abs(float(scale))
        change = float(np.max(np.abs(x - x[0])))
        if scale == 0.0:
            return change
        return change / scale

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.frame.write_csv(path)
        return path

    @classmethod
    def from_csv(cls, path: str | Path) -> "TimeSeries":
        return cls(pl.read_csv(Path(path)))


def _theta_derivative(values: np.ndarray) -> np.ndarray:
    coeffs = np.fft.rfft(values, axis=1)
    m = np.arange(coeffs.shape[1])
    factor = 1j * m
    # The Nyquist mode has no odd counterpart on the grid.
    factor[-1] = 0.0
    return np.fft.irfft(coeffs * factor, n=values.shape[1], axis=1)


def _antipodal(row: np.ndarray) -> np.ndarray:
    return np.roll(row, row.size // 2)


def velocity(ctx: EllipticContext, psi: ScalarField) -> tuple[ScalarField, ScalarField]:
    """``(u_r, u_theta) = (d_theta psi / r, -d_r psi)``."""
    grid = ctx.grid
    v = psi.values
    dr = grid.dr
    u_r = _theta_derivative(v) / grid.r_centers[:, None]
    d = np.empty_like(v)
    d[1:-1] = (v[2:] - v[:-2]) / (2.0 * dr)
    d[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * dr)
    if grid.is_disk:
        d[0] = (v[1] - _antipodal(v[0])) / (2.0 * dr)
    else:
        d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dr)
    return psi.with_values(u_r), psi.with_values(-d)


def _pad(grid: Grid, values: np.ndarray, traces: np.ndarray | None) -> np.ndarray:
    """Add inner and outer ghost rows; ``traces=None`` reflects evenly."""
    out = np.empty((grid.nr + 2, grid.ntheta))
    out[1:-1] = values
    out[-1] = values[-1] if traces is None else 2.0 * traces[0] - values[-1]
    if grid.is_disk:
        out[0] = _antipodal(values[0])
    else:
        out[0] = values[0] if traces is None else 2.0 * traces[1] - values[0]
    return out


def _arakawa(psi: np.ndarray, zeta: np.ndarray, dr: float, dtheta: float) -> np.ndarray:
    """Arakawa Jacobian on padded arrays, periodic in axis 1; returns interior rows."""

    def ip(f: np.ndarray) -> np.ndarray:
        return f[2:]

    def im(f: np.ndarray) -> np.ndarray:
        return f[:-2]

    def c(f: np.ndarray) -> np.ndarray:
        return f[1:-1]

    def jp(f: np.ndarray) -> np.ndarray:
        return np.roll(f, -1, axis=1)

    def jm(f: np.ndarray) -> np.ndarray:
        return np.roll(f, 1, axis=1)

    jpp = (ip(psi) - im(psi)) * (c(jp(zeta)) - c(jm(zeta))) - (
        c(jp(psi)) - c(jm(psi))
    ) * (ip(zeta) - im(zeta))
    jpx = (
        ip(psi) * (ip(jp(zeta)) - ip(jm(zeta)))
        - im(psi) * (im(jp(zeta)) - im(jm(zeta)))
        - c(jp(psi)) * (ip(jp(zeta)) - im(jp(zeta)))
        + c(jm(psi)) * (ip(jm(zeta)) - im(jm(zeta)))
    )
    jxp = (
        ip(jp(psi)) * (c(jp(zeta)) - ip(zeta))
        - im(jm(psi)) * (im(zeta) - c(jm(zeta)))
        - im(jp(psi)) * (c(jp(zeta)) - im(zeta))
        + ip(jm(psi)) * (ip(zeta) - c(jm(zeta)))
    )
    return (jpp + jpx + jxp) / (12.0 * dr * dtheta)


def _hyperdiffusion(grid: Grid, values: np.ndarray, nu: float) -> np.ndarray:
    coeffs = np.fft.rfft(values, axis=1)
    m = mode_numbers(grid).astype(float)
    return np.fft.irfft(-nu * m**4 * coeffs, n=grid.ntheta, axis=1)


def _tendency(
    ctx: EllipticContext,
    omega: np.ndarray,
    gamma: CirculationVector,
    nu: float,
    t: float,
) -> np.ndarray:
    if not np.all(np.isfinite(omega)):
        raise SimulationError(f"non-finite vorticity at t={t:.6g}", t)
    grid = ctx.grid
    solution = stream_function(ctx, ScalarField(grid, omega), gamma)
    psi = _pad(grid, solution.psi.values, solution.traces)
    zeta = _pad(grid, omega, None)
    out = _arakawa(psi, zeta, grid.dr, grid.dtheta) / grid.r_centers[:, None]
    # Remove the residual net source so the mean vorticity is conserved.
    out -= np.sum(out * grid.measures) / np.sum(grid.measures)
    if nu:
        out += _hyperdiffusion(grid, omega, nu)
    return out


def rhs(
    ctx: EllipticContext,
    omega: ScalarField,
    gamma: CirculationVector | Sequence[float] | None = None,
    hyperdiffusion: float = 0.0,
) -> ScalarField:
    """Vorticity tendency ``-u . grad omega`` plus optional azimuthal hyperdiffusion."""
    gamma = as_circulation(ctx.grid, gamma)
    return omega.with_values(_tendency(ctx, omega.values, gamma, hyperdiffusion, 0.0))


def _state(
    ctx: EllipticContext, t: float, omega: np.ndarray, gamma: CirculationVector
) -> SimState:
    if not np.all(np.isfinite(omega)):
        raise SimulationError(f"non-finite vorticity at t={t:.6g}", t)
    field_ = ScalarField(ctx.grid, omega)
    solution = stream_function(ctx, field_, gamma)
    return SimState(t, field_, solution.psi, solution.traces)


def step(
    ctx: EllipticContext,
    state: SimState,
    dt: float,
    gamma: CirculationVector | Sequence[float] | None = None,
    hyperdiffusion: float = 0.0,
) -> SimState:
    """One classical RK4 step."""
    gamma = as_circulation(ctx.grid, gamma)
    w0, t = state.omega.values, state.t
    k1 = _tendency(ctx, w0, gamma, hyperdiffusion, t)
    k2 = _tendency(ctx, w0 + 0.5 * dt * k1, gamma, hyperdiffusion, t + 0.5 * dt)
    k3 = _tendency(ctx, w0 + 0.5 * dt * k2, gamma, hyperdiffusion, t + 0.5 * dt)
    k4 = _tendency(ctx, w0 + dt * k3, gamma, hyperdiffusion, t + dt)
    w1 = w0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return _state(ctx, t + dt, w1, gamma)


def _cfl_rate(ctx: EllipticContext, psi: ScalarField) -> float:
    grid = ctx.grid
    u_r, u_t = velocity(ctx, psi)
    rate = np.abs(u_r.values) / grid.dr + np.abs(u_t.values) / (
        grid.r_centers[:, None] * grid.dtheta
    )
    return float(np.max(rate))


def cfl_dt(ctx: EllipticContext, psi: ScalarField, cfl: float) -> float:
    """Largest step with Courant number ``cfl``; infinite for a fluid at rest."""
    rate = _cfl_rate(ctx, psi)
    return math.inf if rate == 0.0 else cfl / rate


def _steps(t_end: float, dt: float) -> tuple[int, float]:
    n = max(1, math.ceil(t_end / dt - 1e-9))
    return n, t_end / n


def rotating_wave(grid: Grid, n: int, t: float) -> ScalarField:
    """Exact rotating solution ``J1(j11 r) cos(theta - t/n) + 2/n`` on the disk."""
    if not grid.is_disk:
        raise GridError("rotating_wave requires a disk grid")
    if n < 1:
        raise GridError(f"n must be >= 1, got {n}")
    j11 = bessel_table().j11
    return ScalarField.from_function(
        grid, lambda r, th: bessel_j(1, j11 * r) * np.cos(th - t / n) + 2.0 / n
    )


def orbit_distance(
    f: ScalarField, reference: ScalarField, p: float = 2.0
) -> tuple[float, float]:
    """Distance from ``f`` to the rotation orbit of ``reference`` and the best angle.

    A scan over 64 angles is refined by bounded scalar minimization.
    """
    if not f.grid.is_disk:
        raise GridError("orbit_distance requires a disk grid")

    def cost(angle: float) -> float:
        return lp_distance(f, rotate(reference, angle), p) ** p

    angles = np.arange(64) * (2.0 * np.pi / 64)
    costs = [cost(a) for a in angles]
    best = float(angles[int(np.argmin(costs))])
    width = 2.0 * np.pi / 64
    # Minimize over the offset: the bounded search stops at a tolerance relative to |x|.
    res = minimize_scalar(
        lambda s: cost(best + s),
        bounds=(-width, width),
        method="bounded",
        options={"xatol": 1e-14},
    )
    angle, value = best, float(min(costs))
    if res.fun < value:
        angle, value = best + float(res.x), float(res.fun)
    return max(value, 0.0) ** (1.0 / p), angle % (2.0 * np.pi)


def initial_field(config: SimConfig, ctx: EllipticContext) -> ScalarField:
    """Initial vorticity named by ``config.initial`` plus the configured perturbation."""
    grid = ctx.grid
    table = bessel_table()
    if config.initial == "rotating_wave":
        omega = rotating_wave(grid, config.wave_n, 0.0)
    elif config.initial == "j0":
        omega = ScalarField.from_function(grid, lambda r, th: bessel_j(0, table.j01 * r))
    elif config.initial == "j1cos":
        omega = ScalarField.from_function(
            grid, lambda r, th: bessel_j(1, table.j11 * r) * np.cos(th)
        )
    else:
        omega = read_field(config.initial_file, grid)
    if config.perturbation:
        amplitude = config.perturbation * lp_norm(omega, 2.0)
        omega = omega + smooth_perturbation(ctx, make_rng(config.seed), amplitude)
    return omega


def _diagnostics(
    ctx: EllipticContext,
    state: SimState,
    gamma: CirculationVector,
    omega0: ScalarField,
    reference: ScalarField,
    p: float,
    monitor: Monitor | None,
) -> dict[str, float]:
    omega = state.omega
    row: dict[str, float] = {
        "t": state.t,
        "E": energy(ctx, omega, gamma),
        "I": moment_of_inertia(omega),
    }
    for i, g in enumerate(gamma.gammas, start=1):
        row[f"gamma_{i}"] = float(g)
    row["mean"] = mean(omega)
    row["enstrophy"] = integrate(omega.with_values(omega.values**2))
    row["m4"] = integrate(omega.with_values(omega.values**4))
    row["dist_ref_p"] = lp_distance(omega, reference, p)
    if ctx.grid.is_disk:
        row["orbit_dist"], row["orbit_angle"] = orbit_distance(omega, reference, p)
    else:
        row["orbit_dist"], row["orbit_angle"] = math.nan, math.nan
    row["profile_dist"] = quantile_distance(omega, omega0)
    if monitor is not None:
        row.update(monitor(state.t, omega))
    return row


def run(
    config: SimConfig,
    omega0: ScalarField | None = None,
    *,
    ctx: EllipticContext | None = None,
    reference: ScalarField | None = None,
    monitor: Monitor | None = None,
    out_dir: str | Path | None = None,
) -> TimeSeries:
    """Integrate from ``omega0`` (or the configured initial field) to ``config.t_end``.

    Distances are measured against ``reference`` (default ``omega0``). The
    circulation is an input of every stream solve and never evolves.
    """
    grid = config.grid()
    ctx = ctx or build_context(grid)
    if ctx.grid != grid:
        raise ConfigError("context grid does not match the configuration")
    try:
        gamma = as_circulation(grid, config.gamma)
    except GridError as exc:
        raise ConfigError(str(exc)) from exc
    omega0 = omega0 if omega0 is not None else initial_field(config, ctx)
    reference = reference if reference is not None else omega0
    state = _state(ctx, 0.0, omega0.values, gamma)

    limit = cfl_dt(ctx, state.psi, config.cfl)
    if config.dt is None:
        n_steps, dt = _steps(config.t_end, min(limit, config.t_end))
    else:
        if config.dt > limit * (1.0 + 1e-12):
            raise ConfigError(
                f"dt={config.dt} exceeds the CFL limit {limit:.6g} at cfl={config.cfl}"
            )
        n_steps, dt = _steps(config.t_end, config.dt)

    out = Path(out_dir) if out_dir is not None else None
    snapshots: list[Path] = []
    logger.info(
        "run_started",
        nr=grid.nr,
        ntheta=grid.ntheta,
        a=grid.a,
        dt=dt,
        steps=n_steps,
        t_end=config.t_end,
        hyperdiffusion=config.hyperdiffusion,
    )

    def record(index: int) -> None:
        rows.append(_diagnostics(ctx, state, gamma, omega0, reference, config.p, monitor))
        if out is not None and config.save_snapshots:
            snapshots.append(write_field(state.omega, out / snapshot_name(index)))
        logger.debug("snapshot", index=index, t=state.t)

    rows: list[dict[str, float]] = []
    record(0)
    for i in range(1, n_steps + 1):
        state = step(ctx, state, dt, gamma, config.hyperdiffusion)
        # Pin the last step to t_end exactly.
        if i == n_steps:
            state = SimState(config.t_end, state.omega, state.psi, state.traces)
        if i % config.snapshot_stride == 0 or i == n_steps:
            record(len(rows))

    series = TimeSeries(pl.DataFrame(rows), final=state.omega, snapshots=snapshots)
    logger.info(
        "run_finished",
        steps=n_steps,
        energy_drift=series.relative_drift("E"),
        mean_drift=series.relative_drift("mean", scale=1.0),
    )
    return series


def save_series(series: TimeSeries, out_dir: str | Path, config: SimConfig) -> list[Path]:
    """Write ``series.csv``, ``config.json`` and ``final.csv`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [series.to_csv(out_dir / SERIES_NAME)]
    config_path = out_dir / "config.json"
    config_path.write_text(json.dumps(config.to_dict(), indent=2), encoding="utf-8")
    paths.append(config_path)
    if series.final is not None:
        paths.append(write_field(series.final, out_dir / "final.csv"))
    return paths + list(series.snapshots)
