"""Dirichlet, capacity and constrained Laplacian spectra, plus Poincare-type checks.

Every spectrum is assembled per angular mode. Non-radial modes of all three
problems are zero-Dirichlet modes: a constant boundary trace has no angular
content. The problems differ only in the radial (``m = 0``) block:

* ``dirichlet``: zero trace on every boundary;
* ``cap``: zero flux through the inner face (pole on the disk);
* ``constrained``: eigenvalues ``1/mu`` of the operator ``T`` restricted to
  radial mean-zero fields, symmetrized by the square root of the radial weights.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal, solve_banded
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from vorstab.config import from_mapping
from vorstab.elliptic import (
    EllipticContext,
    apply_laplacian,
    boundary_flux,
    dirichlet_form,
    mode_operator,
)
from vorstab.errors import ConfigError, GridError, SolverError
from vorstab.grid import Grid, ScalarField, inner, mean, mode_numbers
from vorstab.logging import get_logger
from vorstab.storage.fields import write_field
from vorstab.storage.paths import EIGEN_NAME, eigenfield_name

__all__ = [
    "SpectraConfig",
    "EigenResult",
    "RayleighReport",
    "dirichlet_spectrum",
    "cap_spectrum",
    "constrained_spectrum",
    "lambda_cap1",
    "stability_margin",
    "dirichlet_modes",
    "rayleigh_check",
    "trace_deviation",
    "cluster_tolerance",
]

logger = get_logger(component="spectra")

KINDS = ("dirichlet", "cap", "constrained")
_EXTRAPOLATE = np.array([1.875, -1.25, 0.375])


@dataclass(slots=True)
class SpectraConfig:
    """Clustering and solver switches for spectrum computations."""

    cluster_rtol: float = 1e-6
    cluster_scale: float = 1.0
    dense_limit: int = 400

    def __post_init__(self) -> None:
        if self.cluster_rtol <= 0 or self.cluster_scale < 0:
            raise ConfigError("cluster tolerances must be positive")
        if self.dense_limit < 4:
            raise ConfigError(f"dense_limit must be >= 4, got {self.dense_limit}")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SpectraConfig":
        return from_mapping(cls, data)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def cluster_tolerance(grid: Grid, value: float, config: SpectraConfig) -> float:
    """Relative gap under which two discrete eigenvalues are one eigenvalue.

    Eigenvalues of the same continuous eigenspace drift apart at second order.
    """
    return max(config.cluster_rtol, config.cluster_scale * abs(value) * grid.dr**2)


@dataclass(slots=True)
class EigenResult:
    """Eigenvalue groups in increasing order with orthonormal fields per group."""

    kind: str
    grid: Grid
    eigenvalues: list[float]
    eigenfields: list[list[ScalarField]] = field(repr=False)
    multiplicities: list[int]
    modes: list[list[str]]
    symmetry_defect: float = 0.0

    @property
    def first(self) -> float:
        return self.eigenvalues[0]

    def save(self, out_dir: str | Path) -> list[Path]:
        """Write ``eigen.json`` and one field CSV per eigenfield; return the paths."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written: list[Path] = []
        files: list[list[str]] = []
        for g, group in enumerate(self.eigenfields):
            names = []
            for i, f in enumerate(group):
                name = eigenfield_name(g, i)
                written.append(write_field(f, out_dir / name))
                names.append(name)
            files.append(names)
        payload = {
            "kind": self.kind,
            "grid": self.grid.params(),
            "eigenvalues": self.eigenvalues,
            "multiplicities": self.multiplicities,
            "modes": self.modes,
            "symmetry_defect": self.symmetry_defect,
            "field_files": files,
        }
        path = out_dir / EIGEN_NAME
        path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
        written.append(path)
        return written


def _symmetric_tridiagonal(
    grid: Grid, m: int, closure: str
) -> tuple[np.ndarray, np.ndarray]:
    lower, main, upper = mode_operator(grid, m, closure)
    # r_j L is symmetric; conjugating by sqrt(r) gives a symmetric tridiagonal.
    return main, -np.sqrt(lower * upper)


def _radial_modes(
    grid: Grid, m: int, count: int, closure: str = "dirichlet"
) -> tuple[np.ndarray, np.ndarray]:
    count = min(count, grid.nr)
    d, e = _symmetric_tridiagonal(grid, m, closure)
    try:
        values, vectors = eigh_tridiagonal(d, e, select="i", select_range=(0, count - 1))
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"tridiagonal eigensolve failed for mode {m}: {exc}") from exc
    return values, vectors / np.sqrt(grid.r_centers)[:, None]


def dirichlet_modes(
    ctx: EllipticContext, m: int, count: int
) -> tuple[np.ndarray, np.ndarray]:
    """Lowest ``count`` zero-Dirichlet eigenpairs of angular mode ``m``.

    Returns eigenvalues and radial profiles as columns.
    """
    if m not in range(ctx.grid.ntheta // 2 + 1):
        raise GridError(f"mode must be in [0, {ctx.grid.ntheta // 2}], got {m}")
    if count < 1:
        raise GridError(f"count must be >= 1, got {count}")
    return _radial_modes(ctx.grid, m, count)


def _radial_weights(grid: Grid) -> np.ndarray:
    return 2.0 * np.pi * grid.r_centers * grid.dr


def _banded(grid: Grid) -> np.ndarray:
    lower, main, upper = mode_operator(grid, 0)
    ab = np.zeros((3, grid.nr))
    ab[0, 1:] = upper
    ab[1] = main
    ab[2, :-1] = lower
    return ab


def _constrained_radial(
    ctx: EllipticContext, count: int, config: SpectraConfig
) -> tuple[np.ndarray, np.ndarray, float]:
    grid = ctx.grid
    n = grid.nr
    ab = _banded(grid)
    w = _radial_weights(grid)
    sqrt_w = np.sqrt(w)
    area = float(w.sum())
    zeta = ctx.zeta[0].values[:, 0] if ctx.n_inner else None
    q = float(ctx.q_matrix[0, 0]) if ctx.n_inner else 0.0

    def project(v: np.ndarray) -> np.ndarray:
        return v - np.ones((n, 1)) * (w @ v) / area

    def apply_p(v: np.ndarray) -> np.ndarray:
        out = solve_banded((1, 1), ab, v)
        if zeta is not None:
            out = out + q * np.outer(zeta, (zeta * w) @ v)
        return out

    def symmetric(y: np.ndarray) -> np.ndarray:
        x = project((y.T / sqrt_w).T)
        return (project(apply_p(x)).T * sqrt_w).T

    wanted = min(count, n - 1)
    if n <= config.dense_limit:
        s = symmetric(np.eye(n))
        norm = np.linalg.norm(s)
        defect = float(np.linalg.norm(s - s.T) / norm) if norm else 0.0
        mu, y = eigh(0.5 * (s + s.T))
    else:
        op = LinearOperator(
            (n, n),
            matvec=lambda y: symmetric(y.reshape(n, 1)).ravel(),
            dtype=float,
        )
        rng = np.random.Generator(np.random.PCG64(0))
        a, b = rng.standard_normal((2, n))
        sa, sb = op.matvec(a), op.matvec(b)
        defect = float(abs(b @ sa - a @ sb) / (np.linalg.norm(a) * np.linalg.norm(sb)))
        try:
            mu, y = eigsh(op, k=min(wanted + 1, n - 2), which="LA")
        except ArpackNoConvergence as exc:
            raise SolverError(f"constrained eigensolve did not converge: {exc}") from exc
    keep = mu > 1e-12 * float(np.max(np.abs(mu)))
    mu, y = mu[keep], y[:, keep]
    order = np.argsort(mu)[::-1][:wanted]
    vectors = (y[:, order].T / sqrt_w).T
    return 1.0 / mu[order], vectors, defect


def _fields_for_mode(grid: Grid, m: int, profile: np.ndarray) -> list[ScalarField]:
    _, theta = grid.mesh()
    if m == 0:
        shapes = [np.ones_like(theta)]
    elif m == grid.ntheta // 2:
        # cos vanishes at every cell centre for the Nyquist mode.
        shapes = [np.sin(m * theta)]
    else:
        shapes = [np.cos(m * theta), np.sin(m * theta)]
    out = []
    for shape in shapes:
        f = ScalarField(grid, profile[:, None] * shape)
        out.append(f / np.sqrt(inner(f, f)))
    return out


def _normalize_sign(f: ScalarField) -> ScalarField:
    weighted = (f.values * np.sqrt(f.grid.measures)).ravel()
    significant = np.flatnonzero(np.abs(weighted) > 1e-8 * np.max(np.abs(weighted)))
    if significant.size and weighted[significant[0]] < 0:
        return -f
    return f


def _orthonormalize(group: list[ScalarField]) -> list[ScalarField]:
    grid = group[0].grid
    sqrt_w = np.sqrt(grid.measures).ravel()
    stacked = np.column_stack([f.values.ravel() * sqrt_w for f in group])
    q, _ = np.linalg.qr(stacked)
    return [
        _normalize_sign(ScalarField(grid, (q[:, i] / sqrt_w).reshape(grid.shape)))
        for i in range(len(group))
    ]


def _spectrum(
    ctx: EllipticContext, count: int, kind: str, config: SpectraConfig | None
) -> EigenResult:
    if kind not in KINDS:
        raise GridError(f"unknown spectrum kind {kind!r}")
    if count < 1:
        raise GridError(f"count must be >= 1, got {count}")
    config = config or SpectraConfig()
    grid = ctx.grid
    defect = 0.0
    # Every member of the first ``count`` groups sits within ``count + 1`` modes per m.
    per_mode = count + 1
    entries: list[tuple[float, str, ScalarField]] = []
    for m in (int(x) for x in mode_numbers(grid)):
        if m == 0 and kind == "constrained":
            values, profiles, defect = _constrained_radial(ctx, per_mode, config)
        elif m == 0 and kind == "cap":
            values, profiles = _radial_modes(grid, 0, per_mode, "neumann")
        else:
            values, profiles = _radial_modes(grid, m, per_mode)
        for k, value in enumerate(values):
            for f in _fields_for_mode(grid, m, profiles[:, k]):
                entries.append((float(value), f"m={m},k={k}", f))
    entries.sort(key=lambda item: item[0])

    groups: list[list[tuple[float, str, ScalarField]]] = [[entries[0]]]
    for prev, item in zip(entries, entries[1:]):
        tol = cluster_tolerance(grid, prev[0], config)
        gap = (item[0] - prev[0]) / abs(prev[0])
        if tol < gap <= 10.0 * tol:
            logger.warning(
                "cluster_ambiguity", kind=kind, value=prev[0], gap=gap, tolerance=tol
            )
        if gap <= tol:
            groups[-1].append(item)
        else:
            if len(groups) == count:
                break
            groups.append([item])

    result = EigenResult(
        kind=kind,
        grid=grid,
        eigenvalues=[group[0][0] for group in groups],
        eigenfields=[_orthonormalize([f for _, _, f in group]) for group in groups],
        multiplicities=[len(group) for group in groups],
        modes=[[label for _, label, _ in group] for group in groups],
        symmetry_defect=defect,
    )
    if any(v <= 0 for v in result.eigenvalues):
        raise SolverError(f"non-positive eigenvalue in {kind} spectrum")
    logger.info(
        "spectrum_computed",
        kind=kind,
        nr=grid.nr,
        ntheta=grid.ntheta,
        eigenvalues=result.eigenvalues,
        multiplicities=result.multiplicities,
    )
    return result


def dirichlet_spectrum(
    ctx: EllipticContext, count: int, config: SpectraConfig | None = None
) -> EigenResult:
    """First ``count`` zero-Dirichlet eigenvalues with their eigenfields."""
    return _spectrum(ctx, count, "dirichlet", config)


def cap_spectrum(
    ctx: EllipticContext, count: int, config: SpectraConfig | None = None
) -> EigenResult:
    """Spectrum over fields vanishing on the outer circle, constant with zero flux inside."""
    return _spectrum(ctx, count, "cap", config)


def constrained_spectrum(
    ctx: EllipticContext, count: int, config: SpectraConfig | None = None
) -> EigenResult:
    """Mean-zero spectrum with constant traces and zero boundary fluxes.

    Eigenfields are vorticity-side eigenfunctions ``v``; the stream side is
    ``v / Lambda``.
    """
    return _spectrum(ctx, count, "constrained", config)


def lambda_cap1(ctx: EllipticContext) -> float:
    return cap_spectrum(ctx, 1).first


def stability_margin(ctx: EllipticContext) -> float:
    """Gap between the first constrained eigenvalue and the capacity constant."""
    margin = constrained_spectrum(ctx, 1).first - lambda_cap1(ctx)
    logger.info("stability_margin", a=ctx.grid.a, nr=ctx.grid.nr, margin=margin)
    return margin


@dataclass(slots=True)
class RayleighReport:
    """Both sides of a Poincare-type inequality ``lhs <= rhs``."""

    which: str
    member: bool
    violations: list[str]
    lambda1: float
    lhs: float | None = None
    rhs: float | None = None
    defect: float | None = None
    equality: bool = False

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def trace_deviation(u: ScalarField) -> list[float]:
    """Spread of the extrapolated boundary values along each boundary component."""
    v = u.values
    out = [v[-1:-4:-1].T @ _EXTRAPOLATE]
    if not u.grid.is_disk:
        out.append(v[:3].T @ _EXTRAPOLATE)
    return [float(np.max(np.abs(b - b.mean()))) for b in out]


def _free_traces(u: ScalarField) -> np.ndarray:
    # Ring means of the boundary cells: the traces with zero conservative flux.
    traces = [float(np.mean(u.values[-1]))]
    if not u.grid.is_disk:
        traces.append(float(np.mean(u.values[0])))
    return np.array(traces)


def rayleigh_check(
    ctx: EllipticContext,
    u: ScalarField,
    which: str,
    lambda1: float | None = None,
    config: SpectraConfig | None = None,
) -> RayleighReport:
    """Evaluate an inequality bounded by the first constrained eigenvalue.

    ``which`` is ``"X"`` (``Lambda1 int u^2 <= int |grad u|^2`` over mean-zero
    fields with constant traces), ``"Y"`` (same, also requiring zero fluxes) or
    ``"gradient"`` (``int |grad u|^2 <= int (Lap u)^2 / Lambda1`` over the
    zero-flux class). Non-members are reported without evaluation.
    """
    if which not in ("X", "Y", "gradient"):
        raise GridError(f"unknown inequality {which!r}")
    config = config or SpectraConfig()
    grid = ctx.grid
    if lambda1 is None:
        lambda1 = constrained_spectrum(ctx, 1, config).first
    size = float(np.max(np.abs(u.values)))
    violations: list[str] = []
    if abs(mean(u)) > 1e-8 * max(size, 1e-300):
        violations.append(f"mean {mean(u):.3e} is not zero")
    trace_tol = 10.0 * grid.dr * size
    for i, spread in enumerate(trace_deviation(u)):
        if spread > trace_tol:
            violations.append(f"trace on boundary {i} varies by {spread:.3e}")
    if which != "X":
        for i in range(1 + grid.n_inner):
            flux = boundary_flux(ctx, u, i)
            if abs(flux) > trace_tol * 2.0 * np.pi:
                violations.append(f"flux on boundary {i} is {flux:.3e}")
    if violations:
        return RayleighReport(which, False, violations, lambda1)

    traces = _free_traces(u)
    form = dirichlet_form(ctx, u, traces)
    if which == "gradient":
        lap = apply_laplacian(ctx, u, traces)
        lhs, rhs = form, inner(lap, lap) / lambda1
    else:
        lhs, rhs = lambda1 * inner(u, u), form
    defect = rhs - lhs
    scale = max(abs(lhs), abs(rhs))
    tol = max(1e-6, cluster_tolerance(grid, lambda1, config))
    equality = scale == 0.0 or abs(defect) <= tol * scale
    return RayleighReport(which, True, [], lambda1, lhs, rhs, defect, equality)

