"""Green and circulation operators for the stream function on the disk and annulus.

The discrete Laplacian is Fourier-diagonal in theta. Each angular mode is a
conservative three-point finite-volume operator in r; constant boundary traces
enter through ghost cells ``u_ghost = 2 c - u``. On the disk the innermost face
sits at ``r = 0`` and carries no flux, which closes every mode at the pole.
All modes are assembled into one block-diagonal sparse matrix, mode-major
(row ``m * nr + j``), and factorized once per grid.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import norm as sparse_norm
from scipy.sparse.linalg import splu

from vorstab.errors import GridError, MembershipError, SolverError
from vorstab.grid import Grid, ScalarField, inner, integrate, mean, mode_numbers
from vorstab.logging import get_logger

__all__ = [
    "CirculationVector",
    "EllipticContext",
    "StreamSolution",
    "as_circulation",
    "build_context",
    "radial_coefficients",
    "mode_operator",
    "dirichlet_solve",
    "apply_P",
    "h_gamma",
    "apply_T",
    "stream_function",
    "solve_vcp",
    "apply_laplacian",
    "laplacian_residual",
    "dirichlet_form",
    "kinetic_energy",
    "boundary_flux",
    "inner_face_flux",
    "energy",
    "moment_of_inertia",
    "to_modes",
    "from_modes",
]

logger = get_logger(component="elliptic")

SOLVE_RTOL = 1e-12
MEAN_ATOL = 1e-10


@dataclass(frozen=True, slots=True)
class CirculationVector:
    """Circulations around the inner boundary components (empty on the disk)."""

    gammas: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self) -> None:
        values = np.array(self.gammas, dtype=float).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise GridError("circulations must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "gammas", values)

    def __len__(self) -> int:
        return int(self.gammas.size)

    def to_list(self) -> list[float]:
        return [float(g) for g in self.gammas]


def as_circulation(
    grid: Grid, gamma: CirculationVector | Sequence[float] | float | None
) -> CirculationVector:
    """Normalize ``gamma`` and check its length against the grid's inner boundaries."""
    if gamma is None:
        gamma = CirculationVector(np.zeros(grid.n_inner))
    elif not isinstance(gamma, CirculationVector):
        gamma = CirculationVector(np.atleast_1d(np.asarray(gamma, dtype=float)))
    if len(gamma) != grid.n_inner:
        raise GridError(
            f"circulation vector has length {len(gamma)}, "
            f"domain has {grid.n_inner} inner boundaries"
        )
    return gamma


def radial_coefficients(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Face coupling coefficients ``(east, west)`` of the radial operator.

    ``east_j = r_{j+1/2} / (r_j dr^2)`` and ``west_j = r_{j-1/2} / (r_j dr^2)``.
    ``west_0`` vanishes on the disk because the innermost face is the pole.
    """
    faces = grid.r_faces
    r = grid.r_centers
    h2 = grid.dr**2
    return faces[1:] / (r * h2), faces[:-1] / (r * h2)


def mode_operator(
    grid: Grid, m: int, inner_closure: str = "dirichlet"
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lower, main and upper diagonals of mode ``m`` of the discrete ``-Laplacian``.

    The outer boundary is always Dirichlet. ``inner_closure`` is
    ``"dirichlet"`` or ``"neumann"`` (zero flux through the inner face).
    """
    east, west = radial_coefficients(grid)
    r = grid.r_centers
    main = east + west + (m / r) ** 2
    main[-1] += east[-1]
    if inner_closure == "dirichlet":
        main[0] += west[0]
    elif inner_closure == "neumann":
        main[0] -= west[0]
    else:
        raise GridError(f"unknown inner closure {inner_closure!r}")
    return -west[1:].copy(), main, -east[:-1].copy()


def to_modes(values: np.ndarray) -> np.ndarray:
    """Angular Fourier coefficients as an ``(n_modes, nr)`` complex array."""
    return np.fft.rfft(values, axis=1).T


def from_modes(coeffs: np.ndarray, ntheta: int) -> np.ndarray:
    return np.fft.irfft(coeffs.T, n=ntheta, axis=1)


@dataclass(frozen=True, slots=True)
class EllipticContext:
    """Factorized operators of one grid. Immutable after :func:`build_context`."""

    grid: Grid
    laplacian: sp.csc_matrix = field(repr=False)
    lu: object = field(repr=False)
    zeta: tuple[ScalarField, ...]
    p_matrix: np.ndarray
    q_matrix: np.ndarray

    @property
    def n_inner(self) -> int:
        return self.grid.n_inner


def _assemble(grid: Grid) -> sp.csc_matrix:
    lowers, mains, uppers = [], [], []
    for m in mode_numbers(grid):
        lower, main, upper = mode_operator(grid, int(m))
        mains.append(main)
        # Zero couplings across block boundaries.
        lowers.append(np.append(lower, 0.0))
        uppers.append(np.append(upper, 0.0))
    main = np.concatenate(mains)
    lower = np.concatenate(lowers)[:-1]
    upper = np.concatenate(uppers)[:-1]
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csc")


def _solve_modes(ctx: EllipticContext, rhs: np.ndarray) -> np.ndarray:
    flat = rhs.reshape(-1)
    stacked = np.column_stack([flat.real, flat.imag])
    solution = ctx.lu.solve(stacked)
    if not np.all(np.isfinite(solution)):
        raise SolverError("linear solve produced non-finite values")
    # Normwise backward error: |Ax - b| / (|A| |x| + |b|) in the max norm.
    scale = sparse_norm(ctx.laplacian, np.inf) * np.max(np.abs(solution)) + np.max(
        np.abs(stacked), initial=0.0
    )
    if scale > 0.0:
        residual = np.max(np.abs(ctx.laplacian @ solution - stacked)) / scale
        if not np.isfinite(residual) or residual > SOLVE_RTOL:
            raise SolverError(f"linear solve residual {residual:.3e} exceeds {SOLVE_RTOL}")
    return (solution[:, 0] + 1j * solution[:, 1]).reshape(rhs.shape)


def _boundary_rhs(grid: Grid, traces: Sequence[float]) -> np.ndarray:
    """Mode-space right-hand side contributed by constant boundary traces."""
    east, west = radial_coefficients(grid)
    rhs = np.zeros((len(mode_numbers(grid)), grid.nr), dtype=complex)
    # A constant field c has zeroth rfft coefficient ntheta * c.
    rhs[0, -1] = 2.0 * east[-1] * traces[0] * grid.ntheta
    if grid.n_inner:
        rhs[0, 0] = 2.0 * west[0] * traces[1] * grid.ntheta
    return rhs


def _check_grid(ctx: EllipticContext, f: ScalarField) -> None:
    if f.grid != ctx.grid:
        raise GridError("field does not live on the context grid")


def build_context(grid: Grid) -> EllipticContext:
    """Assemble and factorize the Laplacian, then the harmonic measures and circulation matrices."""
    laplacian = _assemble(grid)
    lu = splu(laplacian)
    n = grid.n_inner
    zeta: tuple[ScalarField, ...] = ()
    p_matrix = np.zeros((n, n))
    q_matrix = np.zeros((n, n))
    ctx = EllipticContext(grid, laplacian, lu, zeta, p_matrix, q_matrix)
    if n:
        coeffs = _solve_modes(ctx, _boundary_rhs(grid, [0.0, 1.0]))
        zeta1 = ScalarField(grid, from_modes(coeffs, grid.ntheta))
        zeta = (zeta1,)
        # Conservative flux through the inner face equals the discrete Dirichlet energy.
        ring = float(np.mean(zeta1.values[0]))
        p_matrix = np.array([[4.0 * np.pi * grid.a * (1.0 - ring) / grid.dr]])
        if not np.all(np.isfinite(p_matrix)) or np.any(np.linalg.eigvalsh(p_matrix) <= 0):
            raise SolverError(f"circulation matrix is not positive definite: {p_matrix}")
        q_matrix = np.linalg.inv(p_matrix)
        if not np.allclose(q_matrix @ p_matrix, np.eye(n), rtol=0.0, atol=1e-10):
            raise SolverError("circulation matrix inverse check failed")
        ctx = EllipticContext(grid, laplacian, lu, zeta, p_matrix, q_matrix)
    logger.info(
        "context_built",
        nr=grid.nr,
        ntheta=grid.ntheta,
        a=grid.a,
        p11=float(p_matrix[0, 0]) if n else None,
    )
    return ctx


def dirichlet_solve(ctx: EllipticContext, v: ScalarField) -> ScalarField:
    """Apply G: solve ``-Lap u = v`` with ``u = 0`` on every boundary component."""
    _check_grid(ctx, v)
    coeffs = _solve_modes(ctx, to_modes(v.values))
    return v.with_values(from_modes(coeffs, ctx.grid.ntheta))


def _zeta_moments(ctx: EllipticContext, v: ScalarField) -> np.ndarray:
    return np.array([inner(v, z) for z in ctx.zeta])


def _combine_zeta(ctx: EllipticContext, coefficients: np.ndarray) -> np.ndarray:
    values = np.zeros(ctx.grid.shape)
    for c, z in zip(coefficients, ctx.zeta):
        values += c * z.values
    return values


def apply_P(ctx: EllipticContext, v: ScalarField) -> ScalarField:
    """``Gv + sum_ij q_ij (int v zeta_i) zeta_j``; equals G on the disk."""
    u = dirichlet_solve(ctx, v)
    if not ctx.n_inner:
        return u
    coefficients = ctx.q_matrix @ _zeta_moments(ctx, v)
    return u.with_values(u.values + _combine_zeta(ctx, coefficients))


def h_gamma(
    ctx: EllipticContext, gamma: CirculationVector | Sequence[float] | None = None
) -> ScalarField:
    """``-sum_ij q_ij gamma_i zeta_j``; zero on the disk."""
    gamma = as_circulation(ctx.grid, gamma)
    if not ctx.n_inner:
        return ScalarField.zeros(ctx.grid)
    return ScalarField(ctx.grid, _combine_zeta(ctx, -(ctx.q_matrix @ gamma.gammas)))


def apply_T(ctx: EllipticContext, v: ScalarField) -> ScalarField:
    """``Pv - mean(Pv)`` for mean-zero ``v``."""
    scale = max(1.0, float(np.max(np.abs(v.values))))
    if abs(mean(v)) > MEAN_ATOL * scale:
        raise MembershipError(f"apply_T needs a mean-zero field, got mean {mean(v):.3e}")
    u = apply_P(ctx, v)
    return u - mean(u)


@dataclass(frozen=True, slots=True)
class StreamSolution:
    """Mean-zero stream function and its constant boundary traces.

    ``traces[0]`` is the outer value, ``traces[1]`` the inner one on an annulus.
    ``offset`` is the mean removed from ``P v + h_gamma``.
    """

    psi: ScalarField
    traces: np.ndarray
    offset: float


def stream_function(
    ctx: EllipticContext,
    v: ScalarField,
    gamma: CirculationVector | Sequence[float] | None = None,
) -> StreamSolution:
    """Solve the vorticity-circulation problem and keep the boundary traces."""
    gamma = as_circulation(ctx.grid, gamma)
    u = apply_P(ctx, v) + h_gamma(ctx, gamma)
    traces = np.zeros(1 + ctx.n_inner)
    if ctx.n_inner:
        traces[1:] = ctx.q_matrix @ (_zeta_moments(ctx, v) - gamma.gammas)
    offset = mean(u)
    return StreamSolution(psi=u - offset, traces=traces - offset, offset=offset)


def solve_vcp(
    ctx: EllipticContext,
    v: ScalarField,
    gamma: CirculationVector | Sequence[float] | None = None,
) -> ScalarField:
    """Unique mean-zero ``psi`` with ``-Lap psi = v``, constant traces and inner fluxes ``-gamma``."""
    return stream_function(ctx, v, gamma).psi


def apply_laplacian(
    ctx: EllipticContext, u: ScalarField, traces: Sequence[float] | None = None
) -> ScalarField:
    """Discrete ``-Lap u`` with the boundary values fixed to the constant ``traces``."""
    _check_grid(ctx, u)
    grid = ctx.grid
    if traces is None:
        traces = np.zeros(1 + grid.n_inner)
    if len(traces) != 1 + grid.n_inner:
        raise GridError(f"expected {1 + grid.n_inner} traces, got {len(traces)}")
    coeffs = to_modes(u.values)
    flat = coeffs.reshape(-1)
    applied = (ctx.laplacian @ flat.real + 1j * (ctx.laplacian @ flat.imag)).reshape(
        coeffs.shape
    )
    applied -= _boundary_rhs(grid, traces)
    return u.with_values(from_modes(applied, grid.ntheta))


def laplacian_residual(ctx: EllipticContext, u: ScalarField, v: ScalarField) -> float:
    """Max of ``|-Lap u - v|`` over cells whose stencil touches no physical boundary."""
    _check_grid(ctx, v)
    diff = apply_laplacian(ctx, u).values - v.values
    first = 1 if ctx.n_inner else 0
    return float(np.max(np.abs(diff[first : ctx.grid.nr - 1])))


def dirichlet_form(
    ctx: EllipticContext, u: ScalarField, traces: Sequence[float] | None = None
) -> float:
    """Discrete ``int |grad u|^2`` consistent with :func:`apply_laplacian`.

    Boundary half-faces use the constant ``traces``; the angular part is
    evaluated spectrally.
    """
    _check_grid(ctx, u)
    grid = ctx.grid
    if traces is None:
        traces = np.zeros(1 + grid.n_inner)
    values = u.values
    faces = grid.r_faces
    dr, dth = grid.dr, grid.dtheta
    radial = np.sum(faces[1:-1, None] * dth * np.diff(values, axis=0) ** 2 / dr)
    radial += np.sum(faces[-1] * dth * 2.0 * (values[-1] - traces[0]) ** 2 / dr)
    if grid.n_inner:
        radial += np.sum(faces[0] * dth * 2.0 * (values[0] - traces[1]) ** 2 / dr)
    coeffs = np.fft.rfft(values, axis=1)
    m = mode_numbers(grid)
    weight = np.full(m.shape, 2.0)
    weight[0] = 1.0
    weight[-1] = 1.0
    spectrum = np.sum(weight * m**2 * np.abs(coeffs) ** 2, axis=1) / grid.ntheta
    angular = np.sum(dr / grid.r_centers * dth * spectrum)
    return float(radial + angular)


def kinetic_energy(
    ctx: EllipticContext,
    v: ScalarField,
    gamma: CirculationVector | Sequence[float] | None = None,
) -> float:
    """Half the discrete Dirichlet energy of the stream function."""
    solution = stream_function(ctx, v, gamma)
    return 0.5 * dirichlet_form(ctx, solution.psi, solution.traces)


def boundary_flux(ctx: EllipticContext, u: ScalarField, i: int) -> float:
    """Outward-normal flux of ``u`` through boundary ``i`` (0 outer, 1 inner).

    Uses the second-order one-sided derivative from the three cells nearest
    the boundary, so no trace value is needed.
    """
    _check_grid(ctx, u)
    grid = ctx.grid
    if i not in range(1 + grid.n_inner):
        raise GridError(f"boundary index must be in [0, {grid.n_inner}], got {i}")
    v = u.values
    if i == 0:
        derivative = (2.0 * v[-1] - 3.0 * v[-2] + v[-3]) / grid.dr
        return float(grid.dtheta * np.sum(derivative))
    derivative = (2.0 * v[0] - 3.0 * v[1] + v[2]) / grid.dr
    return float(grid.a * grid.dtheta * np.sum(derivative))


def inner_face_flux(ctx: EllipticContext, u: ScalarField, trace: float) -> float:
    """Conservative outward flux through the inner face given the inner ``trace``."""
    grid = ctx.grid
    if not grid.n_inner:
        raise GridError("the disk has no inner boundary")
    _check_grid(ctx, u)
    return float(-grid.a * grid.dtheta * np.sum(2.0 * (u.values[0] - trace) / grid.dr))


def energy(
    ctx: EllipticContext,
    v: ScalarField,
    gamma: CirculationVector | Sequence[float] | None = None,
) -> float:
    """``1/2 int v Pv + int h_gamma v + 1/2 gamma^T q gamma``."""
    gamma = as_circulation(ctx.grid, gamma)
    value = 0.5 * inner(v, apply_P(ctx, v))
    if ctx.n_inner:
        value += inner(h_gamma(ctx, gamma), v)
        value += 0.5 * float(gamma.gammas @ ctx.q_matrix @ gamma.gammas)
    return float(value)


def moment_of_inertia(f: ScalarField) -> float:
    """``int |x|^2 f``."""
    r, _ = f.grid.mesh()
    return integrate(f.with_values(r**2 * f.values))
