"""Polar cell-centred grids on the unit disk and on annuli, with field algebra."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from vorstab.errors import GridError

__all__ = [
    "Grid",
    "ScalarField",
    "make_grid",
    "integrate",
    "lp_norm",
    "lp_distance",
    "inner",
    "mean",
    "rotate",
    "mode_numbers",
]


@dataclass(frozen=True, slots=True)
class Grid:
    """Structured polar discretization of the disk (``a == 0``) or an annulus.

    Cells are indexed ``(j, k)`` with radial centres ``r_j = a + (j + 1/2) dr``
    and angular centres ``theta_k = (k + 1/2) dtheta``. The cell measure
    ``r_j dr dtheta`` is the single quadrature used for every integral.
    """

    a: float
    nr: int
    ntheta: int
    r_centers: np.ndarray = field(init=False, repr=False, compare=False)
    theta_centers: np.ndarray = field(init=False, repr=False, compare=False)
    measures: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not 0.0 <= self.a < 1.0:
            raise GridError(f"inner radius must satisfy 0 <= a < 1, got {self.a}")
        if self.nr < 4:
            raise GridError(f"nr must be at least 4, got {self.nr}")
        if self.ntheta < 8:
            raise GridError(f"ntheta must be at least 8, got {self.ntheta}")
        if self.ntheta % 2:
            raise GridError(f"ntheta must be even, got {self.ntheta}")
        dr = (1.0 - self.a) / self.nr
        dtheta = 2.0 * np.pi / self.ntheta
        r = self.a + (np.arange(self.nr) + 0.5) * dr
        theta = (np.arange(self.ntheta) + 0.5) * dtheta
        w = np.repeat((r * dr * dtheta)[:, None], self.ntheta, axis=1)
        for name, arr in (("r_centers", r), ("theta_centers", theta), ("measures", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dr(self) -> float:
        return (1.0 - self.a) / self.nr

    @property
    def dtheta(self) -> float:
        return 2.0 * np.pi / self.ntheta

    @property
    def is_disk(self) -> bool:
        return self.a == 0.0

    @property
    def n_inner(self) -> int:
        """Number of inner boundary components (0 for the disk, 1 for an annulus)."""
        return 0 if self.is_disk else 1

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nr, self.ntheta)

    @property
    def area(self) -> float:
        return float(np.pi * (1.0 - self.a**2))

    @property
    def r_faces(self) -> np.ndarray:
        """Radii of the ``nr + 1`` cell faces, from ``a`` to 1."""
        return self.a + np.arange(self.nr + 1) * self.dr

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(r, theta)`` arrays of shape ``(nr, ntheta)``."""
        return np.meshgrid(self.r_centers, self.theta_centers, indexing="ij")

    def params(self) -> dict[str, float | int]:
        return {"a": self.a, "nr": self.nr, "ntheta": self.ntheta}


def make_grid(a: float, nr: int, ntheta: int) -> Grid:
    """Build a polar grid; raises ``GridError`` on invalid parameters."""
    return Grid(a=float(a), nr=int(nr), ntheta=int(ntheta))


@dataclass(frozen=True, slots=True, eq=False)
class ScalarField:
    """Cell-centred real values on a grid. Values are read-only."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise GridError(
                f"field shape {values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise GridError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls.constant(grid, 0.0)

    @classmethod
    def from_function(
        cls, grid: Grid, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    ) -> "ScalarField":
        """Sample ``fn(r, theta)`` at the cell centres."""
        r, theta = grid.mesh()
        return cls(grid, np.broadcast_to(fn(r, theta), grid.shape))

    @classmethod
    def radial(cls, grid: Grid, profile: np.ndarray) -> "ScalarField":
        """Broadcast a length-``nr`` radial profile over all angles."""
        return cls(grid, np.repeat(np.asarray(profile, float)[:, None], grid.ntheta, 1))

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values)

    def _other(self, other: "ScalarField | float") -> np.ndarray | float:
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise GridError("fields live on different grids")
            return other.values
        return float(other)

    def __add__(self, other: "ScalarField | float") -> "ScalarField":
        return self.with_values(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other: "ScalarField | float") -> "ScalarField":
        return self.with_values(self.values - self._other(other))

    def __rsub__(self, other: float) -> "ScalarField":
        return self.with_values(float(other) - self.values)

    def __mul__(self, scalar: float) -> "ScalarField":
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "ScalarField":
        return self.with_values(self.values / float(scalar))

    def __neg__(self) -> "ScalarField":
        return self.with_values(-self.values)


def _same_grid(f: ScalarField, g: ScalarField) -> None:
    if f.grid != g.grid:
        raise GridError("fields live on different grids")


def integrate(f: ScalarField) -> float:
    return float(np.sum(f.values * f.grid.measures))


def lp_norm(f: ScalarField, p: float = 2.0) -> float:
    if p < 1:
        raise GridError(f"p must be >= 1, got {p}")
    return float(np.sum(np.abs(f.values) ** p * f.grid.measures) ** (1.0 / p))


def lp_distance(f: ScalarField, g: ScalarField, p: float = 2.0) -> float:
    _same_grid(f, g)
    return lp_norm(f - g, p)


def inner(f: ScalarField, g: ScalarField) -> float:
    _same_grid(f, g)
    return float(np.sum(f.values * g.values * f.grid.measures))


def mean(f: ScalarField) -> float:
    return integrate(f) / f.grid.area


def mode_numbers(grid: Grid) -> np.ndarray:
    """Angular wavenumbers ``0 .. ntheta/2`` of the real FFT along theta."""
    return np.arange(grid.ntheta // 2 + 1)


def rotate(f: ScalarField, angle: float) -> ScalarField:
    """Rotate ``f`` counter-clockwise by ``angle`` via Fourier phase shifts.

    The result samples ``f(r, theta - angle)`` exactly for band-limited fields.
    """
    grid = f.grid
    coeffs = np.fft.rfft(f.values, axis=1)
    coeffs *= np.exp(-1j * mode_numbers(grid) * angle)[None, :]
    return f.with_values(np.fft.irfft(coeffs, n=grid.ntheta, axis=1))
