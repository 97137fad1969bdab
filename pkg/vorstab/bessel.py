"""Bessel functions J0 and J1, their zeros, and the disk's first constrained eigenspace."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import bisect

from vorstab.errors import BesselError
from vorstab.grid import Grid, ScalarField

__all__ = [
    "BesselTable",
    "bessel_j",
    "bessel_table",
    "find_zero",
    "e1_basis",
    "radial_moment_integral",
    "radial_moment_closed_form",
    "companion_integral",
    "gauss_legendre",
]

_SERIES_LIMIT = 8.0
_ASYMPTOTIC_LIMIT = 30.0
_SERIES_RTOL = 1e-18
_MAX_TERMS = 120
_RESCALE = 1e200


def _series(n: int, x: np.ndarray) -> np.ndarray:
    half = 0.5 * x
    term = np.ones_like(x) if n == 0 else half.copy()
    total = term.copy()
    step = -half * half
    for k in range(1, _MAX_TERMS):
        term = term * step / (k * (k + n))
        total = total + term
        if np.all(np.abs(term) <= _SERIES_RTOL * np.abs(total)):
            break
    return total


def _backward_recurrence(n: int, x: np.ndarray) -> np.ndarray:
    # Miller's algorithm normalised by J0 + 2 * sum J_2k = 1.
    start = 2 * (int(np.max(x)) // 2) + 60
    upper = np.zeros_like(x)
    current = np.full_like(x, 1e-30)
    norm = np.zeros_like(x)
    j1 = np.zeros_like(x)
    for k in range(start, 0, -1):
        lower = (2.0 * k / x) * current - upper
        upper, current = current, lower
        order = k - 1
        if order == 1:
            j1 = current.copy()
        if order > 0 and order % 2 == 0:
            norm = norm + 2.0 * current
        scale = np.where(np.abs(current) > _RESCALE, 1.0 / _RESCALE, 1.0)
        upper, current, norm, j1 = upper * scale, current * scale, norm * scale, j1 * scale
    norm = norm + current
    return (current if n == 0 else j1) / norm


def _hankel(n: int, x: np.ndarray) -> np.ndarray:
    mu = 4.0 * n * n
    p = np.ones_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    for k in range(1, 40):
        term = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if k % 2:
            q = q + (-1) ** ((k - 1) // 2) * term
        else:
            p = p + (-1) ** (k // 2) * term
        if np.all(np.abs(term) < 1e-17):
            break
    chi = x - (0.5 * n + 0.25) * np.pi
    return np.sqrt(2.0 / (np.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


def bessel_j(n: int, x: float | np.ndarray) -> float | np.ndarray:
    """Bessel function of the first kind of order 0 or 1 for ``x >= 0``.

    Power series on ``[0, 8]``, Miller backward recurrence on ``(8, 30]``
    and Hankel asymptotics beyond.
    """
    if n not in (0, 1):
        raise BesselError(f"only orders 0 and 1 are supported, got {n}")
    arr = np.asarray(x, dtype=float)
    flat = np.atleast_1d(arr).ravel()
    if np.any(flat < 0):
        raise BesselError("bessel_j is defined here for x >= 0 only")
    out = np.empty_like(flat)
    low = flat <= _SERIES_LIMIT
    high = flat > _ASYMPTOTIC_LIMIT
    mid = ~low & ~high
    if low.any():
        out[low] = _series(n, flat[low])
    if mid.any():
        out[mid] = _backward_recurrence(n, flat[mid])
    if high.any():
        out[high] = _hankel(n, flat[high])
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def find_zero(n: int, bracket: tuple[float, float]) -> float:
    """Zero of ``J_n`` inside ``bracket`` refined by bisection to 1e-13."""
    lo, hi = float(bracket[0]), float(bracket[1])
    f_lo, f_hi = bessel_j(n, lo), bessel_j(n, hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise BesselError(f"J{n} has no sign change on [{lo}, {hi}]")
    return float(bisect(lambda s: bessel_j(n, s), lo, hi, xtol=1e-13, maxiter=200))


@dataclass(frozen=True, slots=True)
class BesselTable:
    j01: float
    j11: float
    tolerance: float = 1e-12


@lru_cache(maxsize=1)
def bessel_table() -> BesselTable:
    return BesselTable(j01=find_zero(0, (2.0, 3.0)), j11=find_zero(1, (3.0, 4.5)))


def e1_basis(grid: Grid) -> tuple[ScalarField, ScalarField, ScalarField]:
    """Orthonormal basis of span{J0(j11 r), J1(j11 r) sin, J1(j11 r) cos} on the disk."""
    if not grid.is_disk:
        raise BesselError("e1_basis requires a disk grid")
    j11 = bessel_table().j11
    r, theta = grid.mesh()
    raw = [
        bessel_j(0, j11 * r),
        bessel_j(1, j11 * r) * np.sin(theta),
        bessel_j(1, j11 * r) * np.cos(theta),
    ]
    sqrt_w = np.sqrt(grid.measures).ravel()
    stacked = np.column_stack([f.ravel() * sqrt_w for f in raw])
    q, _ = np.linalg.qr(stacked)
    fields = []
    for i, original in enumerate(raw):
        column = q[:, i]
        if column @ (original.ravel() * sqrt_w) < 0:
            column = -column
        fields.append(ScalarField(grid, (column / sqrt_w).reshape(grid.shape)))
    return fields[0], fields[1], fields[2]


@lru_cache(maxsize=4)
def gauss_legendre(panels: int = 64, order: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of composite Gauss-Legendre quadrature on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def radial_moment_integral() -> float:
    """Integral of J0(j11 r) r^3 over [0, 1]; strictly negative."""
    j11 = bessel_table().j11
    r, w = gauss_legendre()
    return float(np.sum(w * bessel_j(0, j11 * r) * r**3))


def radial_moment_closed_form() -> float:
    """The same integral through -(2 / j11^4) * int_0^j11 J1(s) s^2 ds."""
    j11 = bessel_table().j11
    t, w = gauss_legendre()
    s = j11 * t
    return float(-2.0 / j11**4 * j11 * np.sum(w * bessel_j(1, s) * s**2))


def companion_integral() -> float:
    """Integral of J0(j11 r) r over [0, 1], which equals J1(j11) / j11 = 0."""
    j11 = bessel_table().j11
    r, w = gauss_legendre()
    return float(np.sum(w * bessel_j(0, j11 * r) * r))
