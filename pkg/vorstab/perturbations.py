"""Smooth random perturbations built from discrete Dirichlet modes."""

from __future__ import annotations

import numpy as np

from vorstab.elliptic import EllipticContext
from vorstab.errors import GridError
from vorstab.grid import ScalarField, lp_norm, mean
from vorstab.spectra import dirichlet_modes

MAX_MODE = 8
MAX_RADIAL = 8


def smooth_perturbation(
    ctx: EllipticContext,
    rng: np.random.Generator,
    amplitude: float,
    max_mode: int = MAX_MODE,
    max_radial: int = MAX_RADIAL,
) -> ScalarField:
    """Mean-zero combination of the lowest Dirichlet modes with L2 norm ``amplitude``.

    Coefficients are standard normal draws damped by ``1 / (1 + m + k)``.
    """
    if amplitude < 0:
        raise GridError(f"amplitude must be >= 0, got {amplitude}")
    grid = ctx.grid
    if amplitude == 0:
        return ScalarField.zeros(grid)
    _, theta = grid.mesh()
    values = np.zeros(grid.shape)
    for m in range(min(max_mode, grid.ntheta // 2)):
        _, profiles = dirichlet_modes(ctx, m, max_radial)
        for k in range(profiles.shape[1]):
            a, b = rng.standard_normal(2) / (1.0 + m + k)
            phi = profiles[:, k][:, None]
            values += a * phi * np.cos(m * theta)
            if m:
                values += b * phi * np.sin(m * theta)
    f = ScalarField(grid, values)
    f = f - mean(f)
    return f * (amplitude / lp_norm(f, 2.0))
