import numpy as np
import pytest

from vorstab.errors import GridError
from vorstab.grid import (
    ScalarField,
    inner,
    integrate,
    lp_distance,
    lp_norm,
    make_grid,
    mean,
    mode_numbers,
    rotate,
)


def test_make_grid_rejects_bad_parameters():
    with pytest.raises(GridError):
        make_grid(1.0, 8, 8)
    with pytest.raises(GridError):
        make_grid(-0.1, 8, 8)
    with pytest.raises(GridError, match="even"):
        make_grid(0.0, 8, 9)
    with pytest.raises(GridError):
        make_grid(0.0, 2, 8)


def test_grid_geometry():
    grid = make_grid(0.5, 10, 16)
    assert not grid.is_disk
    assert grid.n_inner == 1
    assert grid.dr == pytest.approx(0.05)
    assert grid.r_centers[0] == pytest.approx(0.525)
    assert grid.r_faces[0] == pytest.approx(0.5)
    assert grid.r_faces[-1] == pytest.approx(1.0)
    assert grid.measures.sum() == pytest.approx(grid.area, rel=1e-14)
    assert make_grid(0.0, 8, 8).n_inner == 0


def test_measures_are_read_only():
    grid = make_grid(0.0, 8, 8)
    with pytest.raises(ValueError):
        grid.measures[0, 0] = 1.0


def test_field_rejects_non_finite_and_wrong_shape():
    grid = make_grid(0.0, 8, 8)
    with pytest.raises(GridError):
        ScalarField(grid, np.full(grid.shape, np.nan))
    with pytest.raises(GridError):
        ScalarField(grid, np.zeros((8, 9)))


def test_field_algebra_and_mixed_grids():
    grid = make_grid(0.0, 8, 8)
    f = ScalarField.constant(grid, 2.0)
    g = ScalarField.from_function(grid, lambda r, th: r)
    assert np.allclose((f + g - g).values, 2.0)
    assert np.allclose((3.0 * f / 2.0).values, 3.0)
    assert np.allclose((1.0 - f).values, -1.0)
    assert np.allclose((-f).values, -2.0)
    with pytest.raises(GridError):
        f + ScalarField.zeros(make_grid(0.0, 8, 16))


def test_integrals_of_polynomials():
    grid = make_grid(0.0, 64, 16)
    one = ScalarField.constant(grid, 1.0)
    r2 = ScalarField.from_function(grid, lambda r, th: r**2)
    assert integrate(one) == pytest.approx(np.pi, rel=1e-14)
    assert mean(one) == pytest.approx(1.0)
    # Midpoint rule on r^3: error of order dr^2.
    assert integrate(r2) == pytest.approx(np.pi / 2, rel=1e-3)
    assert lp_norm(one, 2.0) == pytest.approx(np.sqrt(np.pi))
    assert inner(one, r2) == pytest.approx(integrate(r2))


def test_lp_norm_rejects_small_p():
    grid = make_grid(0.0, 8, 8)
    with pytest.raises(GridError):
        lp_norm(ScalarField.zeros(grid), 0.5)


def test_lp_distance_is_symmetric():
    grid = make_grid(0.25, 8, 16)
    f = ScalarField.from_function(grid, lambda r, th: np.cos(th))
    g = ScalarField.from_function(grid, lambda r, th: r * np.sin(2 * th))
    assert lp_distance(f, g, 3.0) == pytest.approx(lp_distance(g, f, 3.0))
    assert lp_distance(f, f) == 0.0


def test_mode_numbers():
    assert list(mode_numbers(make_grid(0.0, 8, 8))) == [0, 1, 2, 3, 4]


def test_rotate_band_limited_field_is_exact():
    grid = make_grid(0.0, 8, 32)
    f = ScalarField.from_function(grid, lambda r, th: r * np.cos(th) + r**2 * np.sin(3 * th))
    angle = 0.37
    expected = ScalarField.from_function(
        grid, lambda r, th: r * np.cos(th - angle) + r**2 * np.sin(3 * (th - angle))
    )
    assert np.allclose(rotate(f, angle).values, expected.values, atol=1e-13)


def test_rotate_by_whole_cells_permutes_columns():
    grid = make_grid(0.0, 8, 16)
    rng = np.random.default_rng(3)
    values = rng.standard_normal(grid.shape)
    # Remove the Nyquist mode, whose phase cannot be shifted on the real grid.
    coeffs = np.fft.rfft(values, axis=1)
    coeffs[:, -1] = 0.0
    f = ScalarField(grid, np.fft.irfft(coeffs, n=grid.ntheta, axis=1))
    rotated = rotate(f, 2 * grid.dtheta)
    assert np.allclose(rotated.values, np.roll(f.values, 2, axis=1), atol=1e-12)
