import numpy as np
import pytest

from vorstab.bessel import bessel_j, bessel_table
from vorstab.elliptic import (
    apply_P,
    apply_T,
    as_circulation,
    boundary_flux,
    build_context,
    dirichlet_form,
    dirichlet_solve,
    energy,
    h_gamma,
    inner_face_flux,
    kinetic_energy,
    laplacian_residual,
    mode_operator,
    moment_of_inertia,
    radial_coefficients,
    solve_vcp,
    stream_function,
)
from vorstab.errors import GridError, MembershipError
from vorstab.grid import ScalarField, inner, lp_distance, lp_norm, make_grid, mean


def _random_field(grid, seed: int = 0, mean_zero: bool = False) -> ScalarField:
    rng = np.random.default_rng(seed)
    f = ScalarField(grid, rng.standard_normal(grid.shape))
    return f - mean(f) if mean_zero else f


def test_disk_pole_has_no_west_coupling():
    _, west = radial_coefficients(make_grid(0.0, 8, 8))
    assert west[0] == 0.0
    _, west = radial_coefficients(make_grid(0.5, 8, 8))
    assert west[0] > 0.0


def test_mode_operator_rejects_unknown_closure():
    with pytest.raises(GridError):
        mode_operator(make_grid(0.0, 8, 8), 0, inner_closure="robin")


def test_as_circulation_checks_length():
    assert len(as_circulation(make_grid(0.0, 8, 8), None)) == 0
    assert as_circulation(make_grid(0.5, 8, 8), 2.0).to_list() == [2.0]
    with pytest.raises(GridError):
        as_circulation(make_grid(0.0, 8, 8), [1.0])


def test_dirichlet_solve_of_constant_on_disk():
    ctx = build_context(make_grid(0.0, 32, 16))
    u = dirichlet_solve(ctx, ScalarField.constant(ctx.grid, 1.0))
    exact = ScalarField.from_function(ctx.grid, lambda r, th: (1 - r**2) / 4)
    assert np.max(np.abs(u.values - exact.values)) < 1e-3


def test_dirichlet_solve_converges_at_second_order():
    errors = []
    for nr in (16, 32):
        ctx = build_context(make_grid(0.0, nr, 16))
        v = ScalarField.from_function(ctx.grid, lambda r, th: 8 * r * np.cos(th))
        exact = ScalarField.from_function(ctx.grid, lambda r, th: (r - r**3) * np.cos(th))
        errors.append(np.max(np.abs(dirichlet_solve(ctx, v).values - exact.values)))
    assert errors[0] / errors[1] >= 3.5


@pytest.mark.parametrize("a", [0.0, 0.5])
def test_P_is_symmetric_and_positive(a):
    ctx = build_context(make_grid(a, 12, 16))
    fields = [_random_field(ctx.grid, seed) for seed in range(100)]
    images = [apply_P(ctx, f) for f in fields]
    gram = np.array([[inner(f, pg) for pg in images] for f in fields])
    assert np.max(np.abs(gram - gram.T)) <= 1e-10 * np.max(np.abs(gram))
    assert np.all(np.diag(gram) > 0)
    assert np.linalg.eigvalsh(0.5 * (gram + gram.T))[0] > 0


def test_apply_T_needs_mean_zero():
    ctx = build_context(make_grid(0.0, 8, 8))
    with pytest.raises(MembershipError):
        apply_T(ctx, ScalarField.constant(ctx.grid, 1.0))
    t = apply_T(ctx, _random_field(ctx.grid, mean_zero=True))
    assert abs(mean(t)) < 1e-12


def test_annulus_circulation_matrix_closed_form():
    ctx = build_context(make_grid(0.5, 64, 8))
    assert ctx.p_matrix[0, 0] == pytest.approx(2 * np.pi / np.log(2), rel=1e-3)
    assert ctx.q_matrix[0, 0] * ctx.p_matrix[0, 0] == pytest.approx(1.0)


def test_pure_circulation_energy_closed_form():
    ctx = build_context(make_grid(0.5, 64, 8))
    zero = ScalarField.zeros(ctx.grid)
    assert energy(ctx, zero, [1.0]) == pytest.approx(np.log(2) / (4 * np.pi), rel=1e-3)


def test_h_gamma_vanishes_on_disk():
    ctx = build_context(make_grid(0.0, 8, 8))
    assert np.all(h_gamma(ctx).values == 0.0)


def test_stream_function_satisfies_the_vorticity_circulation_problem():
    ctx = build_context(make_grid(0.5, 16, 16))
    v = _random_field(ctx.grid, 4)
    gamma = [0.7]
    solution = stream_function(ctx, v, gamma)
    psi = solution.psi
    assert abs(mean(psi)) < 1e-12
    assert laplacian_residual(ctx, psi, v) < 1e-7
    assert inner_face_flux(ctx, psi, solution.traces[1]) == pytest.approx(-0.7, abs=1e-9)
    assert np.array_equal(solve_vcp(ctx, v, gamma).values, psi.values)


def test_kinetic_energy_matches_operator_energy():
    ctx = build_context(make_grid(0.5, 16, 16))
    v = _random_field(ctx.grid, 5)
    assert kinetic_energy(ctx, v, [0.3]) == pytest.approx(energy(ctx, v, [0.3]), rel=1e-8)


def test_dirichlet_form_pairs_with_the_laplacian():
    ctx = build_context(make_grid(0.0, 16, 16))
    v = _random_field(ctx.grid, 6)
    u = dirichlet_solve(ctx, v)
    assert dirichlet_form(ctx, u) == pytest.approx(inner(u, v), rel=1e-9)


def test_boundary_flux_is_exact_for_quadratics():
    grid = make_grid(0.5, 8, 16)
    ctx = build_context(grid)
    u = ScalarField.from_function(grid, lambda r, th: (1 - r**2) / 4)
    assert boundary_flux(ctx, u, 0) == pytest.approx(-np.pi, rel=1e-12)
    # Outward normal on the inner circle points to the origin: -du/dr * 2 pi a.
    assert boundary_flux(ctx, u, 1) == pytest.approx(2 * np.pi * 0.5 * 0.25, rel=1e-12)
    with pytest.raises(GridError):
        boundary_flux(ctx, u, 2)


def test_moment_of_inertia_of_constant():
    grid = make_grid(0.0, 64, 8)
    assert moment_of_inertia(ScalarField.constant(grid, 1.0)) == pytest.approx(
        np.pi / 2, rel=1e-3
    )


def test_harmonic_measure_is_logarithmic():
    ctx = build_context(make_grid(0.5, 64, 8))
    exact = ScalarField.from_function(ctx.grid, lambda r, th: np.log(r) / np.log(0.5))
    assert np.max(np.abs(ctx.zeta[0].values - exact.values)) < 1e-3


def test_h_gamma_of_unit_circulation():
    ctx = build_context(make_grid(0.5, 64, 8))
    q11 = np.log(2) / (2 * np.pi)
    assert ctx.q_matrix[0, 0] == pytest.approx(q11, rel=1e-3)
    h = h_gamma(ctx, [1.0])
    exact = ScalarField.from_function(ctx.grid, lambda r, th: -q11 * np.log(r) / np.log(0.5))
    assert np.max(np.abs(h.values - exact.values)) < 1e-3
    solution = stream_function(ctx, ScalarField.zeros(ctx.grid), [1.0])
    assert solution.traces[1] + solution.offset == pytest.approx(-q11, rel=1e-3)


def test_flux_of_harmonic_measure_is_p11():
    ctx = build_context(make_grid(0.5, 64, 8))
    assert boundary_flux(ctx, ctx.zeta[0], 1) == pytest.approx(2 * np.pi / np.log(2), rel=1e-2)
    assert boundary_flux(ctx, ctx.zeta[0], 0) == pytest.approx(-2 * np.pi / np.log(2), rel=1e-2)


def test_dirichlet_solve_of_constant_on_annulus():
    a = 0.5
    ctx = build_context(make_grid(a, 64, 8))
    u = dirichlet_solve(ctx, ScalarField.constant(ctx.grid, 1.0))
    c = -(1 - a**2) / (4 * np.log(a))
    exact = ScalarField.from_function(ctx.grid, lambda r, th: (1 - r**2) / 4 + c * np.log(r))
    assert np.max(np.abs(u.values - exact.values)) < 1e-3


def test_apply_T_and_energy_of_first_bessel_mode():
    j11 = bessel_table().j11
    ctx = build_context(make_grid(0.0, 64, 16))
    v = ScalarField.from_function(ctx.grid, lambda r, th: bessel_j(1, j11 * r) * np.cos(th))
    expected = v / j11**2
    assert lp_distance(apply_T(ctx, v), expected) < 2e-3 * lp_norm(expected)
    assert energy(ctx, v) == pytest.approx(lp_norm(v) ** 2 / (2 * j11**2), rel=2e-3)


def test_inner_flux_of_stream_function_converges_at_second_order():
    gamma = 0.7
    errors = []
    for nr in (16, 32, 64):
        ctx = build_context(make_grid(0.5, nr, 16))
        v = ScalarField.from_function(ctx.grid, lambda r, th: np.exp(-2 * r**2) + r * np.cos(th))
        psi = solve_vcp(ctx, v, [gamma])
        errors.append(abs(boundary_flux(ctx, psi, 1) + gamma))
    assert errors[0] / errors[1] >= 3.5
    assert errors[1] / errors[2] >= 3.5


def test_dirichlet_solve_on_a_fine_grid_passes_the_residual_gate():
    ctx = build_context(make_grid(0.5, 96, 64))
    u = dirichlet_solve(ctx, _random_field(ctx.grid, 9))
    assert np.all(np.isfinite(u.values))
