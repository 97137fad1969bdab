import json
from pathlib import Path

import numpy as np
import pytest

from vorstab.bessel import bessel_table
from vorstab.elliptic import build_context
from vorstab.errors import ConfigError, GridError
from vorstab.grid import ScalarField, inner, make_grid
from vorstab.spectra import (
    SpectraConfig,
    cap_spectrum,
    cluster_tolerance,
    constrained_spectrum,
    dirichlet_modes,
    dirichlet_spectrum,
    lambda_cap1,
    rayleigh_check,
    stability_margin,
)


def _disk(nr: int = 32, ntheta: int = 32):
    return build_context(make_grid(0.0, nr, ntheta))


def test_disk_dirichlet_spectrum_matches_bessel_zeros():
    table = bessel_table()
    result = dirichlet_spectrum(_disk(), 2)
    assert result.eigenvalues[0] == pytest.approx(table.j01**2, rel=1e-2)
    assert result.eigenvalues[1] == pytest.approx(table.j11**2, rel=1e-2)
    assert result.multiplicities == [1, 2]


def test_disk_constrained_spectrum_has_triple_first_eigenvalue():
    table = bessel_table()
    result = constrained_spectrum(_disk(), 1)
    assert result.first == pytest.approx(table.j11**2, rel=1e-2)
    assert result.multiplicities == [3]
    assert sorted(label.split(",")[0] for label in result.modes[0]) == ["m=0", "m=1", "m=1"]
    assert result.symmetry_defect < 1e-10


def test_disk_cap_spectrum_is_first_dirichlet_value():
    ctx = _disk()
    assert cap_spectrum(ctx, 1).first == pytest.approx(bessel_table().j01 ** 2, rel=1e-2)
    assert lambda_cap1(ctx) == pytest.approx(dirichlet_spectrum(ctx, 1).first)


def test_eigenfields_are_orthonormal():
    result = constrained_spectrum(_disk(16, 16), 2)
    fields = [f for group in result.eigenfields for f in group]
    gram = np.array([[inner(f, g) for g in fields] for f in fields])
    assert np.allclose(gram, np.eye(len(fields)), atol=1e-10)


@pytest.mark.parametrize("nr", [16, 24, 32])
@pytest.mark.parametrize("a", [0.0, 0.5])
def test_stability_margin_is_positive(a, nr):
    ctx = build_context(make_grid(a, nr, 16))
    assert constrained_spectrum(ctx, 1).first > lambda_cap1(ctx)
    assert stability_margin(ctx) > 0


def test_dirichlet_eigenvalues_converge_at_second_order():
    table = bessel_table()
    errors = []
    for nr in (16, 32, 64):
        values = dirichlet_spectrum(_disk(nr, 16), 2).eigenvalues
        errors.append([abs(values[0] - table.j01**2), abs(values[1] - table.j11**2)])
    errors = np.array(errors)
    assert np.all(errors[:-1] / errors[1:] >= 3.0)


def test_constrained_first_eigenvalue_on_a_fine_disk():
    first = constrained_spectrum(_disk(64, 16), 1).first
    assert first == pytest.approx(bessel_table().j11**2, rel=1e-2)


def test_dirichlet_modes_validate_arguments():
    ctx = _disk(8, 8)
    values, profiles = dirichlet_modes(ctx, 1, 3)
    assert values.shape == (3,)
    assert profiles.shape == (8, 3)
    assert np.all(np.diff(values) > 0)
    with pytest.raises(GridError):
        dirichlet_modes(ctx, 5, 1)
    with pytest.raises(GridError):
        dirichlet_modes(ctx, 0, 0)


def test_cluster_tolerance_scales_with_resolution():
    config = SpectraConfig()
    coarse = cluster_tolerance(make_grid(0.0, 8, 8), 10.0, config)
    fine = cluster_tolerance(make_grid(0.0, 16, 8), 10.0, config)
    assert coarse == pytest.approx(4 * fine)
    assert cluster_tolerance(make_grid(0.0, 8, 8), 0.0, config) == config.cluster_rtol


def test_spectra_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        SpectraConfig.from_dict({"cluster_tol": 1.0})


def test_rayleigh_equality_for_constrained_eigenfields():
    ctx = _disk(24, 16)
    result = constrained_spectrum(ctx, 1)
    for u in result.eigenfields[0]:
        for which in ("X", "Y"):
            report = rayleigh_check(ctx, u, which, result.first)
            assert report.member, report.violations
            assert report.equality


def test_rayleigh_rejects_non_mean_zero_field():
    ctx = _disk(16, 16)
    radial = dirichlet_spectrum(ctx, 1).eigenfields[0][0]
    report = rayleigh_check(ctx, radial, "X")
    assert not report.member
    assert any("mean" in v for v in report.violations)
    assert report.lhs is None


def test_rayleigh_strict_for_higher_mode():
    ctx = _disk(24, 16)
    lambda1 = constrained_spectrum(ctx, 1).first
    u = ScalarField.from_function(
        ctx.grid, lambda r, th: r**2 * (1 - r) ** 2 * np.cos(2 * th)
    )
    report = rayleigh_check(ctx, u, "X", lambda1)
    assert report.member
    assert report.lhs < report.rhs
    assert not report.equality


def test_rayleigh_unknown_inequality():
    ctx = _disk(8, 8)
    with pytest.raises(GridError):
        rayleigh_check(ctx, ScalarField.zeros(ctx.grid), "Z", 1.0)


def test_eigen_result_save(tmp_path: Path):
    result = dirichlet_spectrum(_disk(8, 8), 2)
    paths = result.save(tmp_path)
    payload = json.loads((tmp_path / "eigen.json").read_text())
    assert payload["multiplicities"] == result.multiplicities
    assert payload["field_files"][1] == ["eig_1_0.csv", "eig_1_1.csv"]
    assert all(p.exists() for p in paths)
