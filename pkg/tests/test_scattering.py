import numpy as np
import pytest

from photothermal.geometry import make_curve, make_grid
from photothermal.kernels import DrudeParams
from photothermal.scattering import (ComplexField, SolverError, SourceField, SourceMoments, apply_T_omega,
                                     asymptotic_field, field_parts, leading_rhs, remainder_slope,
                                     solve_lippmann_schwinger)
from photothermal.volume import LatticeConvolution


def gauss(x):
    return np.exp(-np.sum((np.atleast_2d(x) - [0.3, -0.2]) ** 2, axis=1) / 0.32)


@pytest.fixture(scope="module")
def src(coarse_grid):
    return SourceField(coarse_grid, gauss, "gauss")


@pytest.mark.parametrize("method", ["dense", "gmres"])
def test_solution_residual(coarse_grid, src, method):
    u = solve_lippmann_schwinger(coarse_grid, src, 1e-2, method=method)
    assert u.residual <= 1e-10 and u.provenance == "full"


def test_dense_and_gmres_agree(coarse_grid, src):
    a = solve_lippmann_schwinger(coarse_grid, src, 5e-2, method="dense")
    b = solve_lippmann_schwinger(coarse_grid, src, 5e-2, method="gmres")
    assert np.max(np.abs(a.values - b.values)) <= 1e-9 * np.max(np.abs(a.values))


@pytest.mark.parametrize("method", ["dense", "gmres"])
def test_sign_flip_is_exact(coarse_grid, src, method):
    a = solve_lippmann_schwinger(coarse_grid, src, 3e-3, method=method)
    b = solve_lippmann_schwinger(coarse_grid, -src, 3e-3, method=method)
    assert np.array_equal(b.values, -a.values)
    assert np.array_equal(np.abs(a.values), np.abs(b.values))


def test_zero_source_gives_zero_field(coarse_grid):
    u = solve_lippmann_schwinger(coarse_grid, np.zeros(coarse_grid.size), 1e-2)
    assert not np.any(u.values)


def test_linearity(coarse_grid, src):
    a = solve_lippmann_schwinger(coarse_grid, src, 1e-2)
    b = solve_lippmann_schwinger(coarse_grid, src.scaled(2.5), 1e-2)
    assert np.allclose(b.values, 2.5 * a.values, rtol=1e-10, atol=0)


def test_discrete_equation_holds(coarse_grid, src):
    w = 2e-2
    d = DrudeParams()
    u = solve_lippmann_schwinger(coarse_grid, src, w, d)
    conv = LatticeConvolution(coarse_grid, w)
    from photothermal.kernels import drude_eps

    lhs = u.values - w**2 * (1 - drude_eps(d, w)) * conv(u.values)
    rhs = -1j * w * conv(src.values.astype(complex))
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * np.max(np.abs(rhs))


def test_offgrid_evaluation_matches_cells(coarse_grid, src):
    u = solve_lippmann_schwinger(coarse_grid, src, 1e-2)
    c = coarse_grid.centers[100:103] + [1e-9, 0.0]
    assert np.allclose(u(c), u.values[100:103], rtol=1e-6)


def test_asymptotic_field_close_at_low_frequency(coarse_grid, src):
    w = 1e-3
    full = solve_lippmann_schwinger(coarse_grid, src, w)
    asym = asymptotic_field(coarse_grid, src, w)
    assert np.linalg.norm(full.values - asym.values) / np.linalg.norm(full.values) <= 2e-2


def test_leading_rhs_matches_exact_rhs(coarse_grid, src):
    w = 1e-3
    exact = -1j * w * LatticeConvolution(coarse_grid, w)(src.values.astype(complex))
    approx = leading_rhs(coarse_grid, src, w)
    assert np.max(np.abs(exact - approx)) <= 1e-4 * np.max(np.abs(exact))


def test_T_omega_leading_part(coarse_grid, src):
    w = 1e-3
    d = DrudeParams()
    u = solve_lippmann_schwinger(coarse_grid, src, w, d)
    from photothermal.kernels import drude_eps

    exact = -(w**2) * (1 - drude_eps(d, w)) * LatticeConvolution(coarse_grid, w)(u.values)
    approx = apply_T_omega(coarse_grid, u, w, d).values
    assert np.max(np.abs(exact - approx)) <= 1e-2 * np.max(np.abs(exact))


def test_remainder_slope_coarse(coarse_grid):
    fit = remainder_slope(gauss, coarse_grid)
    assert 1.7 <= fit.slope <= 2.2 and not fit.flagged


def test_field_parts(coarse_grid, src):
    a = asymptotic_field(coarse_grid, src, 1e-2)
    re, im = field_parts(a)
    assert np.array_equal(re.values + 1j * im.values, a.values)
    p = np.array([[0.111, 0.222]])
    assert re(p)[0] == pytest.approx(a(p)[0].real)
    with pytest.raises(ValueError):
        field_parts(solve_lippmann_schwinger(coarse_grid, src, 1e-2))


def test_moments_constant_source(coarse_grid):
    m = SourceMoments.of(coarse_grid, np.ones(coarse_grid.size))
    assert m.T1 == pytest.approx(4 * np.pi, abs=0.05)
    assert m.area == pytest.approx(4 * np.pi, rel=1e-6)


@pytest.mark.parametrize("kwargs", [{"omega": 0.0}, {"omega": -1.0}, {"omega": 1e-2, "method": "lu"}])
def test_solver_rejects_bad_input(coarse_grid, src, kwargs):
    with pytest.raises(ValueError):
        solve_lippmann_schwinger(coarse_grid, src, **kwargs)


def test_asymptotic_rejects_high_frequency(coarse_grid, src):
    with pytest.raises(ValueError):
        asymptotic_field(coarse_grid, src, 0.5)


def test_gmres_budget_error(coarse_grid, src):
    with pytest.raises(SolverError):
        solve_lippmann_schwinger(coarse_grid, src, 1.0, DrudeParams(5.0, 0.01), method="gmres", maxiter=1, tol=1e-14)


def test_source_field_support_and_algebra(coarse_grid, src):
    assert src.support_certificate()
    assert src(np.array([[5.0, 0.0]]))[0] == 0.0
    s = src + src.scaled(-1.0)
    assert np.array_equal(s.values, np.zeros(coarse_grid.size))
    assert np.array_equal((src - src).values, np.zeros(coarse_grid.size))
    other = make_grid(make_curve("circle", {"radius": 2.0}, 64), 0.2)
    with pytest.raises(ValueError):
        src + SourceField(other, gauss)


def test_complex_field_csv(tmp_path, coarse_grid, src):
    u = solve_lippmann_schwinger(coarse_grid, src, 1e-2)
    assert isinstance(u, ComplexField)
    u.to_csv(tmp_path / "u.csv")
    lines = (tmp_path / "u.csv").read_text().splitlines()
    assert lines[0] == "x1,x2,re_u,im_u,abs2_u" and len(lines) == coarse_grid.size + 1
