import numpy as np
import pytest

from photothermal.boundary import (BoundaryDensity, ConditioningError, assemble_operators, jump_relation_check,
                                   kress_weights, lemma41_check, single_layer_eval, write_density_csv)
from photothermal.geometry import make_curve
from photothermal.volume import boundary_volume_potential

R = 2.0


def test_single_layer_of_constant(disk_ops):
    assert np.max(np.abs(disk_ops.S @ np.ones(256) - R * np.log(R))) < 1e-8


@pytest.mark.parametrize("m", [1, 2, 3, 7])
def test_single_layer_fourier_multiplier(disk_ops, disk, m):
    c = np.cos(m * disk.t)
    assert np.max(np.abs(disk_ops.S @ c + R / (2 * m) * c)) < 1e-8


def test_np_operator_on_disk(disk_ops, disk):
    assert np.max(np.abs(disk_ops.K @ np.ones(256) - 0.5)) < 1e-8
    # on a circle K* annihilates zero-mean densities
    assert np.max(np.abs(disk_ops.K @ np.cos(3 * disk.t))) < 1e-12


def test_gauss_identity_on_kite(kite_ops, kite):
    # int (K*[phi]) = (1/2) int phi for every phi
    w = kite.weights
    assert np.max(np.abs(w @ kite_ops.K - 0.5 * w)) < 1e-12


def test_np_spectrum_in_half_interval(kite_ops, kite):
    # K* is similar to a self-adjoint operator with spectrum in (-1/2, 1/2]
    ev = np.linalg.eigvals(kite_ops.K)
    assert np.max(np.abs(ev.imag)) < 1e-8
    assert ev.real.min() > -0.5 and ev.real.max() < 0.5 + 1e-10


def test_equilibrium_density_disk(disk_ops):
    assert np.max(np.abs(disk_ops.phi0.values - 1 / (2 * np.pi * R))) < 1e-8
    assert disk_ops.phi0.integral() == pytest.approx(1.0, abs=1e-14)
    assert disk_ops.phi0_level == pytest.approx(np.log(R) / (2 * np.pi), abs=1e-12)


def test_equilibrium_density_kite_level(kite_ops, kite):
    assert np.ptp(kite_ops.S @ kite_ops.phi0.values) < 1e-10


def test_modified_single_layer_properties(kite_ops, kite):
    w = kite.weights
    zero_mean = np.sin(2 * kite.t) - (w @ np.sin(2 * kite.t)) * kite_ops.phi0.values
    assert np.allclose(kite_ops.S_mod @ zero_mean, kite_ops.S @ zero_mean, atol=1e-12)
    assert np.allclose(kite_ops.S_mod @ kite_ops.phi0.values, -1.0, atol=1e-12)
    assert np.allclose(kite_ops.S_mod_inv @ kite_ops.S_mod, np.eye(kite.n), atol=1e-9)


def test_plain_route_fails_at_unit_radius():
    # S_D[1] = R ln R vanishes for R = 1, so S_D is singular there
    ops = assemble_operators(make_curve("circle", {"radius": 1.0}, 64))
    g = np.cos(ops.curve.t)
    with pytest.raises(ConditioningError):
        ops.solve_single_layer(g, "plain")
    psi = ops.solve_single_layer(g, "modified")
    assert np.allclose(ops.S_mod @ psi, g)


def test_routes_agree_when_S_invertible(disk_ops, disk):
    g = np.cos(disk.t)  # zero-mean data: both inverses coincide
    assert np.allclose(disk_ops.solve_single_layer(g, "plain"), disk_ops.solve_single_layer(g, "modified"), atol=1e-12)
    with pytest.raises(ValueError):
        disk_ops.solve_single_layer(g, "other")


def test_kress_weights_integrate_log_kernel():
    n = 64
    t = 2 * np.pi * np.arange(n) / n
    Rw = kress_weights(n)
    # int_0^{2 pi} ln(4 sin^2((t - s)/2)) cos(s) ds = -2 pi cos(t)
    assert np.allclose(Rw @ np.cos(t), -2 * np.pi * np.cos(t), atol=1e-12)


@pytest.mark.parametrize("x", [[0.5, 0.3], [3.0, 1.0], [0.0, -1.999]])
def test_single_layer_eval_constant_density(disk, x):
    exact = np.log(R) * R if np.hypot(*x) < R else R * np.log(np.hypot(*x))
    assert single_layer_eval(disk, np.ones(disk.n), np.array([x]))[0] == pytest.approx(exact, abs=1e-9)


def test_single_layer_eval_gradient(disk):
    x = np.array([[3.0, 4.0]])
    g = single_layer_eval(disk, np.ones(disk.n), x, gradient=True)
    assert np.allclose(g, R * x / 25.0, atol=1e-12)


def test_single_layer_eval_rejects_on_curve(disk):
    with pytest.raises(ValueError):
        single_layer_eval(disk, np.ones(disk.n), disk.points[:1])


@pytest.mark.parametrize("which", ["disk", "kite"])
def test_jump_relation(which, disk, kite, disk_ops, kite_ops):
    curve, ops = (disk, disk_ops) if which == "disk" else (kite, kite_ops)
    phi = 1 + np.cos(3 * curve.t) + 0.5 * np.sin(2 * curve.t)
    rep = jump_relation_check(curve, BoundaryDensity(curve, phi), step=1e-3, ops=ops)
    assert rep.residual <= 5e-3


def test_jump_first_order_is_coarser(kite, kite_ops):
    phi = 1 + np.cos(3 * kite.t)
    r1 = jump_relation_check(kite, phi, ops=kite_ops, order=1).residual
    r2 = jump_relation_check(kite, phi, ops=kite_ops, order=2).residual
    assert r2 < r1


@pytest.mark.parametrize("step", [1e-5, 0.1])
def test_jump_rejects_step(disk, step):
    with pytest.raises(ValueError):
        jump_relation_check(disk, np.ones(disk.n), step=step)


def bump(p, a=R, k=4):
    # zero-mean radial bump; with a = R it is a polynomial on the closed disk
    s = np.sum(p**2, axis=1) / a**2
    return np.where(s < 1, np.clip(1 - s, 0, None) ** k * (1 - (k + 2) * s), 0.0)


@pytest.mark.parametrize("name,f,mass", [
    ("one", lambda p: np.ones(len(p)), np.pi * R * R),
    ("zero-mean bump", bump, 0.0),
])
@pytest.mark.parametrize("route", ["modified", "plain"])
def test_inversion_identity_on_disk(disk, disk_ops, name, f, mass, route):
    g, dg = boundary_volume_potential(disk, f)
    rep = lemma41_check(disk, g, dg, mass, disk_ops, route=route)
    assert rep.identity <= 1e-6 and rep.closure <= 1e-6


def test_inversion_identity_detects_wrong_flux(disk, disk_ops):
    g, dg = boundary_volume_potential(disk, lambda p: np.ones(len(p)))
    assert lemma41_check(disk, g, 1.01 * dg, np.pi * R * R, disk_ops).residual > 1e-3


def test_density_shape_and_csv(tmp_path, disk):
    with pytest.raises(ValueError):
        BoundaryDensity(disk, np.ones(3))
    write_density_csv(disk, {"phi": np.ones(disk.n)}, tmp_path / "d.csv")
    assert (tmp_path / "d.csv").read_text().count("\n") == disk.n + 1


def test_operator_csv(tmp_path):
    ops = assemble_operators(make_curve("circle", {"radius": 2.0}, 16))
    ops.to_csv(tmp_path)
    assert np.loadtxt(tmp_path / "S.csv", delimiter=",").shape == (16, 16)
