"""Low-frequency TM scattering: Lippmann-Schwinger solves and asymptotic fields.

The electric field solves

    u - w^2 (1 - eps) K_w[u] = -i w K_w[f]   in D,

where ``K_w`` is the volume potential of the outgoing Helmholtz kernel at
wavenumber ``w`` (unit background permittivity) restricted to D.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import LinearOperator, gmres

from .geometry import VolumeGrid
from .kernels import N_CONST, DrudeParams, drude_eps, helmholtz_smooth_part
from .volume import (LatticeConvolution, VolumeField, _direct_sum, cell_offset_kernel, sample,
                     total_mass, volume_potential)

DENSE_LIMIT = 4096
ASYMPTOTIC_MAX_OMEGA = 0.1


class SolverError(RuntimeError):
    """An iterative solve failed to reach its tolerance."""


@dataclass(frozen=True, eq=False)
class SourceField:
    """Internal source: analytic sampler plus cell samples on a grid.

    Samples are taken only at cell centres inside D, so the discrete source
    is supported in D by construction.
    """

    grid: VolumeGrid
    sampler: Callable = field(repr=False)
    label: str = "source"
    values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        vals = np.asarray(self.sampler(self.grid.centers), dtype=float)
        if vals.shape != (self.grid.size,):
            raise ValueError("sampler must return one value per point")
        object.__setattr__(self, "values", vals)

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.where(self.grid.curve.inside(x), self.sampler(x), 0.0)

    def support_certificate(self):
        """True when every nonzero sample sits at a centre inside the curve."""
        nz = self.values != 0
        return bool(np.all(self.grid.curve.inside(self.grid.centers[nz])))

    def scaled(self, a: float, label: str | None = None):
        s = self.sampler
        return SourceField(self.grid, lambda x: a * s(x), label or f"{a:g}*{self.label}")

    def __neg__(self):
        s = self.sampler
        return SourceField(self.grid, lambda x: -s(x), f"-{self.label}")

    def __add__(self, other):
        if other.grid is not self.grid:
            raise ValueError("sources live on different grids")
        a, b = self.sampler, other.sampler
        return SourceField(self.grid, lambda x: a(x) + b(x), f"{self.label}+{other.label}")

    def __sub__(self, other):
        return self + (-other)


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex field on a grid with frequency and provenance."""

    grid: VolumeGrid
    values: np.ndarray = field(repr=False)
    omega: float
    provenance: str
    evaluator: Callable | None = field(default=None, repr=False)
    residual: float = 0.0
    iterations: int = 0

    def evaluate(self, x):
        return VolumeField(self.grid, self.values, self.evaluator).evaluate(x)

    def __call__(self, x):
        return self.evaluate(x)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "x2", "re_u", "im_u", "abs2_u"])
            for (a, b), v in zip(self.grid.centers, self.values):
                w.writerow([f"{a:.17g}", f"{b:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}", f"{abs(v) ** 2:.17g}"])


def _source_values(grid, f):
    if isinstance(f, SourceField):
        if f.grid is not grid:
            raise ValueError("source lives on a different grid")
        return f.values
    return np.asarray(sample(grid, f), dtype=float)


def _dense_operator(grid: VolumeGrid, k: float):
    """Dense matrix of the corrected Helmholtz volume operator (cell weights included)."""
    idx = grid.index
    di = np.abs(idx[:, None, 0] - idx[None, :, 0])
    dj = np.abs(idx[:, None, 1] - idx[None, :, 1])
    # the kernel depends on the lattice offset only, and is even in each component
    ti, tj = np.meshgrid(np.arange(di.max() + 1), np.arange(dj.max() + 1), indexing="ij")
    table = cell_offset_kernel(grid.h, ti, tj) + grid.h**2 * helmholtz_smooth_part(grid.h * np.hypot(ti, tj), k)
    return table[di, dj] * (grid.areas / grid.h**2)[None, :]


def solve_lippmann_schwinger(grid: VolumeGrid, f, omega: float, drude: DrudeParams = DrudeParams(),
                             tol: float = 1e-10, method: str = "auto", maxiter: int = 200) -> ComplexField:
    """Full-wave field ``u`` at the cell centres.

    ``method`` is ``"dense"`` (LU), ``"gmres"`` (FFT matvec) or ``"auto"``
    (dense up to 4096 cells).  The returned field carries the relative
    residual of the discrete equation, checked with the FFT operator.
    """
    if not omega > 0:
        raise ValueError("omega must be positive")
    if method not in ("auto", "dense", "gmres"):
        raise ValueError("method must be 'auto', 'dense' or 'gmres'")
    fv = _source_values(grid, f)
    k = float(omega)
    contrast = omega**2 * (1.0 - drude_eps(drude, omega))
    conv = LatticeConvolution(grid, k)
    rhs = -1j * omega * conv(fv.astype(complex))

    def matvec(v):
        return v - contrast * conv(v)

    iters = 0
    if not np.any(rhs):
        u = np.zeros(grid.size, dtype=complex)
    elif method == "dense" or (method == "auto" and grid.size <= DENSE_LIMIT):
        A = np.eye(grid.size, dtype=complex) - contrast * _dense_operator(grid, k)
        u = linalg.solve(A, rhs)
    else:
        op = LinearOperator((grid.size, grid.size), matvec=matvec, dtype=complex)
        count = [0]

        def cb(_):
            count[0] += 1

        u, info = gmres(op, rhs, rtol=tol * 0.1, atol=0.0, restart=50, maxiter=maxiter,
                        callback=cb, callback_type="pr_norm")
        iters = count[0]
        if info != 0:
            res = np.linalg.norm(matvec(u) - rhs) / np.linalg.norm(rhs)
            raise SolverError(f"GMRES did not converge after {iters} iterations, relative residual {res:.3e}")
    nrm = np.linalg.norm(rhs)
    res = float(np.linalg.norm(matvec(u) - rhs) / nrm) if nrm > 0 else 0.0
    if res > tol:
        raise SolverError(f"relative residual {res:.3e} exceeds tolerance {tol:.1e} after {iters} iterations")

    def evaluator(x):
        return contrast * _direct_sum(grid, u, x, k=k) - 1j * omega * _direct_sum(grid, fv.astype(complex), x, k=k)

    return ComplexField(grid, u, float(omega), "full", evaluator, res, iters)


def _check_low_omega(omega):
    if not 0 < omega <= ASYMPTOTIC_MAX_OMEGA:
        raise ValueError(f"asymptotic formulas need 0 < omega <= {ASYMPTOTIC_MAX_OMEGA}, got {omega}")


@dataclass(frozen=True, eq=False)
class SourceMoments:
    """``T_1[f]``, ``N_D[f]`` and ``|D|`` shared by all asymptotic formulas."""

    T1: float
    ND: VolumeField = field(repr=False)
    area: float

    @classmethod
    def of(cls, grid: VolumeGrid, f):
        fv = _source_values(grid, f)
        return cls(float(total_mass(grid, fv)), volume_potential(grid, fv), grid.total_area())


def _asym_values(m: SourceMoments, nd, omega, drude):
    lw = np.log(omega)
    wp2, tau = drude.omega_p**2, drude.tau
    return (-omega * lw * (1j / (2 * np.pi)) * m.T1
            - omega * ((0.25 + 1j * N_CONST) * m.T1 + 1j * nd)
            - omega**2 * lw**2 * (wp2 / (4 * np.pi**2 * tau)) * m.area * m.T1)


def asymptotic_field(grid: VolumeGrid, f, omega: float, drude: DrudeParams = DrudeParams(),
                     moments: SourceMoments | None = None) -> ComplexField:
    """Low-frequency approximation of ``u`` through order ``w^2 ln^2 w``."""
    _check_low_omega(omega)
    m = moments or SourceMoments.of(grid, f)
    vals = _asym_values(m, m.ND.values, omega, drude)
    return ComplexField(grid, vals, float(omega), "asymptotic",
                        lambda x: _asym_values(m, m.ND.evaluate(x), omega, drude))


def field_parts(field_: ComplexField):
    """Real and imaginary parts of an asymptotic field as real VolumeFields."""
    if field_.provenance != "asymptotic":
        raise ValueError("field_parts expects an asymptotic field")
    ev = field_.evaluator
    re = VolumeField(field_.grid, field_.values.real, (lambda x: ev(x).real) if ev else None, "Re u")
    im = VolumeField(field_.grid, field_.values.imag, (lambda x: ev(x).imag) if ev else None, "Im u")
    return re, im


def apply_T_omega(grid: VolumeGrid, u, omega: float, drude: DrudeParams = DrudeParams()):
    """Leading part of ``-w^2 (1 - eps) K_w`` applied to a grid field ``u``."""
    _check_low_omega(omega)
    uv = np.asarray(u.values if hasattr(u, "values") else u)
    wp2, tau = drude.omega_p**2, drude.tau
    T1 = total_mass(grid, uv)
    nd = volume_potential(grid, uv)
    out = (omega * np.log(omega) * (1j * wp2 / (2 * np.pi * tau)) * T1
           + omega * ((1j * wp2 / tau) * nd.values + (1j * wp2 / tau) * (N_CONST - 0.25j) * T1))
    return ComplexField(grid, out, float(omega), "T_omega")


def leading_rhs(grid: VolumeGrid, f, omega: float, moments: SourceMoments | None = None):
    """Low-frequency expansion of ``-i w K_w[f]`` through order ``w``."""
    m = moments or SourceMoments.of(grid, f)
    return (-omega * np.log(omega) * (1j / (2 * np.pi)) * m.T1
            - omega * ((0.25 + 1j * N_CONST) * m.T1 + 1j * m.ND.values))


@dataclass(frozen=True)
class RemainderFit:
    slope: float
    omegas: np.ndarray = field(repr=False)
    errors: np.ndarray = field(repr=False)
    flagged: bool


def remainder_slope(f, grid: VolumeGrid, drude: DrudeParams = DrudeParams(), omega_list=None,
                    method: str = "auto") -> RemainderFit:
    """Log-log slope of ``max |u_full - u_asym|`` against ``w``.

    Slopes outside [1.5, 2.5] are flagged as a regression.
    """
    omegas = np.logspace(-3, -2, 6) if omega_list is None else np.asarray(omega_list, dtype=float)
    if len(omegas) < 5:
        raise ValueError("need at least 5 frequencies")
    m = SourceMoments.of(grid, f)
    fv = _source_values(grid, f)
    errs = []
    for w in omegas:
        full = solve_lippmann_schwinger(grid, fv, w, drude, method=method)
        asym = asymptotic_field(grid, fv, w, drude, moments=m)
        errs.append(np.max(np.abs(full.values - asym.values)))
    errs = np.asarray(errs)
    if not np.all(errs > 0):
        raise ValueError("remainder vanishes identically; slope undefined")
    slope = float(np.polyfit(np.log(omegas), np.log(errs), 1)[0])
    return RemainderFit(slope, omegas, errs, not 1.5 <= slope <= 2.5)
