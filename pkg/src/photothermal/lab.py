"""Phaseless inverse-source experiments.

Source factories and source pairs, comparisons of boundary temperature data,
the moment and boundary-trace identities behind uniqueness up to sign, a
biharmonic Green identity, the Fourier test for direction-invariant sources,
and recovery of source information from frequency sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import optimize, signal

from .geometry import (Curve, VolumeGrid, boundary_ray_rule, gauss_legendre, star_quadrature, vertical_sections,
                       vertical_tangencies)
from .heat import HeatSetup, MeasurementSet, boundary_data, boundary_measurement, _psi_operator, q_components
from .boundary import single_layer_eval
from .scattering import SourceField, SourceMoments
from .volume import discrete_laplacian, iterated_volume_potential, total_mass

_TWO_PI = 2 * np.pi

RELATIONS = ("sign-flip", "harmonic-diff", "biharmonic-diff", "direction-invariant", "generic")


# --------------------------------------------------------------------------
# Sources
# --------------------------------------------------------------------------


def _inscribed(curve: Curve, center):
    tt = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    return float(np.min(np.hypot(*(curve.position(tt) - center).T)))


def smooth_cutoff(curve: Curve, center=None, fraction: float = 0.95, power: int = 4):
    """``(1 - |x - c|^2 / a^2)_+^power`` with ``a`` a fraction of the inscribed radius about ``c``."""
    c = curve.centroid() if center is None else np.asarray(center, dtype=float)
    a = fraction * _inscribed(curve, c)

    def cut(x):
        u = np.sum((np.atleast_2d(x) - c) ** 2, axis=-1) / a**2
        return np.where(u < 1, np.clip(1 - u, 0, None) ** power, 0.0)

    return cut


HARMONIC_BASIS = (
    lambda x1, x2: np.ones_like(x1),
    lambda x1, x2: x1,
    lambda x1, x2: x2,
    lambda x1, x2: x1**2 - x2**2,
    lambda x1, x2: 2 * x1 * x2,
    lambda x1, x2: x1**3 - 3 * x1 * x2**2,
    lambda x1, x2: 3 * x1**2 * x2 - x2**3,
)


def make_source(grid: VolumeGrid, spec: dict) -> SourceField:
    """Source from a specification dictionary.

    ``kind`` is one of

    * ``constant``: ``value`` (default 1)
    * ``gaussian``: ``center``, ``width``, ``amplitude``
    * ``harmonic``: ``coeffs`` on 1, x1, x2, x1^2-x2^2, 2 x1 x2, and the two cubics
    * ``x1-profile``: ``profile`` (``gaussian`` with ``center``/``width``, or
      ``polynomial`` with ``coeffs``), a function of x1 only
    * ``zero-mean-bump``: ``center``, ``radius``, ``power``; radial
      ``(1 - s)^k (1 - (k+2) s)`` in ``s = |x-c|^2/a^2``, with zero integral

    ``cutoff: true`` multiplies by :func:`smooth_cutoff`; ``scale`` multiplies
    the result.
    """
    spec = dict(spec)
    kind = spec.get("kind")
    curve = grid.curve
    if "center" in spec and kind in ("gaussian", "zero-mean-bump"):
        c = np.asarray(spec["center"], dtype=float)
        if not curve.inside(c[None])[0]:
            raise ValueError(f"source centre {c.tolist()} lies outside the domain")
    if kind == "constant":
        val = float(spec.get("value", 1.0))

        def base(x):
            return np.full(len(np.atleast_2d(x)), val)
    elif kind == "gaussian":
        c = np.asarray(spec.get("center", (0.0, 0.0)), dtype=float)
        s = float(spec.get("width", 0.3))
        amp = float(spec.get("amplitude", 1.0))

        def base(x):
            return amp * np.exp(-np.sum((np.atleast_2d(x) - c) ** 2, axis=-1) / (2 * s * s))
    elif kind == "harmonic":
        coeffs = list(spec["coeffs"])
        if len(coeffs) > len(HARMONIC_BASIS):
            raise ValueError(f"at most {len(HARMONIC_BASIS)} harmonic coefficients")

        def base(x):
            x = np.atleast_2d(x)
            return sum(a * HARMONIC_BASIS[i](x[:, 0], x[:, 1]) for i, a in enumerate(coeffs))
    elif kind == "x1-profile":
        prof = spec.get("profile", "gaussian")
        if prof == "gaussian":
            m = float(spec.get("center", 0.0))
            s = float(spec.get("width", 0.5))

            def base(x):
                return np.exp(-((np.atleast_2d(x)[:, 0] - m) ** 2) / (2 * s * s))
        elif prof == "polynomial":
            pc = np.asarray(spec["coeffs"], dtype=float)

            def base(x):
                return P.polyval(np.atleast_2d(x)[:, 0], pc)
        else:
            raise ValueError(f"unknown x1 profile {prof!r}")
    elif kind == "zero-mean-bump":
        c = np.asarray(spec.get("center", (0.0, 0.0)), dtype=float)
        a = float(spec.get("radius", 1.0))
        k = int(spec.get("power", 4))

        def base(x):
            s = np.sum((np.atleast_2d(x) - c) ** 2, axis=-1) / a**2
            return np.where(s < 1, np.clip(1 - s, 0, None) ** k * (1 - (k + 2) * s), 0.0)
    else:
        raise ValueError(f"unknown source kind {kind!r}")

    scale = float(spec.get("scale", 1.0))
    if spec.get("cutoff", False):
        cut = smooth_cutoff(curve, spec.get("cutoff_center"))

        def sampler(x):
            return scale * base(x) * cut(x)
    else:
        def sampler(x):
            return scale * base(x)

    return SourceField(grid, sampler, spec.get("label", kind))


@dataclass(frozen=True, eq=False)
class SourcePair:
    """Two sources with a declared relation."""

    f1: SourceField
    f2: SourceField
    relation: str
    direction: tuple = (0.0, 1.0)

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError(f"relation must be one of {RELATIONS}")
        if self.f1.grid is not self.f2.grid:
            raise ValueError("pair members live on different grids")

    @property
    def grid(self):
        return self.f1.grid

    def check_relation(self, tol: float = 1e-6):
        """Verify the declared relation; returns ``(ok, residual)``."""
        g = self.grid
        if self.relation == "sign-flip":
            res = float(np.max(np.abs(self.f1.values + self.f2.values)))
            return res == 0.0, res
        if self.relation == "generic":
            return True, 0.0
        pts = _interior_points(g)
        d = lambda x: self.f1.sampler(x) - self.f2.sampler(x)  # noqa: E731
        s = lambda x: self.f1.sampler(x) + self.f2.sampler(x)  # noqa: E731
        step = 0.05
        if self.relation == "harmonic-diff":
            res = float(np.max(np.abs(discrete_laplacian(d, pts, step, order=4))))
        elif self.relation == "biharmonic-diff":
            res = float(np.max(np.abs(discrete_laplacian(lambda y: discrete_laplacian(d, y, step, 4), pts, step, 4))))
        else:
            e = np.asarray(self.direction, dtype=float)
            e = e / np.linalg.norm(e)
            dd = lambda fn: (fn(pts + step * e) - fn(pts - step * e)) / (2 * step)  # noqa: E731
            res = float(min(np.max(np.abs(dd(d))), np.max(np.abs(dd(s)))))
        return res <= tol, res


def _interior_points(grid: VolumeGrid, margin: int = 4, count: int = 200):
    h = grid.h
    off = np.array([[a, b] for a in (-margin, 0, margin) for b in (-margin, 0, margin)]) * h
    ok = np.all(grid.curve.inside(grid.centers[:, None, :] + off), axis=1)
    pts = grid.centers[ok]
    if len(pts) > count:
        pts = pts[np.linspace(0, len(pts) - 1, count).astype(int)]
    return pts


# --------------------------------------------------------------------------
# Measurement comparisons and identities
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonReport:
    max_difference: float
    per_frequency: np.ndarray = field(repr=False)
    omegas: np.ndarray = field(repr=False)


def compare_measurements(pair: SourcePair, setup: HeatSetup, omega_list, mode: str = "full",
                         data: tuple | None = None) -> ComparisonReport:
    """``max |Lambda_{f1} - Lambda_{f2}|`` over sensors and frequencies."""
    if pair.grid is not setup.grid:
        raise ValueError("pair and setup use different grids")
    if data is None:
        m1 = boundary_measurement(setup, pair.f1, omega_list, mode)
        m2 = boundary_measurement(setup, pair.f2, omega_list, mode)
    else:
        m1, m2 = data
    diff = np.abs(m1.values - m2.values)
    per = diff.max(axis=1)
    return ComparisonReport(float(per.max()), per, np.asarray(m1.omegas))


def verify_moment_identity(pair: SourcePair):
    """``| |T_1[f1]| - |T_1[f2]| |``."""
    g = pair.grid
    return float(abs(abs(total_mass(g, pair.f1.values)) - abs(total_mass(g, pair.f2.values))))


@dataclass(frozen=True)
class TraceReport:
    plus: float
    minus: float

    @property
    def residual(self):
        return min(self.plus, self.minus)

    @property
    def sign(self):
        return 1 if self.plus <= self.minus else -1


def verify_trace_identity(pair: SourcePair, curve: Curve | None = None) -> TraceReport:
    """Compare ``N_D^2[f1]`` with ``+-N_D^2[f2]`` at the curve nodes."""
    g = pair.grid
    curve = g.curve if curve is None else curve
    w1 = iterated_volume_potential(g, pair.f1.values, curve.points)
    w2 = iterated_volume_potential(g, pair.f2.values, curve.points)
    return TraceReport(float(np.max(np.abs(w1 - w2))), float(np.max(np.abs(w1 + w2))))


# --------------------------------------------------------------------------
# Polynomial test functions and the biharmonic Green identity
# --------------------------------------------------------------------------


def _pad_add(a, b):
    out = np.zeros((max(a.shape[0], b.shape[0]), max(a.shape[1], b.shape[1])))
    out[: a.shape[0], : a.shape[1]] += a
    out[: b.shape[0], : b.shape[1]] += b
    return out


@dataclass(frozen=True, eq=False)
class PolyField:
    """Bivariate polynomial ``sum c[i, j] x1^i x2^j``."""

    c: np.ndarray

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return P.polyval2d(x[:, 0], x[:, 1], self.c)

    def __add__(self, other):
        return PolyField(_pad_add(self.c, other.c))

    def __mul__(self, other):
        if isinstance(other, PolyField):
            return PolyField(signal.convolve2d(self.c, other.c))
        return PolyField(self.c * other)

    __rmul__ = __mul__

    def d(self, axis: int):
        if self.c.shape[axis] == 1:
            return PolyField(np.zeros((1, 1)))
        return PolyField(P.polyder(self.c, axis=axis))

    def lap(self):
        return PolyField(_pad_add(self.d(0).d(0).c, self.d(1).d(1).c))

    def bilap(self):
        return self.lap().lap()

    def grad(self, x):
        return np.stack([self.d(0)(x), self.d(1)(x)], axis=-1)

    def normal_derivative(self, curve: Curve):
        return np.sum(self.grad(curve.points) * curve.normals, axis=1)

    @classmethod
    def constant(cls, a: float):
        return cls(np.array([[float(a)]]))

    @classmethod
    def radial(cls, coeffs, center=(0.0, 0.0)):
        """``sum_k coeffs[k] u^k`` with ``u = |x - center|^2``."""
        cx, cy = center
        u = PolyField(np.array([[cx * cx + cy * cy, -2 * cy, 1.0], [-2 * cx, 0.0, 0.0], [1.0, 0.0, 0.0]]))
        out = PolyField(np.zeros((1, 1)))
        power = PolyField.constant(1.0)
        for a in coeffs:
            out = out + power * a
            power = power * u
        return out


def compact_bump(a: float, power: int = 8, center=(0.0, 0.0)):
    """``(1 - |x - c|^2 / a^2)^power`` as a :class:`PolyField` (valid inside the disk of radius a)."""
    from math import comb

    coeffs = [comb(power, k) * (-1.0 / a**2) ** k for k in range(power + 1)]
    return PolyField.radial(coeffs, center)


@dataclass(frozen=True)
class GreenReport:
    volume: float
    boundary: float

    @property
    def relative(self):
        scale = max(abs(self.volume), abs(self.boundary), 1e-300)
        return abs(self.volume - self.boundary) / scale


def greens_identity_check(w: PolyField, v: PolyField, curve: Curve, n_boundary: int = 512,
                          n_s: int = 48) -> GreenReport:
    """Both sides of the biharmonic Green identity on D.

    Volume: ``int_D (v Bilap w - w Bilap v)``.  Boundary: ``int_dD (v d(Lap w)
    + Lap v dw - w d(Lap v) - Lap w dv)`` with ``d`` the outward normal
    derivative.
    """
    pts, wq = star_quadrature(curve, n_t=max(256, n_boundary), n_s=n_s)
    vol = float(np.sum(wq * (v(pts) * w.bilap()(pts) - w(pts) * v.bilap()(pts))))
    c = curve.resample(n_boundary)
    lw, lv = w.lap(), v.lap()
    p = c.points
    integrand = (v(p) * lw.normal_derivative(c) + lv(p) * w.normal_derivative(c)
                 - w(p) * lv.normal_derivative(c) - lw(p) * v.normal_derivative(c))
    return GreenReport(vol, float(np.sum(integrand * c.weights)))


@dataclass(frozen=True)
class NavierReport:
    """Vanishing test for a source whose double volume potential has zero Navier data."""

    trace: float
    lap_trace: float
    exterior_leak: float
    volume_sides: np.ndarray = field(repr=False)
    boundary_sides: np.ndarray = field(repr=False)
    scale: float = 1.0

    @property
    def residual(self):
        sides = np.max(np.abs(np.concatenate([self.volume_sides, self.boundary_sides]))) / self.scale
        return float(max(self.trace, self.lap_trace, self.exterior_leak, sides))


def biharmonic_test_functions(center=(0.0, 0.0)):
    """A few biharmonic polynomials: harmonic ones and ``|x|^2`` times harmonic ones."""
    r2 = PolyField.radial([0.0, 1.0], center)
    x1 = PolyField(np.array([[0.0], [1.0]]))
    x2 = PolyField(np.array([[0.0, 1.0]]))
    h2 = PolyField(np.array([[0.0, 0.0, -1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]))
    return [PolyField.constant(1.0), x1, x2, h2, r2, r2 * x1]


def navier_vanishing_test(curve: Curve, a: float | None = None, center=None, power: int = 8,
                          tests=None, n_theta: int = 96, n_r: int = 40) -> NavierReport:
    """Green identity for ``w = N_D^2[f]`` with ``f = Bilap phi`` and ``phi`` a compact bump.

    ``N_D[f] = Lap phi`` and ``N_D^2[f] = phi`` vanish on the boundary, so
    both sides of the identity must vanish for every biharmonic ``v``.  The
    Navier data are computed by quadrature of ``f`` against the logarithmic
    and biharmonic kernels at the boundary nodes; ``exterior_leak`` checks
    that ``N_D[f]`` vanishes outside D, which makes the biharmonic kernel
    integral equal to ``N_D^2[f]``.
    """
    c = curve.centroid() if center is None else np.asarray(center, dtype=float)
    inscribed = _inscribed(curve, c)
    if a is None:
        a = inscribed if curve.kind == "circle" else 0.9 * inscribed
    if a > inscribed * (1 + 1e-9):
        raise ValueError("bump support must lie inside the domain")
    phi = compact_bump(a, power, tuple(c))
    fpoly = phi.bilap()

    def f(x):
        x = np.atleast_2d(x)
        inside = np.sum((x - c) ** 2, axis=-1) < a * a
        return np.where(inside, fpoly(x), 0.0)

    # polar rule on the support disk; exact for the polynomial source
    rs, wr = gauss_legendre(n_r, 0.0, a)
    th = 2 * np.pi * np.arange(4 * power + 8) / (4 * power + 8)
    pts = c + (rs[:, None, None] * np.stack([np.cos(th), np.sin(th)], axis=-1)[None]).reshape(-1, 2)
    wq = np.repeat(wr * rs, len(th)) * (2 * np.pi / len(th))
    fq = f(pts)
    p = curve.points
    if a > inscribed * (1 - 1e-9):
        # support touches the boundary: singular kernels need the boundary ray rule
        rule = boundary_ray_rule(curve, n_theta, n_r)
        fv = f(rule.pts.reshape(-1, 2)).reshape(rule.r.shape)
        r = rule.r
        lap_w = np.sum(rule.log_weights * fv, axis=1)
        dlap_w = np.sum(rule.flux_weights * fv, axis=1)
        w_tr = np.sum(rule.w * r * r * (np.log(r) - 1) * fv, axis=1) / (8 * np.pi)
        dw = np.sum(rule.w * -r * rule.e_dot_nu * (2 * np.log(r) - 1) * fv, axis=1) / (8 * np.pi)
    else:
        dx = p[:, None, :] - pts[None, :, :]
        r = np.hypot(dx[..., 0], dx[..., 1])
        dn = np.sum(dx * curve.normals[:, None, :], axis=-1)
        wf = wq * fq
        lap_w = np.log(r) @ wf / _TWO_PI
        dlap_w = (dn / r**2) @ wf / _TWO_PI
        w_tr = (r * r * (np.log(r) - 1)) @ wf / (8 * np.pi)
        dw = (dn * (2 * np.log(r) - 1)) @ wf / (8 * np.pi)

    ang = 2 * np.pi * np.arange(8) / 8
    ext = (1.5 * curve.circumradius()) * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    rr = np.hypot(ext[:, None, 0] - pts[None, :, 0], ext[:, None, 1] - pts[None, :, 1])
    leak = np.log(rr) @ (wq * fq) / _TWO_PI
    lap_scale = np.max(np.abs(phi.lap()(pts)))

    tests = biharmonic_test_functions(tuple(c)) if tests is None else tests
    vols, bnds, scales = [], [], []
    wts = curve.weights
    for v in tests:
        vols.append(np.sum(wq * fq * v(pts)))
        scales.append(np.sum(wq * np.abs(fq * v(pts))))
        lv = v.lap()
        bnds.append(np.sum(wts * (v(p) * dlap_w + lv(p) * dw - w_tr * lv.normal_derivative(curve)
                                  - lap_w * v.normal_derivative(curve))))
    return NavierReport(float(np.max(np.abs(w_tr))), float(np.max(np.abs(lap_w)) / lap_scale),
                        float(np.max(np.abs(leak)) / lap_scale), np.asarray(vols), np.asarray(bnds),
                        float(max(scales)))


# --------------------------------------------------------------------------
# Fourier test for direction-invariant sources
# --------------------------------------------------------------------------


def _x1_breakpoints(curve: Curve):
    """Sorted distinct ``x1`` values of the vertical tangencies of the curve."""
    out = np.sort(curve.position(vertical_tangencies(curve))[:, 0])
    keep = np.concatenate([[True], np.diff(out) > 1e-12 * max(1.0, np.ptp(out))])
    return out[keep]


@dataclass(frozen=True)
class FourierReport:
    zeta11: np.ndarray
    planar: np.ndarray
    factored: np.ndarray

    @property
    def relative(self):
        scale = np.maximum(np.abs(self.planar), 1e-300)
        return np.abs(self.planar - self.factored) / scale

    @property
    def absolute(self):
        return np.abs(self.planar - self.factored)


def fourier_direction_test(f, curve: Curve, zeta11_list=(0.5, 1.0, 2.0), zeta22_sign: int = 1,
                           n_phi: int = 128, n_s: int = 64, invariance_tol: float = 1e-8) -> FourierReport:
    """``int_D f(x) exp(i zeta . x) dx`` for ``zeta = (z, i s z)``, two ways.

    The planar route is a star-shaped polar rule.  The factored route uses
    that ``f`` depends on ``x1`` only: the ``x2`` integral over each vertical
    section is done in closed form and the remaining ``x1`` integral by
    Gauss-Legendre in the angle ``x1 = m + l cos(phi)``.  Sources that vary
    along ``x2`` are rejected.
    """
    if zeta22_sign not in (1, -1):
        raise ValueError("zeta22_sign must be +1 or -1")
    pts, wq = star_quadrature(curve, n_s=n_s)
    step = 1e-3
    fv = f(pts)
    dvar = np.abs(f(pts + [0, step]) - f(pts - [0, step])) / (2 * step)
    scale = max(np.max(np.abs(fv)), 1e-300)
    if np.max(dvar) > invariance_tol * max(scale, 1.0):
        raise ValueError(f"source varies along x2 (max derivative {np.max(dvar):.3e})")
    brk = _x1_breakpoints(curve)
    ph, wph = gauss_legendre(n_phi, 0.0, np.pi)
    mids, halves = 0.5 * (brk[1:] + brk[:-1]), 0.5 * (brk[1:] - brk[:-1])
    # cosine map per piece absorbs the square-root behaviour of section lengths at tangencies
    x1 = (mids[:, None] + halves[:, None] * np.cos(ph)[None, :]).ravel()
    jac = (halves[:, None] * (np.sin(ph) * wph)[None, :]).ravel()
    lo, hi = vertical_sections(curve, x1)
    ymid = np.where(np.isfinite(lo[:, 0]), 0.5 * (lo[:, 0] + hi[:, 0]), 0.0)
    prof = f(np.stack([x1, ymid], axis=-1))
    z11 = np.asarray(zeta11_list, dtype=float)
    planar, factored = [], []
    for z in z11:
        z22 = zeta22_sign * z
        planar.append(np.sum(wq * fv * np.exp(1j * z * pts[:, 0] - z22 * pts[:, 1])))
        if z22 != 0:
            sec = np.nansum((np.exp(-z22 * lo) - np.exp(-z22 * hi)) / z22, axis=1)
        else:
            sec = np.nansum(hi - lo, axis=1)
        factored.append(np.sum(jac * prof * np.exp(1j * z * x1) * sec))
    return FourierReport(z11, np.asarray(planar), np.asarray(factored))


# --------------------------------------------------------------------------
# Frequency-sweep fits and recovery
# --------------------------------------------------------------------------


class FitRefused(ValueError):
    """The frequency design matrix is too ill-conditioned."""


FIT_COND_LIMIT = 1e10


def frequency_basis(omegas):
    w = np.asarray(omegas, dtype=float)
    lw = np.log(w)
    return np.stack([w**2 * lw**2, w**2 * lw, w**2], axis=-1)


@dataclass(frozen=True)
class SweepFit:
    """Coefficients of ``w^2 ln^2 w``, ``w^2 ln w``, ``w^2`` per measurement point."""

    coeffs: np.ndarray = field(repr=False)
    residual: np.ndarray = field(repr=False)
    condition: float
    omegas: np.ndarray = field(repr=False)

    @property
    def c_2ln2(self):
        return self.coeffs[0]

    @property
    def c_ln(self):
        return self.coeffs[1]

    @property
    def c_0(self):
        return self.coeffs[2]


def fit_frequency_coefficients(values, omegas, offset=0.0, min_points: int = 10) -> SweepFit:
    """Least-squares fit of ``values - offset`` on the three-term frequency basis.

    ``values`` has shape (n_omega,) or (n_omega, n_points); ``offset``
    broadcasts against it (a per-point background, or the response of the
    zero source at every frequency).  Columns are
    scaled to unit norm and the system is solved through a QR factorisation.
    """
    w = np.asarray(omegas, dtype=float)
    y = np.asarray(values, dtype=float)
    squeeze = y.ndim == 1
    off = np.asarray(offset, dtype=float)
    if squeeze and off.ndim == 1:
        off = off[:, None]
    y = y.reshape(len(w), -1) - off
    if len(w) < min_points:
        raise ValueError(f"need at least {min_points} frequencies, got {len(w)}")
    A = frequency_basis(w)
    norms = np.linalg.norm(A, axis=0)
    An = A / norms
    cond = float(np.linalg.cond(An))
    if cond > FIT_COND_LIMIT:
        raise FitRefused(f"design matrix condition number {cond:.3e} exceeds {FIT_COND_LIMIT:.0e}; widen the sweep")
    Qm, Rm = np.linalg.qr(An)
    coef = np.linalg.solve(Rm, Qm.T @ y) / norms[:, None]
    res = np.linalg.norm(A @ coef - y, axis=0)
    if squeeze:
        coef, res = coef[:, 0], res[0]
    return SweepFit(coef, np.asarray(res), cond, w)


def recover_total_intensity(fit: SweepFit, calibration: SweepFit, T1_unit: float) -> float:
    """``|T_1[f]| = T_1[1] sqrt(c(f) / c(1))`` from the ``w^2 ln^2 w`` coefficients."""
    cf = np.atleast_1d(fit.c_2ln2)
    c1 = np.atleast_1d(calibration.c_2ln2)
    ratio = float(np.dot(cf, c1) / np.dot(c1, c1))
    if ratio < 0:
        raise ValueError(f"negative coefficient ratio {ratio:.3e}; the fit failed")
    return abs(T1_unit) * np.sqrt(ratio)


# --------------------------------------------------------------------------
# Parametric reconstruction
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuadraticModel:
    """Asymptotic sensor data as a quadratic form in source coefficients.

    ``data(c)[k, i] = base[k, i] + sum_{a,b} c_a c_b M[k, a, b, i]``.
    """

    omegas: np.ndarray = field(repr=False)
    base: np.ndarray = field(repr=False)
    M: np.ndarray = field(repr=False)

    def __call__(self, c):
        c = np.asarray(c, dtype=float)
        return self.base + np.einsum("kabi,a,b->ki", self.M, c, c)

    def jacobian(self, c):
        c = np.asarray(c, dtype=float)
        return 2 * np.einsum("kabi,b->kia", self.M, c)


def quadratic_model(setup: HeatSetup, atoms, omegas, literal: bool = True) -> QuadraticModel:
    """Build the asymptotic measurement map for sources ``sum c_a atoms[a]``."""
    grid, curve, mat = setup.grid, setup.curve, setup.material
    omegas = np.asarray(omegas, dtype=float)
    BS, BN = _psi_operator(setup.ops, mat)
    pts = setup.points
    vals = [a.values if isinstance(a, SourceField) else np.asarray(a) for a in atoms]
    mom = [SourceMoments.of(grid, v) for v in vals]
    K = len(vals)

    def sensor(Q):
        NQ, dNQ = boundary_data(grid, curve, Q)
        dens = BS @ NQ + BN @ (mat.gamma_c * dNQ)
        return single_layer_eval(curve, dens, pts)

    # Q components are symmetric bilinear forms in the source; polarise them
    resp = np.zeros((3, K, K, len(pts)))
    for a in range(K):
        for b in range(a, K):
            if a == b:
                comps = q_components(mom[a], setup.drude, mat)
            else:
                plus = SourceMoments(mom[a].T1 + mom[b].T1, mom[a].ND, mom[a].area)
                nd_plus = mom[a].ND.values + mom[b].ND.values
                qp = q_components(plus, setup.drude, mat, nd_plus)
                qa = q_components(mom[a], setup.drude, mat)
                qb = q_components(mom[b], setup.drude, mat)
                comps = tuple(0.5 * (x - y - z) for x, y, z in zip(qp, qa, qb))
            for i, Qi in enumerate(comps):
                Qi = np.full(grid.size, Qi) if np.ndim(Qi) == 0 else Qi
                resp[i, a, b] = sensor(Qi)
                resp[i, b, a] = resp[i, a, b]
    lw = np.log(omegas)
    scal = np.stack([omegas**2 * lw**2, omegas**2 * lw, omegas**2], axis=-1)
    M = np.einsum("kj,jabi->kabi", scal, resp)
    Vb = setup.background(pts)
    A = BS @ setup.background(curve.points) + BN @ setup.background.normal_derivative(curve)
    base0 = Vb - single_layer_eval(curve, A, pts)
    base = (omegas**2 if literal else np.ones_like(omegas))[:, None] * base0[None, :]
    return QuadraticModel(omegas, base, M)


@dataclass(frozen=True)
class ParametricResult:
    coefficients: np.ndarray
    mirror: np.ndarray
    misfit: float
    mirror_misfit: float
    converged: bool
    starts: int


def reconstruct_parametric(observed, model: QuadraticModel, n_starts: int = 8, seed: int = 0,
                           max_nfev: int = 2000) -> ParametricResult:
    """Nonlinear least squares for the atom coefficients, up to a global sign.

    Residuals are weighted per frequency by the inverse of the largest
    source-induced signal so every frequency contributes comparably.  Returns
    the best minimiser over seeded multistarts together with its mirror.
    """
    obs = observed.values if isinstance(observed, MeasurementSet) else np.asarray(observed)
    wts = 1.0 / np.maximum(np.max(np.abs(obs - model.base), axis=1), 1e-300)
    K = model.M.shape[1]
    rng = np.random.default_rng(seed)

    def resid(c):
        return ((model(c) - obs) * wts[:, None]).ravel()

    def jac(c):
        return (model.jacobian(c) * wts[:, None, None]).reshape(-1, K)

    best = None
    for _ in range(n_starts):
        x0 = rng.normal(size=K)
        sol = optimize.least_squares(resid, x0, jac=jac, method="lm", max_nfev=max_nfev, xtol=1e-14, ftol=1e-14)
        if best is None or sol.cost < best.cost:
            best = sol
    c = best.x
    if c[np.argmax(np.abs(c))] < 0:
        c = -c
    mis = float(np.linalg.norm(model(c) - obs))
    mis_m = float(np.linalg.norm(model(-c) - obs))
    return ParametricResult(c, -c, mis, mis_m, bool(best.success), n_starts)
