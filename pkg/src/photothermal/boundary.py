"""Nyström discretisation of boundary layer potentials for the Laplacian.

The single layer uses the periodic logarithmic splitting of the kernel, with
the trigonometric product weights of Kress on the singular part, so it is
spectrally accurate on analytic curves.  The adjoint double layer
(Neumann-Poincaré operator) has a continuous kernel and is discretised by the
trapezoid rule with the curvature limit on the diagonal.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import fft, linalg

from .geometry import Curve

_TWO_PI = 2 * np.pi
COND_LIMIT = 1e12


class ConditioningError(RuntimeError):
    """A boundary system is too ill-conditioned to be solved reliably."""

    def __init__(self, message, condition):
        super().__init__(f"{message} (condition number {condition:.3e})")
        self.condition = condition


@dataclass(frozen=True, eq=False)
class BoundaryDensity:
    """Density values at the nodes of a curve."""

    curve: Curve
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.curve.n,):
            raise ValueError(f"density needs {self.curve.n} values, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    def integral(self):
        """``int_{dD} phi d sigma`` by the trapezoid rule."""
        return np.sum(self.values * self.curve.weights)


def kress_weights(n: int):
    """Matrix ``R`` with ``int ln(4 sin^2((t-s)/2)) g(s) ds ~ sum_j R_ij g(t_j)``."""
    m = n // 2
    d = 2 * np.pi * np.arange(n) / n
    k = np.arange(1, m)
    row = -(2 * np.pi / m) * (np.cos(np.outer(d, k)) / k).sum(axis=1) - (np.pi / m**2) * np.cos(m * d)
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return row[(i - j) % n]


def assemble_single_layer(curve: Curve):
    """Nyström matrix of ``S_D[phi](x) = int ln|x - y| / (2 pi) phi(y) d sigma(y)``."""
    n = curve.n
    t = curve.t
    p = curve.points
    diff = p[:, None, :] - p[None, :, :]
    dist2 = diff[..., 0] ** 2 + diff[..., 1] ** 2
    s2 = 4 * np.sin(0.5 * (t[:, None] - t[None, :])) ** 2
    off = ~np.eye(n, dtype=bool)
    L2 = np.empty((n, n))
    L2[off] = 0.5 * np.log(dist2[off] / s2[off])
    L2[~off] = np.log(curve.speed)
    R = kress_weights(n)
    return (0.5 * R + (2 * np.pi / n) * L2) * curve.speed[None, :] / _TWO_PI


def assemble_neumann_poincare(curve: Curve):
    """Nyström matrix of ``K_D*[phi](x) = int (x - y).nu_x / (2 pi |x - y|^2) phi d sigma(y)``."""
    p, nu = curve.points, curve.normals
    diff = p[:, None, :] - p[None, :, :]
    dist2 = diff[..., 0] ** 2 + diff[..., 1] ** 2
    np.fill_diagonal(dist2, 1.0)
    ker = (diff[..., 0] * nu[:, None, 0] + diff[..., 1] * nu[:, None, 1]) / (_TWO_PI * dist2)
    np.fill_diagonal(ker, curve.curvature / (4 * np.pi))
    return ker * curve.weights[None, :]


def equilibrium_density(curve: Curve, S=None):
    """Unit-mass density whose single layer is constant on the curve.

    Solves the bordered system ``S phi - c = 0``, ``int phi = 1``, which is
    uniquely solvable even when ``S`` itself is singular.  Returns the
    density and the constant value ``c`` of its single layer.
    """
    S = assemble_single_layer(curve) if S is None else S
    n = curve.n
    A = np.zeros((n + 1, n + 1))
    A[:n, :n] = S
    A[:n, n] = -1.0
    A[n, :n] = curve.weights
    rhs = np.zeros(n + 1)
    rhs[n] = 1.0
    sol = linalg.solve(A, rhs)
    return BoundaryDensity(curve, sol[:n]), float(sol[n])


def modified_single_layer(curve: Curve, S=None, phi0=None):
    """Matrix of the invertible modification of ``S_D``.

    It agrees with ``S_D`` on densities with zero integral and sends the
    equilibrium density to the constant ``-1``; a general density is split
    as ``(int phi) phi0 + (phi - (int phi) phi0)`` and the map extended
    linearly.
    """
    S = assemble_single_layer(curve) if S is None else S
    if phi0 is None:
        phi0 = equilibrium_density(curve, S)[0]
    w = curve.weights
    P = np.eye(curve.n) - np.outer(phi0.values, w)
    return S @ P - np.outer(np.ones(curve.n), w)


def modified_single_layer_inverse(curve: Curve, S=None, phi0=None):
    """Inverse of :func:`modified_single_layer`; raises on condition number above 1e12."""
    St = modified_single_layer(curve, S, phi0)
    cond = np.linalg.cond(St)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise ConditioningError("modified single layer is numerically singular", cond)
    return linalg.inv(St)


@dataclass(frozen=True, eq=False)
class BoundaryOperatorSet:
    """All dense boundary operators of one curve, assembled once."""

    curve: Curve
    S: np.ndarray = field(repr=False)
    K: np.ndarray = field(repr=False)
    phi0: BoundaryDensity = field(repr=False)
    phi0_level: float
    S_mod: np.ndarray = field(repr=False)
    S_mod_inv: np.ndarray = field(repr=False)
    cond_S: float
    cond_S_mod: float

    def solve_single_layer(self, g, route: str = "modified"):
        """Density ``psi`` with ``S_D[psi] = g`` (``route="plain"``) or ``S~[psi] = g``."""
        g = np.asarray(g)
        if route == "modified":
            return self.S_mod_inv @ g
        if route == "plain":
            if self.cond_S > COND_LIMIT:
                raise ConditioningError("single layer is singular on this curve; use the modified route",
                                        self.cond_S)
            return linalg.solve(self.S, g)
        raise ValueError("route must be 'modified' or 'plain'")

    def to_csv(self, directory):
        import os

        for name in ("S", "K", "S_mod", "S_mod_inv"):
            np.savetxt(os.path.join(directory, f"{name}.csv"), getattr(self, name), fmt="%.17g", delimiter=",")


def assemble_operators(curve: Curve) -> BoundaryOperatorSet:
    S = assemble_single_layer(curve)
    K = assemble_neumann_poincare(curve)
    phi0, level = equilibrium_density(curve, S)
    St = modified_single_layer(curve, S, phi0)
    cond_mod = np.linalg.cond(St)
    if cond_mod > COND_LIMIT:
        raise ConditioningError("modified single layer is numerically singular", cond_mod)
    return BoundaryOperatorSet(curve, S, K, phi0, level, St, linalg.inv(St),
                               float(np.linalg.cond(S)), float(cond_mod))


# --------------------------------------------------------------------------
# Off-surface evaluation
# --------------------------------------------------------------------------


def _upsample(values, m):
    """Trigonometric interpolation of periodic node values onto ``m`` equispaced nodes."""
    n = len(values)
    if m == n:
        return np.asarray(values)
    c = fft.fft(values)
    out = np.zeros(m, dtype=complex)
    h = n // 2
    out[:h] = c[:h]
    out[-h + 1:] = c[-h + 1:]
    # split the Nyquist mode symmetrically
    out[h] = 0.5 * c[h]
    out[-h] = 0.5 * c[h]
    res = fft.ifft(out) * (m / n)
    return res if np.iscomplexobj(values) else res.real


def _target_distance(curve, x, m=4096):
    tt = 2 * np.pi * np.arange(m) / m
    p = curve.position(tt)
    d = np.full(len(x), np.inf)
    for s in range(0, len(x), 512):
        xs = x[s: s + 512]
        d[s: s + 512] = np.min(np.hypot(xs[:, None, 0] - p[None, :, 0], xs[:, None, 1] - p[None, :, 1]), axis=1)
    return d


def single_layer_eval(curve: Curve, density, x, gradient: bool = False, max_nodes: int = 2**19):
    """``S_D[phi]`` (or its gradient) at points off the curve.

    The density is interpolated trigonometrically onto a finer node set so
    that the node spacing is at most a quarter of the target distance, which
    keeps the trapezoid rule accurate near the curve.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    phi = np.asarray(density.values if isinstance(density, BoundaryDensity) else density)
    dist = _target_distance(curve, x)
    if np.any(dist == 0):
        raise ValueError("target lies on the curve; use the Nyström matrix instead")
    perim = curve.perimeter()
    need = perim * curve.speed.max() / curve.speed.mean() / (dist / 4)
    levels = np.maximum(curve.n, 2 ** np.ceil(np.log2(np.maximum(need, 1)))).astype(np.int64)
    levels = np.minimum(levels, max_nodes)
    out = np.zeros((len(x), 2) if gradient else len(x), dtype=np.result_type(phi, float))
    for m in np.unique(levels):
        idx = np.nonzero(levels == m)[0]
        m = int(max(m, curve.n))
        tt = 2 * np.pi * np.arange(m) / m
        y = curve.position(tt)
        dy = curve.derivative(tt)
        wq = (2 * np.pi / m) * np.hypot(dy[:, 0], dy[:, 1])
        dens = _upsample(phi, m) * wq
        step = max(1, 4_000_000 // m)
        for s in range(0, len(idx), step):
            ii = idx[s: s + step]
            d0 = x[ii, None, 0] - y[None, :, 0]
            d1 = x[ii, None, 1] - y[None, :, 1]
            r2 = d0 * d0 + d1 * d1
            if gradient:
                out[ii, 0] = (d0 / r2) @ dens / _TWO_PI
                out[ii, 1] = (d1 / r2) @ dens / _TWO_PI
            else:
                out[ii] = (0.5 * np.log(r2)) @ dens / _TWO_PI
    return out


# --------------------------------------------------------------------------
# Identity checks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class JumpReport:
    exterior: float
    interior: float
    step: float

    @property
    def residual(self):
        return max(self.exterior, self.interior)


def jump_relation_check(curve: Curve, density, step: float = 1e-3, ops: BoundaryOperatorSet | None = None,
                        order: int = 2) -> JumpReport:
    """Compare one-sided normal derivatives of ``S_D[phi]`` with ``(+-1/2 I + K_D*)[phi]``.

    Derivatives are finite differences along the normal between the on-curve
    Nyström value and values at distance ``step`` (``order=1``) or at
    ``step`` and ``2 step`` (``order=2``).
    """
    if not 1e-4 <= step <= 1e-2:
        raise ValueError(f"step must lie in [1e-4, 1e-2], got {step}")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    phi = np.asarray(density.values if isinstance(density, BoundaryDensity) else density)
    S = ops.S if ops is not None else assemble_single_layer(curve)
    K = ops.K if ops is not None else assemble_neumann_poincare(curve)
    p, nu = curve.points, curve.normals
    on = S @ phi
    res = {}
    for sign in (1, -1):
        u1 = single_layer_eval(curve, phi, p + sign * step * nu)
        if order == 1:
            deriv = sign * (u1 - on) / step
        else:
            u2 = single_layer_eval(curve, phi, p + 2 * sign * step * nu)
            deriv = sign * (-3 * on + 4 * u1 - u2) / (2 * step)
        target = (0.5 * sign) * phi + K @ phi
        res[sign] = float(np.max(np.abs(deriv - target)))
    return JumpReport(res[1], res[-1], step)


@dataclass(frozen=True)
class Lemma41Report:
    """Residuals of the single-layer inversion identity and its mass balance."""

    identity: float
    closure: float
    c_f: float
    mass: float
    psi: np.ndarray = field(repr=False)
    T_f: np.ndarray = field(repr=False)

    @property
    def residual(self):
        return max(self.identity, self.closure)


def lemma41_check(curve: Curve, g, dg, mass, ops: BoundaryOperatorSet | None = None, route: str = "modified"):
    """Check ``(1/2 I - K_D*) S^{-1}[g] = -dg/dnu + T_f`` with ``T_f = c_f phi0 + S^{-1}[g]``.

    Parameters
    ----------
    g, dg : array
        Trace and outward normal derivative of ``N_D[f]`` at the nodes.
    mass : float
        ``int_D f``.

    Returns the pointwise residual of the identity and the closure residual
    ``|int dg/dnu - int_D f|``: integrating the identity over the curve
    kills the left side, so ``T_f`` and the flux must both carry the mass.
    """
    ops = assemble_operators(curve) if ops is None else ops
    w = curve.weights
    psi = ops.solve_single_layer(g, route)
    c_f = mass - np.sum(psi * w)
    T_f = c_f * ops.phi0.values + psi
    lhs = 0.5 * psi - ops.K @ psi
    ident = float(np.max(np.abs(lhs + dg - T_f)))
    closure = float(abs(np.sum(np.asarray(dg) * w) - mass))
    return Lemma41Report(ident, closure, float(c_f), float(mass), psi, T_f)


def write_density_csv(curve: Curve, columns: dict, path):
    """Write node-wise densities as CSV with the curve parameter and position."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        names = list(columns)
        w.writerow(["t", "x1", "x2", *names])
        for j in range(curve.n):
            row = [curve.t[j], curve.points[j, 0], curve.points[j, 1], *(columns[k][j] for k in names)]
            w.writerow([f"{v:.17g}" for v in row])
