"""Steady heat transmission driven by absorbed electromagnetic power.

The temperature is written as ``V + S_D[psi]`` outside D and
``S_D[phi] + N_D[Q]`` inside, with ``Q = w Im(eps) |u|^2 / (2 pi gamma_c)``.
Continuity of temperature and of the conductivity-weighted flux gives a
2x2 block system for ``(psi, phi)`` that is solved either directly or through
the explicit block inverse built from ``(lambda I - K_D*)^{-1}``.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg

from .boundary import (COND_LIMIT, BoundaryOperatorSet, ConditioningError, assemble_operators,
                       single_layer_eval)
from .geometry import Curve, VolumeGrid
from .kernels import N_CONST, DrudeParams, drude_eps
from .scattering import (ComplexField, SourceMoments, _source_values, solve_lippmann_schwinger)
from .volume import sample, volume_potential, volume_potential_gradient

_TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class HeatMaterial:
    """Interior conductivity relative to the unit background."""

    gamma_c: float = 2.0

    def __post_init__(self):
        if not self.gamma_c > 0 or self.gamma_c == 1:
            raise ValueError(f"gamma_c must be positive and different from 1, got {self.gamma_c}")

    @property
    def lam(self):
        return (self.gamma_c + 1) / (2 * (self.gamma_c - 1))


@dataclass(frozen=True)
class BackgroundField:
    """Harmonic background ``a0 + a1 x1 + a2 x2 + b1 (x1^2 - x2^2) + b2 x1 x2``."""

    a0: float = 1.0
    a1: float = 0.1
    a2: float = 0.0
    b1: float = 0.0
    b2: float = 0.0

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        x1, x2 = x[:, 0], x[:, 1]
        return self.a0 + self.a1 * x1 + self.a2 * x2 + self.b1 * (x1 * x1 - x2 * x2) + self.b2 * x1 * x2

    def gradient(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        x1, x2 = x[:, 0], x[:, 1]
        return np.stack([self.a1 + 2 * self.b1 * x1 + self.b2 * x2,
                         self.a2 - 2 * self.b1 * x2 + self.b2 * x1], axis=-1)

    def normal_derivative(self, curve: Curve):
        return np.sum(self.gradient(curve.points) * curve.normals, axis=1)

    def is_zero(self):
        return not any((self.a0, self.a1, self.a2, self.b1, self.b2))


ZERO_BACKGROUND = BackgroundField(0.0, 0.0, 0.0, 0.0, 0.0)


# --------------------------------------------------------------------------
# Heat sources
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HeatSourceTerms:
    """Absorbed power ``Q`` and, in asymptotic mode, its frequency components.

    ``Q = w^2 ln^2 w Q1 + w^2 ln w Q2 + w^2 Q3`` with ``Q1`` constant.
    """

    grid: VolumeGrid
    omega: float
    mode: str
    Q: np.ndarray = field(repr=False)
    Q1: float | None = None
    Q2: np.ndarray | None = field(default=None, repr=False)
    Q3: np.ndarray | None = field(default=None, repr=False)

    def reassemble(self):
        w = self.omega
        lw = np.log(w)
        return w**2 * lw**2 * self.Q1 + w**2 * lw * self.Q2 + w**2 * self.Q3


def absorbed_power(u, omega, drude: DrudeParams, material: HeatMaterial):
    """``w Im(eps) |u|^2 / (2 pi gamma_c)`` for field values ``u``."""
    return omega * drude_eps(drude, omega).imag * np.abs(u) ** 2 / (_TWO_PI * material.gamma_c)


def q_components(moments: SourceMoments, drude: DrudeParams, material: HeatMaterial, nd=None):
    """``(Q1, Q2, Q3)`` from ``T_1[f]`` and ``N_D[f]`` (at the cell centres by default)."""
    T1 = moments.T1
    nd = moments.ND.values if nd is None else nd
    base = drude.omega_p**2 / (material.gamma_c * drude.tau)
    Q1 = base / (8 * np.pi**3) * T1**2
    Q2 = base / (2 * np.pi**2) * (T1 * nd + N_CONST * T1**2)
    Q3 = base / _TWO_PI * (nd**2 + (N_CONST**2 + 1 / 16) * T1**2 + 2 * N_CONST * T1 * nd)
    return Q1, Q2, Q3


def compute_Q(grid: VolumeGrid, source, omega: float, drude: DrudeParams = DrudeParams(),
              material: HeatMaterial = HeatMaterial(), mode: str = "exact") -> HeatSourceTerms:
    """Heat source from a full-wave field (``mode="exact"``) or from ``f`` (``"asymptotic"``).

    In exact mode ``source`` is a :class:`ComplexField` or the source ``f``
    (then the field is solved first).  In asymptotic mode ``source`` is
    ``f`` or precomputed :class:`SourceMoments`.
    """
    if mode == "exact":
        u = source if isinstance(source, ComplexField) else solve_lippmann_schwinger(grid, source, omega, drude)
        return HeatSourceTerms(grid, float(omega), mode, absorbed_power(u.values, omega, drude, material))
    if mode == "asymptotic":
        m = source if isinstance(source, SourceMoments) else SourceMoments.of(grid, source)
        Q1, Q2, Q3 = q_components(m, drude, material)
        terms = HeatSourceTerms(grid, float(omega), mode, np.zeros(grid.size), Q1, Q2, Q3)
        object.__setattr__(terms, "Q", terms.reassemble())
        return terms
    raise ValueError("mode must be 'exact' or 'asymptotic'")


# --------------------------------------------------------------------------
# Density solves
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HeatSolution:
    """Layer densities and the data needed to evaluate the temperature."""

    ops: BoundaryOperatorSet
    grid: VolumeGrid
    material: HeatMaterial
    background: BackgroundField
    psi: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    Q: np.ndarray = field(repr=False)
    NQ: np.ndarray = field(repr=False)
    dNQ: np.ndarray = field(repr=False)
    residual: float = 0.0
    condition: float = 0.0
    route: str = "direct"

    @property
    def curve(self):
        return self.ops.curve

    def exterior(self, x):
        """``V + S_D[psi]`` at points off the closed domain."""
        return self.background(x) + single_layer_eval(self.curve, self.psi, x)

    def interior(self, x):
        """``S_D[phi] + N_D[Q]`` at points inside D."""
        return single_layer_eval(self.curve, self.phi, x) + volume_potential(self.grid, self.Q, x)


def boundary_data(grid: VolumeGrid, curve: Curve, Q):
    """``N_D[Q]`` and its outward normal derivative at the curve nodes."""
    q = sample(grid, Q)
    if not np.any(q):
        return np.zeros(curve.n), np.zeros(curve.n)
    NQ = volume_potential(grid, q, curve.points)
    dNQ = np.sum(volume_potential_gradient(grid, q, curve.points) * curve.normals, axis=1)
    return NQ, dNQ


def block_matrix(ops: BoundaryOperatorSet, material: HeatMaterial):
    n = ops.curve.n
    I = np.eye(n)
    g = material.gamma_c
    return np.block([[ops.S, -ops.S], [0.5 * I + ops.K, -g * (-0.5 * I + ops.K)]])


def block_inverse(ops: BoundaryOperatorSet, material: HeatMaterial):
    """Explicit inverse of the block operator through ``(lambda I - K*)^{-1}``."""
    if ops.cond_S > COND_LIMIT:
        raise ConditioningError("single layer is singular; the explicit block inverse needs S_D^{-1}", ops.cond_S)
    n = ops.curve.n
    I = np.eye(n)
    g = material.gamma_c
    R = linalg.inv(material.lam * I - ops.K)
    Sinv = linalg.inv(ops.S)
    top = np.hstack([g * R @ (0.5 * I - ops.K) @ Sinv, R])
    bot = np.hstack([-R @ (0.5 * I + ops.K) @ Sinv, R])
    return np.vstack([top, bot]) / (g - 1)


def solve_heat_densities(ops: BoundaryOperatorSet, grid: VolumeGrid, Q, background: BackgroundField,
                         material: HeatMaterial, route: str = "direct", NQ=None, dNQ=None) -> HeatSolution:
    """Densities ``(psi, phi)`` of the transmission problem.

    ``route`` is ``"direct"`` (LU of the block matrix) or ``"lemma23"``
    (explicit block inverse).  The residual of the block equations is
    returned relative to the right-hand side.
    """
    curve = ops.curve
    q = np.asarray(sample(grid, Q), dtype=float)
    if NQ is None or dNQ is None:
        NQ, dNQ = boundary_data(grid, curve, q)
    Vb = background(curve.points)
    dV = background.normal_derivative(curve)
    rhs = np.concatenate([NQ - Vb, material.gamma_c * dNQ - dV])
    A = block_matrix(ops, material)
    cond = float(np.linalg.cond(A))
    if route == "direct":
        if cond > COND_LIMIT:
            raise ConditioningError("heat block system is ill-conditioned", cond)
        sol = linalg.solve(A, rhs)
    elif route == "lemma23":
        sol = block_inverse(ops, material) @ rhs
    else:
        raise ValueError("route must be 'direct' or 'lemma23'")
    nrm = np.linalg.norm(rhs)
    res = float(np.max(np.abs(A @ sol - rhs)) / max(np.max(np.abs(rhs)), 1e-300)) if nrm > 0 else 0.0
    n = curve.n
    return HeatSolution(ops, grid, material, background, sol[:n], sol[n:], q, NQ, dNQ, res, cond, route)


def temperature_field(sol: HeatSolution, x):
    """Temperature at points ``x``; points in D use the interior representation."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    inside = sol.curve.inside(x)
    out = np.empty(len(x))
    if np.any(inside):
        out[inside] = sol.interior(x[inside])
    if np.any(~inside):
        out[~inside] = sol.exterior(x[~inside])
    return out


@dataclass(frozen=True)
class TransmissionReport:
    continuity: float
    flux: float


def transmission_check(sol: HeatSolution, step: float = 1e-3) -> TransmissionReport:
    """Trace and flux mismatches across the curve.

    Traces use the on-curve Nyström values.  Normal derivatives of the layer
    potentials are second-order one-sided differences at distance ``step``;
    the normal derivative of ``N_D[Q]`` comes from the gradient quadrature.
    """
    c = sol.curve
    ops = sol.ops
    p, nu = c.points, c.normals
    trace_out = sol.background(p) + ops.S @ sol.psi
    trace_in = ops.S @ sol.phi + sol.NQ
    cont = float(np.max(np.abs(trace_out - trace_in)))

    def one_sided(dens, sign):
        on = ops.S @ dens
        u1 = single_layer_eval(c, dens, p + sign * step * nu)
        u2 = single_layer_eval(c, dens, p + 2 * sign * step * nu)
        return sign * (-3 * on + 4 * u1 - u2) / (2 * step)

    flux_out = sol.background.normal_derivative(c) + one_sided(sol.psi, 1)
    flux_in = one_sided(sol.phi, -1) + sol.dNQ
    flux = float(np.max(np.abs(flux_out - sol.material.gamma_c * flux_in)))
    return TransmissionReport(cont, flux)


@dataclass(frozen=True)
class DecayReport:
    radii: np.ndarray
    remainder: np.ndarray
    monopole: float

    @property
    def ratios(self):
        return self.remainder[1:] / self.remainder[:-1]


def decay_check(sol: HeatSolution, radii=(10.0, 20.0, 40.0), angle: float = 0.3) -> DecayReport:
    """``v - V - (int psi / 2 pi) ln|x|`` along a ray, with the monopole ``int psi``."""
    radii = np.asarray(radii, dtype=float)
    x = radii[:, None] * np.array([np.cos(angle), np.sin(angle)])
    mono = float(np.sum(sol.psi * sol.curve.weights))
    rem = sol.exterior(x) - sol.background(x) - mono / _TWO_PI * np.log(radii)
    return DecayReport(radii, np.abs(rem), mono)


# --------------------------------------------------------------------------
# Boundary measurements
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class HeatSetup:
    """Everything frequency-independent in a measurement pipeline."""

    curve: Curve
    grid: VolumeGrid
    drude: DrudeParams = DrudeParams()
    material: HeatMaterial = HeatMaterial()
    background: BackgroundField = BackgroundField()
    radius: float = 3.0
    n_angles: int = 64
    ops: BoundaryOperatorSet | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.radius <= self.curve.circumradius():
            raise ValueError("measurement circle must enclose the domain")
        if self.ops is None:
            object.__setattr__(self, "ops", assemble_operators(self.curve))

    @property
    def angles(self):
        return 2 * np.pi * np.arange(self.n_angles) / self.n_angles

    @property
    def points(self):
        th = self.angles
        return self.radius * np.stack([np.cos(th), np.sin(th)], axis=-1)

    def fingerprint(self):
        h = hashlib.sha256()
        h.update(self.curve.kind.encode())
        h.update(json.dumps(self.curve.params, sort_keys=True).encode())
        h.update(np.asarray(self.curve.points).tobytes())
        h.update(np.asarray(self.grid.areas).tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Temperatures on the measurement circle over a frequency sweep.

    ``values[k, i]`` is the temperature at angle ``theta[i]`` and frequency
    ``omegas[k]``.
    """

    radius: float
    theta: np.ndarray = field(repr=False)
    omegas: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    mode: str
    meta: dict = field(default_factory=dict, repr=False)

    @property
    def points(self):
        return self.radius * np.stack([np.cos(self.theta), np.sin(self.theta)], axis=-1)

    def to_csv(self, path):
        pts = self.points
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["omega", "theta", "x1", "x2", "v", "mode"])
            for k, om in enumerate(self.omegas):
                for i, th in enumerate(self.theta):
                    w.writerow([f"{om:.17g}", f"{th:.17g}", f"{pts[i, 0]:.17g}", f"{pts[i, 1]:.17g}",
                                f"{self.values[k, i]:.17g}", self.mode])

    def manifest(self):
        return {"radius": self.radius, "n_angles": len(self.theta), "omegas": [float(w) for w in self.omegas],
                "mode": self.mode, **self.meta}


@dataclass(frozen=True, eq=False)
class AsymptoticPieces:
    """Boundary densities of the frequency expansion of ``psi``.

    ``psi = w^2 ln^2 w (G1+F1) + w^2 ln w (G2+F2) + w^2 (G3+F3) - A_D``,
    with single layers ``s1, s2, s3, sA`` evaluated at the measurement points.
    """

    GF: tuple = field(repr=False)
    A: np.ndarray = field(repr=False)
    s: tuple = field(repr=False)
    sA: np.ndarray = field(repr=False)
    V: np.ndarray = field(repr=False)


def _psi_operator(ops: BoundaryOperatorSet, material: HeatMaterial):
    """``(B_S, B_N)`` with ``psi = B_S [N_D[Q] - V] + B_N [gamma dN_D[Q] - dV]``."""
    inv = block_inverse(ops, material)
    n = ops.curve.n
    return inv[:n, :n], inv[:n, n:]


def asymptotic_pieces(setup: HeatSetup, moments: SourceMoments) -> AsymptoticPieces:
    """The densities ``G_i + F_i`` and ``A_D`` and their single layers at the sensors."""
    ops, grid, mat = setup.ops, setup.grid, setup.material
    curve = setup.curve
    BS, BN = _psi_operator(ops, mat)
    Q1, Q2, Q3 = q_components(moments, setup.drude, mat)
    GF = []
    for Qi in (np.full(grid.size, Q1), Q2, Q3):
        NQ, dNQ = boundary_data(grid, curve, Qi)
        GF.append(BS @ NQ + BN @ (mat.gamma_c * dNQ))
    Vb = setup.background(curve.points)
    dV = setup.background.normal_derivative(curve)
    A = BS @ Vb + BN @ dV
    pts = setup.points
    s = tuple(single_layer_eval(curve, d, pts) for d in GF)
    sA = single_layer_eval(curve, A, pts)
    return AsymptoticPieces(tuple(GF), A, s, sA, setup.background(pts))


def background_response(setup: HeatSetup):
    """Sensor temperatures with no heat source, ``V + S_D[psi_0]``."""
    sol = solve_heat_densities(setup.ops, setup.grid, np.zeros(setup.grid.size), setup.background, setup.material)
    return sol.exterior(setup.points)


def boundary_measurement(setup: HeatSetup, f, omega_list, mode: str = "full", literal: bool = True,
                         method: str = "auto", tol: float = 1e-10) -> MeasurementSet:
    """Temperatures on the measurement circle for each frequency.

    ``mode="full"`` solves the scattering and heat problems exactly.
    ``mode="asymptotic"`` assembles the frequency expansion; with
    ``literal=True`` the background and ``A_D`` terms carry a factor ``w^2``
    as in the published expansion, otherwise they are kept at order one,
    which is what the exact solution converges to.
    """
    omegas = np.atleast_1d(np.asarray(omega_list, dtype=float))
    fv = _source_values(setup.grid, f)
    pts = setup.points
    out = np.empty((len(omegas), len(pts)))
    meta = {"geometry": setup.fingerprint(), "h": setup.grid.h, "n_nodes": setup.curve.n,
            "drude": asdict(setup.drude), "gamma_c": setup.material.gamma_c,
            "background": asdict(setup.background), "ls_tol": tol}
    if mode == "full":
        for k, w in enumerate(omegas):
            u = solve_lippmann_schwinger(setup.grid, fv, w, setup.drude, tol=tol, method=method)
            Q = absorbed_power(u.values, w, setup.drude, setup.material)
            sol = solve_heat_densities(setup.ops, setup.grid, Q, setup.background, setup.material)
            out[k] = sol.exterior(pts)
    elif mode == "asymptotic":
        pieces = asymptotic_pieces(setup, SourceMoments.of(setup.grid, fv))
        for k, w in enumerate(omegas):
            lw = np.log(w)
            base = pieces.V - pieces.sA
            scale = w**2 if literal else 1.0
            out[k] = (w**2 * lw**2 * pieces.s[0] + w**2 * lw * pieces.s[1] + w**2 * pieces.s[2]
                      + scale * base)
        meta["literal"] = literal
    else:
        raise ValueError("mode must be 'full' or 'asymptotic'")
    return MeasurementSet(setup.radius, setup.angles, omegas, out, mode, meta)


def write_manifest(ms: MeasurementSet, path, extra: dict | None = None):
    data = ms.manifest()
    if extra:
        data.update(extra)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
