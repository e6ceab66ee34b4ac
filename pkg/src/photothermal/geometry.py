"""Boundary curves, volume grids and boundary-fitted quadrature rules.

A :class:`Curve` is an analytic, positively oriented closed curve sampled at
``n`` equispaced parameters ``t_j = 2 pi j / n``.  A :class:`VolumeGrid` is a
square lattice of cells of width ``h`` (cell centres at integer multiples of
``h``) restricted to the interior of a curve.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import shapely

KITE_A = 0.65
KITE_B = 1.5

_KINDS = ("circle", "ellipse", "kite")


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass(frozen=True, eq=False)
class Curve:
    """Sampled analytic closed curve.

    Attributes
    ----------
    kind : str
        ``"circle"``, ``"ellipse"`` or ``"kite"``.
    params : dict
        Shape parameters (see :func:`make_curve`).
    n : int
        Number of quadrature nodes.
    t : ndarray, shape (n,)
    points, normals : ndarray, shape (n, 2)
        Node positions and outward unit normals.
    speed, curvature : ndarray, shape (n,)
        ``|x'(t_j)|`` and signed curvature (positive on convex parts).
    """

    kind: str
    params: dict
    n: int
    t: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)
    speed: np.ndarray = field(repr=False)
    normals: np.ndarray = field(repr=False)
    curvature: np.ndarray = field(repr=False)

    # -- analytic parameterisation -----------------------------------------
    def position(self, t):
        return _position(self.kind, self.params, np.asarray(t, dtype=float))

    def derivative(self, t):
        return _derivative(self.kind, self.params, np.asarray(t, dtype=float), 1)

    def second_derivative(self, t):
        return _derivative(self.kind, self.params, np.asarray(t, dtype=float), 2)

    # -- quadrature data ---------------------------------------------------
    @property
    def weights(self):
        """Trapezoid weights ``(2 pi / n) |x'(t_j)|`` for integrals in arc length."""
        return (2 * np.pi / self.n) * self.speed

    @property
    def tangents(self):
        d = self.derivative(self.t)
        return d / self.speed[:, None]

    def perimeter(self):
        return float(np.sum(self.weights))

    def area(self):
        """Enclosed area by Green's theorem, ``(1/2) int (x y' - y x') dt``."""
        d = self.derivative(self.t)
        return float(0.5 * (2 * np.pi / self.n) * np.sum(_cross(self.points, d)))

    def centroid(self):
        d = self.derivative(self.t)
        p = self.points
        dt = 2 * np.pi / self.n
        a = self.area()
        cx = dt * np.sum(0.5 * p[:, 0] ** 2 * d[:, 1]) / a
        cy = -dt * np.sum(0.5 * p[:, 1] ** 2 * d[:, 0]) / a
        return np.array([cx, cy])

    def circumradius(self, m: int = 4096):
        """Radius of the smallest origin-centred disk containing the curve."""
        tt = np.linspace(0, 2 * np.pi, m, endpoint=False)
        return float(np.max(np.hypot(*self.position(tt).T)))

    def bounding_box(self, m: int = 4096):
        tt = np.linspace(0, 2 * np.pi, m, endpoint=False)
        p = self.position(tt)
        # pad by the worst chord sagitta of the sampling
        pad = 1e-6 * max(1.0, float(np.max(np.abs(p))))
        return p.min(axis=0) - pad, p.max(axis=0) + pad

    def inside(self, x):
        """Strict inside predicate, vectorised over the leading axes of ``x``."""
        return _inside(self.kind, self.params, np.asarray(x, dtype=float))

    def polygon(self, m: int = 8192):
        tt = np.linspace(0, 2 * np.pi, m, endpoint=False)
        return shapely.Polygon(self.position(tt))

    def resample(self, n: int) -> "Curve":
        return make_curve(self.kind, self.params, n)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x1", "x2", "nu1", "nu2", "speed", "curvature"])
            for row in zip(self.t, self.points[:, 0], self.points[:, 1],
                           self.normals[:, 0], self.normals[:, 1], self.speed, self.curvature):
                w.writerow([f"{v:.17g}" for v in row])


def _unpack(kind, params):
    cx, cy = params.get("center", (0.0, 0.0))
    if kind == "circle":
        r = params.get("radius", 2.0)
        return cx, cy, r, r
    if kind == "ellipse":
        return cx, cy, params["a"], params["b"]
    s = params.get("scale", 1.0)
    return cx, cy, s, s


def _position(kind, params, t):
    cx, cy, a, b = _unpack(kind, params)
    if kind == "kite":
        x = a * (np.cos(t) + KITE_A * np.cos(2 * t) - KITE_A)
        y = b * KITE_B * np.sin(t)
    else:
        x = a * np.cos(t)
        y = b * np.sin(t)
    return np.stack([x + cx, y + cy], axis=-1)


def _derivative(kind, params, t, order):
    _, _, a, b = _unpack(kind, params)
    if kind == "kite":
        if order == 1:
            x = a * (-np.sin(t) - 2 * KITE_A * np.sin(2 * t))
            y = b * KITE_B * np.cos(t)
        else:
            x = a * (-np.cos(t) - 4 * KITE_A * np.cos(2 * t))
            y = -b * KITE_B * np.sin(t)
    else:
        if order == 1:
            x, y = -a * np.sin(t), b * np.cos(t)
        else:
            x, y = -a * np.cos(t), -b * np.sin(t)
    return np.stack([x, y], axis=-1)


def _inside(kind, params, x):
    cx, cy, a, b = _unpack(kind, params)
    X = (x[..., 0] - cx) / a
    Y = (x[..., 1] - cy) / b
    if kind in ("circle", "ellipse"):
        return X * X + Y * Y < 1.0
    s = Y / KITE_B
    ok = np.abs(s) < 1.0
    s = np.where(ok, s, 0.0)
    c1 = np.sqrt(1.0 - s * s)
    c2 = 1.0 - 2.0 * s * s
    right = c1 + KITE_A * c2 - KITE_A
    left = -c1 + KITE_A * c2 - KITE_A
    return ok & (X > left) & (X < right)


def make_curve(kind: str, params: dict | None = None, n: int = 128) -> Curve:
    """Build a sampled :class:`Curve`.

    Parameters
    ----------
    kind : {"circle", "ellipse", "kite"}
    params : dict
        ``circle``: ``radius`` (default 2); ``ellipse``: ``a``, ``b``;
        ``kite``: ``scale`` (default 1).  All accept ``center``.
    n : int
        Even node count, at least 16.
    """
    if kind not in _KINDS:
        raise ValueError(f"unknown curve kind {kind!r}; expected one of {_KINDS}")
    if n % 2 or n < 16:
        raise ValueError(f"node count must be even and >= 16, got {n}")
    params = dict(params or {})
    if "center" in params:
        params["center"] = tuple(float(c) for c in params["center"])
    if kind == "circle":
        params.setdefault("radius", 2.0)
        if not params["radius"] > 0:
            raise ValueError("circle radius must be positive")
    elif kind == "ellipse":
        if "a" not in params or "b" not in params:
            raise ValueError("ellipse needs semi-axes 'a' and 'b'")
        if not (params["a"] > 0 and params["b"] > 0):
            raise ValueError("ellipse semi-axes must be positive")
    else:
        params.setdefault("scale", 1.0)
        if not params["scale"] > 0:
            raise ValueError("kite scale must be positive")

    t = 2 * np.pi * np.arange(n) / n
    pts = _position(kind, params, t)
    d1 = _derivative(kind, params, t, 1)
    d2 = _derivative(kind, params, t, 2)
    speed = np.hypot(d1[:, 0], d1[:, 1])
    normals = np.stack([d1[:, 1], -d1[:, 0]], axis=-1) / speed[:, None]
    curvature = _cross(d1, d2) / speed**3
    curve = Curve(kind, params, n, t, pts, speed, normals, curvature)
    if curve.area() <= 0:
        raise ValueError("curve is not positively oriented")
    return curve


# --------------------------------------------------------------------------
# Volume grids
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class VolumeGrid:
    """Cells of a square lattice (centres ``h * index``) whose centres lie in D.

    Boundary-cut cells carry the area of their intersection with D; the
    inside part of a cut cell whose centre falls outside D is added to the
    neighbouring retained cell closest to it, so ``areas.sum()`` matches
    ``|D|`` up to the fraction estimate.
    """

    curve: Curve
    h: float
    centers: np.ndarray = field(repr=False)
    areas: np.ndarray = field(repr=False)
    index: np.ndarray = field(repr=False)
    origin: tuple = (0, 0)
    shape: tuple = (0, 0)

    @property
    def size(self):
        return len(self.areas)

    def total_area(self):
        return float(self.areas.sum())

    def to_lattice(self, values):
        """Scatter per-cell values onto the dense lattice (zeros elsewhere)."""
        values = np.asarray(values)
        out = np.zeros(self.shape, dtype=values.dtype)
        i = self.index[:, 0] - self.origin[0]
        j = self.index[:, 1] - self.origin[1]
        out[i, j] = values
        return out

    def from_lattice(self, arr):
        i = self.index[:, 0] - self.origin[0]
        j = self.index[:, 1] - self.origin[1]
        return arr[i, j]

    def locate(self, x):
        """Cell id containing each point of ``x``, or -1."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        ij = np.floor(x / self.h + 0.5).astype(np.int64)
        ii = ij[:, 0] - self.origin[0]
        jj = ij[:, 1] - self.origin[1]
        ok = (ii >= 0) & (ii < self.shape[0]) & (jj >= 0) & (jj < self.shape[1])
        out = np.full(len(x), -1, dtype=np.int64)
        out[ok] = self._lookup[ii[ok], jj[ok]]
        return out

    @property
    def _lookup(self):
        lut = self.__dict__.get("_lut")
        if lut is None:
            lut = np.full(self.shape, -1, dtype=np.int64)
            lut[self.index[:, 0] - self.origin[0], self.index[:, 1] - self.origin[1]] = np.arange(self.size)
            object.__setattr__(self, "_lut", lut)
        return lut

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "x2", "area"])
            for (a, b), c in zip(self.centers, self.areas):
                w.writerow([f"{a:.17g}", f"{b:.17g}", f"{c:.17g}"])


def _cut_fractions_exact(curve, boxes_lo, h):
    poly = curve.polygon()
    shapely.prepare(poly)
    boxes = shapely.box(boxes_lo[:, 0], boxes_lo[:, 1], boxes_lo[:, 0] + h, boxes_lo[:, 1] + h)
    inter = shapely.intersection(boxes, poly)
    frac = shapely.area(inter) / (h * h)
    cent = shapely.get_coordinates(shapely.centroid(inter), include_z=False)
    empty = shapely.is_empty(inter)
    cen = np.full((len(boxes_lo), 2), np.nan)
    cen[~empty] = cent
    return frac, cen


def _cut_fractions_subsample(curve, boxes_lo, h, s):
    off = (np.arange(s) + 0.5) / s * h
    ox, oy = np.meshgrid(off, off, indexing="ij")
    sub = boxes_lo[:, None, :] + np.stack([ox.ravel(), oy.ravel()], axis=-1)[None]
    ins = curve.inside(sub)
    frac = ins.mean(axis=1)
    with np.errstate(invalid="ignore"):
        cen = (sub * ins[..., None]).sum(axis=1) / ins.sum(axis=1)[:, None]
    return frac, cen


def make_grid(curve: Curve, h: float, fraction: str = "exact", subsample: int = 4) -> VolumeGrid:
    """Lattice cells of width ``h`` covering the interior of ``curve``.

    ``fraction="exact"`` clips cut cells against a fine polygon of the curve;
    ``fraction="subsample"`` estimates the inside fraction on a
    ``subsample x subsample`` point lattice per cell.
    """
    if not h > 0:
        raise ValueError("grid width h must be positive")
    if fraction not in ("exact", "subsample"):
        raise ValueError("fraction must be 'exact' or 'subsample'")
    lo, hi = curve.bounding_box()
    i0, j0 = (np.floor(lo / h) - 1).astype(int)
    i1, j1 = (np.ceil(hi / h) + 1).astype(int)
    ii, jj = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1), indexing="ij")
    shape = ii.shape
    centers = np.stack([ii, jj], axis=-1) * h
    center_in = curve.inside(centers)

    # nine-point probe to find cells the boundary passes through
    probe = np.array([[a, b] for a in (-0.5, 0.0, 0.5) for b in (-0.5, 0.0, 0.5)]) * h
    ins = curve.inside(centers[..., None, :] + probe)
    cut = ins.any(axis=-1) & ~ins.all(axis=-1)
    # also flag neighbours of flagged cells, to catch grazing intersections
    grown = cut.copy()
    grown[1:, :] |= cut[:-1, :]
    grown[:-1, :] |= cut[1:, :]
    grown[:, 1:] |= cut[:, :-1]
    grown[:, :-1] |= cut[:, 1:]
    full = ins.all(axis=-1) & ~grown

    frac = np.where(full, 1.0, 0.0)
    cidx = np.argwhere(grown)
    lo_corner = centers[grown] - 0.5 * h
    if fraction == "exact":
        f, cen = _cut_fractions_exact(curve, lo_corner, h)
    else:
        f, cen = _cut_fractions_subsample(curve, lo_corner, h, subsample)
    frac[grown] = f

    area = np.where(center_in, frac * h * h, 0.0)
    # hand the inside part of cells with outside centres to a retained neighbour
    orphan = grown & ~center_in & (frac > 0)
    pos = {tuple(c): k for k, c in enumerate(cidx)}
    for a, b in np.argwhere(orphan):
        k = pos[(a, b)]
        target = cen[k]
        best, best_d = None, np.inf
        for da in (-1, 0, 1):
            for db in (-1, 0, 1):
                p, q = a + da, b + db
                if 0 <= p < shape[0] and 0 <= q < shape[1] and center_in[p, q]:
                    d = np.hypot(*(centers[p, q] - target))
                    if d < best_d:
                        best, best_d = (p, q), d
        if best is not None:
            area[best] += frac[a, b] * h * h

    keep = center_in & (area > 0)
    if not np.any(keep):
        raise ValueError(f"grid width h={h} leaves no cell centre inside the curve")
    index = np.stack([ii[keep], jj[keep]], axis=-1)
    return VolumeGrid(curve, float(h), centers[keep], area[keep], index, (int(i0), int(j0)), shape)


# --------------------------------------------------------------------------
# Boundary-fitted quadrature
# --------------------------------------------------------------------------


def gauss_legendre(n: int, a: float = 0.0, b: float = 1.0):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def star_quadrature(curve: Curve, n_t: int | None = None, n_s: int = 40, center=None):
    """Nodes and weights for ``int_D F dx`` on a star-shaped domain.

    Uses ``y = c + s (x(t) - c)``: trapezoid in ``t``, Gauss-Legendre in
    ``s``.  Spectrally accurate for smooth ``F`` on analytic curves.
    """
    c = curve.centroid() if center is None else np.asarray(center, dtype=float)
    n_t = n_t or max(256, 2 * curve.n)
    t = 2 * np.pi * np.arange(n_t) / n_t
    x = curve.position(t) - c
    jac = _cross(x, curve.derivative(t))
    if np.any(jac <= 0):
        raise ValueError("domain is not star-shaped with respect to the chosen centre")
    s, ws = gauss_legendre(n_s)
    pts = c + s[None, :, None] * x[:, None, :]
    w = (2 * np.pi / n_t) * jac[:, None] * (s * ws)[None, :]
    return pts.reshape(-1, 2), w.ravel()


def ray_crossings(curve: Curve, origins, directions, oversample: int = 8, min_r: float = 1e-11):
    """Distances along rays ``o + r e`` (r > 0) at which the curve is crossed.

    Returns an array of shape (n_rays, k) padded with ``inf`` and sorted
    along the last axis.
    """
    o = np.atleast_2d(origins).astype(float)
    e = np.atleast_2d(directions).astype(float)
    m = oversample * max(curve.n, 64)
    ts = 2 * np.pi * (np.arange(m) + 0.5) / m
    xs = curve.position(ts)
    out_rows = []
    chunk = max(1, 2_000_000 // m)
    for start in range(0, len(o), chunk):
        oc, ec = o[start:start + chunk], e[start:start + chunk]
        g = (xs[None, :, 0] - oc[:, None, 0]) * ec[:, None, 1] - (xs[None, :, 1] - oc[:, None, 1]) * ec[:, None, 0]
        gn = np.roll(g, -1, axis=1)
        ray, k = np.nonzero(np.signbit(g) != np.signbit(gn))
        ta = ts[k]
        tb = ta + 2 * np.pi / m
        ga, gb = g[ray, k], gn[ray, k]
        tt = ta - ga * (tb - ta) / (gb - ga)
        er = ec[ray]
        orr = oc[ray]
        for _ in range(8):
            p = curve.position(tt) - orr
            dp = curve.derivative(tt)
            f = p[:, 0] * er[:, 1] - p[:, 1] * er[:, 0]
            df = dp[:, 0] * er[:, 1] - dp[:, 1] * er[:, 0]
            step = np.where(df != 0, f / np.where(df != 0, df, 1.0), 0.0)
            tt = np.clip(tt - step, ta, tb)
        p = curve.position(tt) - orr
        r = p[:, 0] * er[:, 0] + p[:, 1] * er[:, 1]
        good = r > min_r
        counts = np.bincount(ray[good], minlength=len(oc))
        kmax = max(1, counts.max() if len(counts) else 1)
        rows = np.full((len(oc), kmax), np.inf)
        order = np.lexsort((r[good], ray[good]))
        rr, rv = ray[good][order], r[good][order]
        slot = np.arange(len(rr)) - np.searchsorted(rr, rr)
        rows[rr, slot] = rv
        out_rows.append(rows)
    width = max(r.shape[1] for r in out_rows)
    out = np.full((len(o), width), np.inf)
    pos = 0
    for r in out_rows:
        out[pos:pos + len(r), : r.shape[1]] = r
        pos += len(r)
    return np.sort(out, axis=1)


def ray_inside_intervals(curve: Curve, origins, directions):
    """Inside segments ``[a, b]`` along each ray, as arrays (n_rays, k) with NaN padding."""
    o = np.atleast_2d(origins).astype(float)
    e = np.atleast_2d(directions).astype(float)
    cr = ray_crossings(curve, o, e)
    n_rays, k = cr.shape
    breaks = np.concatenate([np.zeros((n_rays, 1)), cr], axis=1)
    a = breaks[:, :-1]
    b = breaks[:, 1:]
    finite = np.isfinite(b)
    mid = 0.5 * (a + np.where(finite, b, a))
    mid = np.where(np.isfinite(mid), mid, 0.0)
    pts = o[:, None, :] + mid[..., None] * e[:, None, :]
    ins = curve.inside(pts) & finite
    return np.where(ins, a, np.nan), np.where(ins, b, np.nan)


def _smoothstep(tau):
    """Quintic grading map on [0, 1] and its derivative."""
    w = tau**3 * (10 - 15 * tau + 6 * tau**2)
    dw = 30 * tau**2 * (1 - tau) ** 2
    return w, dw


@dataclass(frozen=True, eq=False)
class RayRule:
    """Polar quadrature centred at each boundary node.

    ``w[j, p]`` integrates ``F(y) dy`` over D with nodes ``pts[j, p]`` at
    distance ``r[j, p]`` from node ``j`` along direction ``e`` with
    ``e . nu_j = e_dot_nu[j, p]``.  Padding entries carry zero weight.
    """

    pts: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    e_dot_nu: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)

    @property
    def log_weights(self):
        """Weights for ``int ln|x_j - y| / (2 pi) F(y) dy``."""
        return self.w * np.log(self.r) / (2 * np.pi)

    @property
    def flux_weights(self):
        """Weights for the outward normal derivative of the logarithmic potential."""
        return -self.w * self.e_dot_nu / (2 * np.pi * self.r)


def boundary_ray_rule(curve: Curve, n_theta: int = 96, n_r: int = 32, grade: int = 3) -> RayRule:
    """Polar rules centred at each boundary node, for singular targets on the curve.

    Directions ``theta`` run over (0, pi), the inward half-plane, plus
    (pi, 2 pi) when the curve has concave parts.  Both angular ranges use a
    graded Gauss-Legendre rule; radial segments that start at the node use a
    graded map ``r = L u^grade``.  Accuracy is spectral on convex curves;
    on concave ones rays grazing the far boundary limit it to low order.
    """
    tau, wt = gauss_legendre(n_theta)
    w, dw = _smoothstep(tau)
    theta = np.pi * w
    wtheta = np.pi * dw * wt
    if np.min(curve.curvature) <= 0:
        theta = np.concatenate([theta, np.pi + theta])
        wtheta = np.concatenate([wtheta, wtheta])
        n_theta = 2 * n_theta
    tang = curve.tangents
    nu = curve.normals
    n = curve.n
    e = (np.cos(theta)[None, :, None] * tang[:, None, :]
         - np.sin(theta)[None, :, None] * nu[:, None, :])
    origins = np.repeat(curve.points, n_theta, axis=0)
    dirs = e.reshape(-1, 2)
    a, b = ray_inside_intervals(curve, origins, dirs)
    u, wu = gauss_legendre(n_r)
    ug = u**grade
    dug = grade * u ** (grade - 1)
    wth = np.tile(wtheta, n)[:, None]
    edn = np.tile(-np.sin(theta), n)[:, None]
    pts_all, r_all, w_all, e_all = [], [], [], []
    for s in range(a.shape[1]):
        valid = np.isfinite(a[:, s])
        aa = np.where(valid, a[:, s], 0.0)
        bb = np.where(valid, b[:, s], 1.0)
        start0 = aa == 0.0
        L = bb - aa
        r = np.where(start0[:, None], L[:, None] * ug[None, :], aa[:, None] + L[:, None] * u[None, :])
        dr = np.where(start0[:, None], L[:, None] * (dug * wu)[None, :], L[:, None] * wu[None, :])
        pts_all.append(origins[:, None, :] + r[..., None] * dirs[:, None, :])
        r_all.append(r)
        w_all.append(valid[:, None] * wth * dr * r)
        e_all.append(np.broadcast_to(edn, r.shape))
    def join(lst, *tail):
        return np.concatenate(lst, axis=1).reshape(n, -1, *tail)
    return RayRule(join(pts_all, 2), join(r_all), join(e_all), join(w_all))


def vertical_tangencies(curve: Curve, m: int = 4096):
    """Sorted parameters ``t`` in [0, 2 pi) where the tangent is vertical (``x1'(t) = 0``)."""
    tt = 2 * np.pi * np.arange(m) / m
    d = curve.derivative(tt)[:, 0]
    idx = np.nonzero(np.signbit(d) != np.signbit(np.roll(d, -1)))[0]
    out = []
    for i in idx:
        a, b = tt[i], tt[i] + 2 * np.pi / m
        da = d[i]
        for _ in range(60):
            c = 0.5 * (a + b)
            dc = curve.derivative(c)[0]
            if np.signbit(dc) == np.signbit(da):
                a, da = c, dc
            else:
                b = c
        out.append((0.5 * (a + b)) % (2 * np.pi))
    return np.sort(np.asarray(out))


def vertical_sections(curve: Curve, x1):
    """Inside intervals of the vertical lines ``{x1 = const}``: arrays ``lo, hi`` (m, k), NaN padded.

    Between consecutive vertical tangencies ``x1(t)`` is monotone, so each
    such arc meets a vertical line at most once; crossings are found by
    bisection on every arc, which cannot miss nearly tangent pairs.
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    tc = vertical_tangencies(curve)
    if len(tc) < 2:
        raise ValueError("curve has fewer than two vertical tangencies")
    arcs_a = tc
    arcs_b = np.append(tc[1:], tc[0] + 2 * np.pi)
    xa = curve.position(arcs_a)[:, 0]
    xb = curve.position(arcs_b)[:, 0]
    lo_x = np.minimum(xa, xb)
    hi_x = np.maximum(xa, xb)
    hit = (x1[:, None] >= lo_x[None, :]) & (x1[:, None] <= hi_x[None, :])
    row, arc = np.nonzero(hit)
    a, b = arcs_a[arc], arcs_b[arc]
    inc = xb[arc] > xa[arc]
    target = x1[row]
    for _ in range(60):
        c = 0.5 * (a + b)
        above = curve.position(c)[:, 0] > target
        go_left = above == inc
        b = np.where(go_left, c, b)
        a = np.where(go_left, a, c)
    y = curve.position(0.5 * (a + b))[:, 1]
    counts = np.bincount(row, minlength=len(x1))
    k = max(2, int(counts.max()) if len(counts) else 2)
    k += k % 2
    ys = np.full((len(x1), k), np.inf)
    order = np.lexsort((y, row))
    r_sorted, y_sorted = row[order], y[order]
    slot = np.arange(len(r_sorted)) - np.searchsorted(r_sorted, r_sorted)
    ys[r_sorted, slot] = y_sorted
    ys = np.sort(ys, axis=1)
    lo, hi = ys[:, 0::2], ys[:, 1::2][:, : ys[:, 0::2].shape[1]]
    bad = ~np.isfinite(lo) | ~np.isfinite(hi)
    return np.where(bad, np.nan, lo), np.where(bad, np.nan, hi)


