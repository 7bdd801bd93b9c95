"""Piecewise-defined surfaces ``u`` over planar domains.

A surface is a domain plus a list of regions.  Each region is either flat
(``u = level``) or the pointwise max of one or more generators:

* ``RadialParabola``: ``scale * (|x - F|**2 - r0**2) / (2 r0)``, a circular
  paraboloid whose focus sits at ``(F, 0)`` when ``scale == 1``;
* ``LinearParabola``: the same profile in ``s = |n.(x - p)| + offset``, a
  parabolic trough;
* ``Cone``: ``slope * (|x - apex| - radius)``.  Not admissible for slopes
  >= 1; it exists as a rejection fixture.

``u`` is 0 on the domain boundary by definition, so values jump there.
Gradients are reported only at regular points: away from region interfaces,
max-of ties, generator kinks and the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import shapely

from .errors import InvalidParameter, OutOfDomain
from .geometry import BigTriangle, ccw, check_simple, cross2, is_convex

BOUNDARY_TOL = 1e-12
RIDGE_TOL = 1e-9
TIE_TOL = 1e-9


def _rot(angle: float, reflect: bool = False) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    R = np.array([[c, -s], [s, c]])
    if reflect:
        R = R @ np.diag([1.0, -1.0])
    return R


@dataclass(frozen=True)
class Similarity:
    """``x -> rotation @ (k x) + shift``; ``rotation`` may include a reflection."""

    k: float = 1.0
    angle: float = 0.0
    shift: tuple[float, float] = (0.0, 0.0)
    reflect: bool = False

    @property
    def matrix(self) -> np.ndarray:
        return _rot(self.angle, self.reflect)

    def __call__(self, P) -> np.ndarray:
        P = np.asarray(P, dtype=float)
        return (self.k * P) @ self.matrix.T + np.asarray(self.shift)

    def direction(self, v) -> np.ndarray:
        return np.asarray(v, dtype=float) @ self.matrix.T


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def _cell_point_distance(cells: np.ndarray, F: np.ndarray):
    """Min and max distance from point ``F`` to each convex cell ``(N, V, 2)``."""
    d = cells - F
    dmax = np.sqrt(np.max(np.sum(d * d, axis=2), axis=1))
    a = cells
    b = np.roll(cells, -1, axis=1)
    ab = b - a
    L2 = np.sum(ab * ab, axis=2)
    t = np.clip(np.sum((F - a) * ab, axis=2) / np.where(L2 > 0, L2, 1.0), 0.0, 1.0)
    foot = a + t[..., None] * ab
    dedge = np.sqrt(np.min(np.sum((F - foot) ** 2, axis=2), axis=1))
    cr = ab[..., 0] * (F[1] - a[..., 1]) - ab[..., 1] * (F[0] - a[..., 0])
    inside = np.all(cr >= 0, axis=1) | np.all(cr <= 0, axis=1)
    dmin = np.where(inside, 0.0, dedge)
    return dmin, dmax


@dataclass(frozen=True)
class RadialParabola:
    focus: tuple[float, float]
    r0: float
    scale: float = 1.0
    kind = "radial-parabola"

    def __post_init__(self):
        if not self.r0 > 0:
            raise InvalidParameter("r0 must be positive")

    def s(self, P):
        return np.hypot(*(np.asarray(P, dtype=float) - self.focus).T)

    def value_of_s(self, s):
        return self.scale * (s * s - self.r0 ** 2) / (2 * self.r0)

    def gradnorm_of_s(self, s):
        return self.scale * s / self.r0

    def value(self, P):
        return self.value_of_s(self.s(P))

    def gradient(self, P):
        return self.scale * (np.asarray(P, dtype=float) - self.focus) / self.r0

    def kink_distance(self, P):
        return np.full(len(P), np.inf)

    def s_range(self, cells):
        return _cell_point_distance(cells, np.asarray(self.focus))

    def transformed(self, f: Similarity):
        return RadialParabola(tuple(f(self.focus)), f.k * self.r0, self.scale)

    def scaled(self, lam: float):
        return replace(self, scale=self.scale * lam)


@dataclass(frozen=True)
class LinearParabola:
    """Profile in ``s = |normal . (x - point)| + offset``; ``normal`` is a unit vector."""

    point: tuple[float, float]
    normal: tuple[float, float]
    offset: float
    r0: float
    scale: float = 1.0
    kind = "linear-parabola"

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if not math.isclose(float(np.hypot(*n)), 1.0, rel_tol=1e-12):
            object.__setattr__(self, "normal", tuple(n / np.hypot(*n)))
        if not self.r0 > 0 or self.offset < 0:
            raise InvalidParameter("need r0 > 0 and offset >= 0")

    def signed(self, P):
        return (np.asarray(P, dtype=float) - self.point) @ np.asarray(self.normal)

    def s(self, P):
        return np.abs(self.signed(P)) + self.offset

    def value_of_s(self, s):
        return self.scale * (s * s - self.r0 ** 2) / (2 * self.r0)

    def gradnorm_of_s(self, s):
        return self.scale * s / self.r0

    def value(self, P):
        return self.value_of_s(self.s(P))

    def gradient(self, P):
        d = self.signed(P)
        s = np.abs(d) + self.offset
        return (self.scale * np.sign(d) * s / self.r0)[:, None] * np.asarray(self.normal)

    def kink_distance(self, P):
        if self.offset == 0:
            return np.full(len(P), np.inf)
        return np.abs(self.signed(P))

    def s_range(self, cells):
        d = (cells - self.point) @ np.asarray(self.normal)
        lo, hi = d.min(axis=1), d.max(axis=1)
        straddle = (lo <= 0) & (hi >= 0)
        amin = np.where(straddle, 0.0, np.minimum(np.abs(lo), np.abs(hi)))
        amax = np.maximum(np.abs(lo), np.abs(hi))
        return amin + self.offset, amax + self.offset

    def transformed(self, f: Similarity):
        return LinearParabola(tuple(f(self.point)), tuple(f.direction(self.normal)),
                              f.k * self.offset, f.k * self.r0, self.scale)

    def scaled(self, lam: float):
        return replace(self, scale=self.scale * lam)


@dataclass(frozen=True)
class Cone:
    apex: tuple[float, float]
    slope: float
    radius: float
    kind = "cone"

    def s(self, P):
        return np.hypot(*(np.asarray(P, dtype=float) - self.apex).T)

    def value_of_s(self, s):
        return self.slope * (s - self.radius)

    def gradnorm_of_s(self, s):
        return np.full_like(np.asarray(s, dtype=float), self.slope)

    def value(self, P):
        return self.value_of_s(self.s(P))

    def gradient(self, P):
        d = np.asarray(P, dtype=float) - self.apex
        r = np.hypot(*d.T)
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.slope * d / r[:, None]

    def kink_distance(self, P):
        return self.s(P)

    def s_range(self, cells):
        return _cell_point_distance(cells, np.asarray(self.apex))

    def transformed(self, f: Similarity):
        return Cone(tuple(f(self.apex)), self.slope, f.k * self.radius)

    def scaled(self, lam: float):
        return Cone(self.apex, self.slope * lam, self.radius)


GENERATOR_TYPES = {cls.kind: cls for cls in (RadialParabola, LinearParabola, Cone)}


# ---------------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Region:
    """Flat when ``generators`` is empty; otherwise the max of its generators.

    ``support`` is a tuple of simple polygons whose union is the region, or
    ``None`` for "the whole domain".
    """

    generators: tuple = ()
    level: float = 0.0
    support: tuple | None = None
    label: str = ""

    def __post_init__(self):
        if self.support is not None:
            object.__setattr__(self, "support", tuple(ccw(check_simple(p)) for p in self.support))
        if not self.generators and not self.level < 0:
            raise InvalidParameter("flat level must be negative")

    @property
    def kind(self) -> str:
        if not self.generators:
            return "flat"
        if len(self.generators) == 1:
            return self.generators[0].kind
        return "max-of"

    @property
    def is_flat(self) -> bool:
        return not self.generators

    def evaluate(self, P):
        """Values, gradients and a smoothness flag (no tie or kink nearby)."""
        P = np.asarray(P, dtype=float)
        n = len(P)
        if self.is_flat:
            return np.full(n, self.level), np.zeros((n, 2)), np.ones(n, dtype=bool)
        V = np.stack([g.value(P) for g in self.generators])
        top = np.argmax(V, axis=0)
        vals = V[top, np.arange(n)]
        smooth = np.ones(n, dtype=bool)
        if len(self.generators) > 1:
            Vs = np.sort(V, axis=0)
            smooth &= (Vs[-1] - Vs[-2]) > TIE_TOL
        grads = np.empty((n, 2))
        for i, g in enumerate(self.generators):
            sel = top == i
            if np.any(sel):
                grads[sel] = g.gradient(P[sel])
                smooth[sel] &= g.kink_distance(P[sel]) > RIDGE_TOL
        return vals, grads, smooth

    def integrand_bounds(self, cells):
        """Bounds of ``1/(1+|grad u|^2)`` over convex cells ``(N, V, 2)``."""
        if self.is_flat:
            one = np.ones(len(cells))
            return one, one
        rng = [g.s_range(cells) for g in self.generators]
        if len(self.generators) == 1:
            g = self.generators[0]
            smin, smax = rng[0]
            return 1 / (1 + g.gradnorm_of_s(smax) ** 2), 1 / (1 + g.gradnorm_of_s(smin) ** 2)
        vlo = np.stack([g.value_of_s(r[0]) for g, r in zip(self.generators, rng)])
        vhi = np.stack([g.value_of_s(r[1]) for g, r in zip(self.generators, rng)])
        floor = vlo.max(axis=0)
        cand = vhi >= floor - TIE_TOL
        flo = np.stack([1 / (1 + g.gradnorm_of_s(r[1]) ** 2) for g, r in zip(self.generators, rng)])
        fhi = np.stack([1 / (1 + g.gradnorm_of_s(r[0]) ** 2) for g, r in zip(self.generators, rng)])
        lo = np.where(cand, flo, np.inf).min(axis=0)
        hi = np.where(cand, fhi, -np.inf).max(axis=0)
        return lo, hi

    def transformed(self, f: Similarity):
        return Region(tuple(g.transformed(f) for g in self.generators),
                      f.k * self.level if self.is_flat else 0.0,
                      None if self.support is None else tuple(f(p) for p in self.support),
                      self.label)

    def scaled(self, lam: float):
        return Region(tuple(g.scaled(lam) for g in self.generators),
                      lam * self.level if self.is_flat else 0.0, self.support, self.label)

    @cached_property
    def support_geometry(self):
        if self.support is None:
            return None
        return shapely.union_all([shapely.Polygon(p) for p in self.support])


# ---------------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------------


def _geometry_segments(geom) -> np.ndarray:
    segs = []
    for ring in shapely.get_parts(shapely.boundary(geom)):
        for line in shapely.get_parts(ring):
            c = np.asarray(line.coords)
            if len(c) >= 2:
                segs.append(np.stack([c[:-1], c[1:]], axis=1))
    return np.concatenate(segs) if segs else np.empty((0, 2, 2))


def _seg_dist(P, a, b) -> np.ndarray:
    ab = b - a
    L2 = np.sum(ab * ab, axis=1)
    t = np.clip(np.sum((P - a) * ab, axis=1) / np.where(L2 > 0, L2, 1.0), 0.0, 1.0)
    return np.hypot(*(P - a - t[:, None] * ab).T)


class _SegmentIndex:
    """Segments with an R-tree over short padded pieces for proximity tests."""

    PIECES = 256  # longest piece is at most extent / PIECES

    def __init__(self, segs: np.ndarray):
        self.segs = segs
        self.tree = shapely.STRtree(shapely.linestrings(segs)) if len(segs) else None
        if len(segs):
            ext = float(np.max(np.ptp(segs.reshape(-1, 2), axis=0)))
            self.pad = 1e-8 * max(ext, 1.0)
            L = np.hypot(*(segs[:, 1] - segs[:, 0]).T)
            k = np.maximum(1, np.ceil(L / (ext / self.PIECES))).astype(int)
            owner = np.repeat(np.arange(len(segs)), k)
            start = np.repeat(np.cumsum(k) - k, k)
            j = np.arange(owner.size) - start
            t0, t1 = j / k[owner], (j + 1) / k[owner]
            d = segs[owner, 1] - segs[owner, 0]
            self.a = segs[owner, 0] + t0[:, None] * d
            self.b = segs[owner, 0] + t1[:, None] * d
            lo = np.minimum(self.a, self.b) - self.pad
            hi = np.maximum(self.a, self.b) + self.pad
            self.piece_tree = shapely.STRtree(shapely.box(lo[:, 0], lo[:, 1], hi[:, 0], hi[:, 1]))

    def near(self, P, tol) -> np.ndarray:
        out = np.zeros(len(P), dtype=bool)
        if self.tree is None or len(P) == 0:
            return out
        if tol > self.pad:
            pi, _ = self.tree.query(shapely.points(P), predicate="dwithin", distance=tol)
            out[pi] = True
            return out
        pi, si = self.piece_tree.query(shapely.points(P))
        hit = _seg_dist(P[pi], self.a[si], self.b[si]) <= tol
        out[pi[hit]] = True
        return out

    def distance(self, P) -> np.ndarray:
        out = np.full(len(P), np.inf)
        if self.tree is None or len(P) == 0:
            return out
        (pi, _), d = self.tree.query_nearest(shapely.points(P), return_distance=True)
        np.minimum.at(out, pi, d)
        return out

    def crossings(self, origins, dirs, tmax, sines: bool = False):
        """Ray parameters ``t in (0, tmax]`` where ``origin + t dir`` meets a segment.

        With ``sines`` also returns, per crossing, the sine of the angle between
        the ray and the segment (0 for collinear overlaps).
        """
        n = len(origins)
        out = [np.empty(0)] * n
        sin_out = [np.empty(0)] * n
        S = len(self.segs)
        if S == 0 or n == 0:
            return (out, sin_out) if sines else out
        a = self.segs[:, 0]
        e = self.segs[:, 1] - a
        elen = np.hypot(*e.T)
        step = max(1, 2_000_000 // S)
        for i0 in range(0, n, step):
            o = origins[i0:i0 + step, None, :]
            d = dirs[i0:i0 + step, None, :]
            tm = tmax[i0:i0 + step, None]
            w = a[None] - o
            den = d[..., 0] * e[:, 1] - d[..., 1] * e[:, 0]
            tn = w[..., 0] * e[:, 1] - w[..., 1] * e[:, 0]
            un = w[..., 0] * d[..., 1] - w[..., 1] * d[..., 0]
            with np.errstate(divide="ignore", invalid="ignore"):
                t = tn / den
                u = un / den
            eps = 1e-12
            hit = (den != 0) & (t > 0) & (t <= tm) & (u >= -eps) & (u <= 1 + eps)
            # collinear overlap: both endpoint projections count
            dn = np.hypot(d[..., 0], d[..., 1])
            col = (np.abs(den) <= 1e-14 * dn * elen) & (np.abs(un) <= 1e-12 * dn * np.maximum(elen, 1.0))
            r, c = np.nonzero(hit)
            rows = [r]
            vals = [t[r, c]]
            angs = [np.abs(den[r, c]) / (dn[r, 0] * elen[c])]
            if np.any(col):
                rc, cc = np.nonzero(col)
                dd = np.sum(d[rc, 0] ** 2, axis=1)
                for end in (a[cc], a[cc] + e[cc]):
                    tt = np.sum((end - origins[i0 + rc]) * d[rc, 0], axis=1) / dd
                    ok = (tt > 0) & (tt <= tmax[i0 + rc])
                    rows.append(rc[ok])
                    vals.append(tt[ok])
                    angs.append(np.zeros(int(ok.sum())))
            r = np.concatenate(rows)
            v = np.concatenate(vals)
            w = np.concatenate(angs)
            order = np.argsort(r, kind="stable")
            r, v, w = r[order], v[order], w[order]
            bounds = np.searchsorted(r, np.arange(len(o) + 1))
            for k in range(len(o)):
                out[i0 + k] = v[bounds[k]:bounds[k + 1]]
                sin_out[i0 + k] = w[bounds[k]:bounds[k + 1]]
        return (out, sin_out) if sines else out


def _triangulate(geom) -> list[np.ndarray]:
    """Disjoint CCW triangles covering a (multi)polygon, slivers dropped."""
    ext = max(np.ptp(np.asarray(geom.bounds).reshape(2, 2), axis=0).max(), 1.0)
    out = []
    for t in shapely.get_parts(shapely.constrained_delaunay_triangles(geom)):
        c = np.asarray(t.exterior.coords)[:3]
        if abs(cross2(c[1] - c[0], c[2] - c[0])) > 1e-18 * ext * ext:
            out.append(ccw(c))
    return out


def _index_pieces(polys) -> list[np.ndarray]:
    """Pieces for point location: overlapping unions are re-triangulated."""
    if len(polys) <= 1:
        return list(polys)
    return _triangulate(shapely.union_all([shapely.Polygon(p) for p in polys]))


class _CellGrid:
    """Uniform grid of polygon-id lists; crowded cells get a finer child grid."""

    CROWDED = 24
    SUB = 8
    MAX_DEPTH = 3

    def __init__(self, geoms, ids, lo, size, g, tol, depth=0):
        self.lo, self.g, self.h = np.asarray(lo, dtype=float), g, size / g
        ii, jj = np.meshgrid(np.arange(g), np.arange(g), indexing="ij")
        x0 = self.lo[0] + ii.ravel() * self.h - 2 * tol
        y0 = self.lo[1] + jj.ravel() * self.h - 2 * tol
        cells = shapely.box(x0, y0, x0 + self.h + 4 * tol, y0 + self.h + 4 * tol)
        ct, ci = shapely.STRtree(cells).query(geoms[ids], predicate="intersects")
        order = np.lexsort((ct, ci))
        self.cell_poly = np.asarray(ids)[ct[order]]
        self.start = np.searchsorted(ci[order], np.arange(g * g + 1))
        self.children = {}
        if depth < self.MAX_DEPTH:
            counts = np.diff(self.start)
            for c in np.flatnonzero(counts > self.CROWDED):
                sub = self.cell_poly[self.start[c]:self.start[c + 1]]
                corner = self.lo + self.h * np.array([c // g, c % g])
                self.children[int(c)] = _CellGrid(geoms, sub, corner, self.h, self.SUB, tol, depth + 1)

    def candidates(self, P):
        ij = np.floor((P - self.lo) / self.h).astype(np.int64)
        ok = np.all((ij >= 0) & (ij < self.g), axis=1)
        cell = np.where(ok, ij[:, 0] * self.g + ij[:, 1], -1)
        pis, tis = [], []
        if self.children:
            kids = np.isin(cell, list(self.children))
            for c in np.unique(cell[kids]):
                sel = np.flatnonzero(cell == c)
                a, b = self.children[int(c)].candidates(P[sel])
                pis.append(sel[a])
                tis.append(b)
            cell = np.where(kids, -1, cell)
        live = cell >= 0
        cnt = np.where(live, self.start[cell + 1] - self.start[np.maximum(cell, 0)], 0)
        pi = np.repeat(np.arange(len(P)), cnt)
        off = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        pis.append(pi)
        tis.append(self.cell_poly[self.start[cell[pi]] + off])
        return np.concatenate(pis), np.concatenate(tis)


class _PolygonIndex:
    """Closed point-in-polygon lookup.

    The cell grid lists, per cell, the polygons that truly intersect it, so
    long thin polygons do not flood the candidate lists the way bounding boxes
    would.  Convex candidates are tested with exact half-planes.
    """

    def __init__(self, polys):
        self.polys = [np.asarray(p, dtype=float) for p in polys]
        self.geoms = np.array([shapely.Polygon(p) for p in self.polys])
        self.tree = shapely.STRtree(self.geoms)
        self.convex = np.array([is_convex(p) for p in self.polys])
        V = max(len(p) for p in self.polys)
        # pad short polygons by repeating the last vertex (zero-length edges test as true)
        self.verts = np.array([np.concatenate([p, np.repeat(p[-1:], V - len(p), axis=0)]) for p in self.polys])
        allv = self.verts.reshape(-1, 2)
        ext = float(np.ptp(allv, axis=0).max()) or 1.0
        self.tol = 1e-12 * max(ext, 1.0)
        g = int(np.clip(2 * np.sqrt(len(self.polys)), 4, 256))
        self.grid = _CellGrid(self.geoms, np.arange(len(self.polys)), allv.min(axis=0),
                              ext * (1 + 1e-9), g, self.tol)

    def _candidates(self, P):
        return self.grid.candidates(P)

    def covering(self, P):
        """Pairs ``(point index, polygon index)`` with the point in the closed polygon."""
        pi, ti = self._candidates(P)
        if len(pi) == 0:
            return pi, ti
        keep = np.zeros(len(pi), dtype=bool)
        cv = self.convex[ti]
        if np.any(cv):
            a = self.verts[ti[cv]]
            e = np.concatenate([a[:, 1:], a[:, :1]], axis=1) - a
            L = np.hypot(e[..., 0], e[..., 1])
            w = P[pi[cv]][:, None, :] - a
            cr = e[..., 0] * w[..., 1] - e[..., 1] * w[..., 0]
            keep[cv] = np.all(cr >= -self.tol * L, axis=1)
        nc = ~cv
        if np.any(nc):
            keep[nc] = shapely.intersects(self.geoms[ti[nc]], shapely.points(P[pi[nc]]))
        return pi[keep], ti[keep]

    def nearest(self, P) -> np.ndarray:
        (pi, ti) = self.tree.query_nearest(shapely.points(P))
        out = np.empty(len(P), dtype=int)
        out[pi] = ti
        return out


class PolygonDomain:
    """Union of simple polygons (possibly overlapping)."""

    kind = "polygon"

    def __init__(self, pieces):
        self.pieces = [ccw(check_simple(p)) for p in pieces]

    @cached_property
    def geometry(self):
        return shapely.union_all([shapely.Polygon(p) for p in self.pieces])

    @cached_property
    def area(self) -> float:
        return float(self.geometry.area)

    @property
    def bounds(self):
        return tuple(float(v) for v in self.geometry.bounds)

    @cached_property
    def boundary_index(self) -> _SegmentIndex:
        return _SegmentIndex(_geometry_segments(self.geometry))

    @property
    def boundary_segments(self) -> np.ndarray:
        return self.boundary_index.segs

    @cached_property
    def piece_index(self) -> _PolygonIndex:
        return _PolygonIndex(_index_pieces(self.pieces))

    def contains(self, P, tol: float = BOUNDARY_TOL) -> np.ndarray:
        P = np.asarray(P, dtype=float).reshape(-1, 2)
        inside = np.zeros(len(P), dtype=bool)
        inside[self.piece_index.covering(P)[0]] = True
        out = ~inside
        if np.any(out):
            inside[out] = self.boundary_index.near(P[out], tol)
        return inside

    def near_boundary(self, P, tol: float) -> np.ndarray:
        return self.boundary_index.near(np.asarray(P, dtype=float).reshape(-1, 2), tol)

    def boundary_distance(self, P) -> np.ndarray:
        return self.boundary_index.distance(np.asarray(P, dtype=float).reshape(-1, 2))

    def exit_crossings(self, origins, dirs, tmax, sines: bool = False):
        return self.boundary_index.crossings(origins, dirs, tmax, sines)

    def ray_extent(self, origins, dirs) -> np.ndarray:
        """Length parameter after which a ray has certainly left the domain."""
        x0, y0, x1, y1 = self.bounds
        corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
        reach = np.max(np.hypot(*(corners[None] - origins[:, None]).transpose(2, 0, 1)), axis=1)
        return reach / np.hypot(*dirs.T) * 1.0001

    def sample_boundary(self, count: int, rng) -> np.ndarray:
        segs = self.boundary_segments
        L = np.hypot(*(segs[:, 1] - segs[:, 0]).T)
        i = rng.choice(len(segs), size=count, p=L / L.sum())
        t = rng.random(count)
        return segs[i, 0] + t[:, None] * (segs[i, 1] - segs[i, 0])

    def transformed(self, f: Similarity) -> "PolygonDomain":
        return PolygonDomain([f(p) for p in self.pieces])

    def outline_pieces(self):
        return self.pieces


class DiskDomain:
    """Intersection of equal-radius disks: one disk, or the Reuleaux triangle."""

    def __init__(self, centers, radius: float):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        self.radius = float(radius)
        if not self.radius > 0:
            raise InvalidParameter("radius must be positive")
        if len(self.centers) not in (1, 3):
            raise InvalidParameter("only a disk or a Reuleaux triangle is supported")
        if len(self.centers) == 3:
            C = self.centers
            sides = [np.linalg.norm(C[i] - C[(i + 1) % 3]) for i in range(3)]
            if not np.allclose(sides, self.radius, rtol=1e-12):
                raise InvalidParameter("Reuleaux vertices must form an equilateral triangle of side = radius")

    @property
    def kind(self) -> str:
        return "disk" if len(self.centers) == 1 else "reuleaux"

    @property
    def area(self) -> float:
        r = self.radius
        if len(self.centers) == 1:
            return math.pi * r * r
        return 0.5 * (math.pi - math.sqrt(3.0)) * r * r

    def arcs(self):
        """``(center, start_angle, sweep)`` per boundary arc, counter-clockwise."""
        if len(self.centers) == 1:
            return [(self.centers[0], 0.0, 2 * math.pi)]
        out = []
        C = self.centers
        orient = np.sign(cross2(C[1] - C[0], C[2] - C[0]))
        for i in range(3):
            p, q = C[(i + 1) % 3], C[(i + 2) % 3]
            if orient < 0:
                p, q = q, p
            a0 = math.atan2(*(p - C[i])[::-1])
            out.append((C[i], a0, math.pi / 3))
        return out

    @property
    def bounds(self):
        pts = []
        for c, a0, sw in self.arcs():
            angles = [a0, a0 + sw] + [k * math.pi / 2 for k in range(-4, 9)
                                      if a0 <= k * math.pi / 2 <= a0 + sw]
            pts.extend(c + self.radius * np.array([math.cos(t), math.sin(t)]) for t in angles)
        pts = np.array(pts)
        return (*pts.min(axis=0), *pts.max(axis=0))

    def _dist(self, P):
        return np.stack([np.hypot(*(P - c).T) for c in self.centers])

    def contains(self, P, tol: float = BOUNDARY_TOL) -> np.ndarray:
        P = np.asarray(P, dtype=float).reshape(-1, 2)
        return np.all(self._dist(P) <= self.radius + tol, axis=0)

    def boundary_distance(self, P) -> np.ndarray:
        """Exact for points inside (the nearest disk boundary is reached first)."""
        P = np.asarray(P, dtype=float).reshape(-1, 2)
        return np.abs(self.radius - self._dist(P)).min(axis=0)

    def near_boundary(self, P, tol: float) -> np.ndarray:
        return self.boundary_distance(P) <= tol

    def exit_crossings(self, origins, dirs, tmax, sines: bool = False):
        out, sin_out = [], []
        for o, d, tm in zip(origins, dirs, tmax):
            ts, ss = [], []
            dd = d @ d
            for c in self.centers:
                w = o - c
                b = w @ d
                disc = b * b - dd * (w @ w - self.radius ** 2)
                if disc >= 0:
                    sq = math.sqrt(disc)
                    # angle to the tangent line: sin = |(p - c) . d| / (r |d|)
                    for t in ((-b - sq) / dd, (-b + sq) / dd):
                        if 0 < t <= tm:
                            ts.append(t)
                            ss.append(sq / (self.radius * math.sqrt(dd)))
            out.append(np.asarray(ts))
            sin_out.append(np.asarray(ss))
        return (out, sin_out) if sines else out

    def ray_extent(self, origins, dirs) -> np.ndarray:
        return 2.0001 * self.radius / np.hypot(*dirs.T)

    def sample_boundary(self, count: int, rng) -> np.ndarray:
        arcs = self.arcs()
        i = rng.integers(0, len(arcs), size=count)
        u = rng.random(count)
        pts = np.empty((count, 2))
        for k, (c, a0, sw) in enumerate(arcs):
            sel = i == k
            t = a0 + sw * u[sel]
            pts[sel] = c + self.radius * np.stack([np.cos(t), np.sin(t)], axis=1)
        return pts

    def transformed(self, f: Similarity) -> "DiskDomain":
        return DiskDomain(f(self.centers), f.k * self.radius)

    def outline_pieces(self, per_arc: int = 64):
        pts = []
        for c, a0, sw in self.arcs():
            t = a0 + sw * np.arange(per_arc) / per_arc
            pts.append(c + self.radius * np.stack([np.cos(t), np.sin(t)], axis=1))
        return [np.concatenate(pts)]


# ---------------------------------------------------------------------------
# Surfaces
# ---------------------------------------------------------------------------


@dataclass
class SampleBatch:
    values: np.ndarray
    gradients: np.ndarray
    region: np.ndarray
    regular: np.ndarray
    inside: np.ndarray
    raw_gradients: np.ndarray  # dominant-generator gradient, even off the regular set


@dataclass(frozen=True)
class SurfaceSample:
    point: tuple[float, float]
    value: float
    gradient: tuple[float, float] | None
    region: int
    regular: bool


@dataclass(eq=False)
class AdmissibleSurface:
    domain: PolygonDomain | DiskDomain
    regions: list[Region]
    c: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.c > 0:
            raise InvalidParameter("flat depth c must be positive")
        self.regions = list(self.regions)
        if sum(r.support is None for r in self.regions) > 1:
            raise InvalidParameter("at most one region may cover the whole domain")

    # -- lookup structures --------------------------------------------------

    @cached_property
    def _supports(self):
        polys, owner, prio = [], [], []
        order = sorted(range(len(self.regions)), key=lambda i: (not self.regions[i].is_flat, i))
        rank = {r: k for k, r in enumerate(order)}
        for i, reg in enumerate(self.regions):
            if reg.support is None:
                continue
            for p in _index_pieces(reg.support):
                polys.append(p)
                owner.append(i)
                prio.append(rank[i])
        default = next((i for i, r in enumerate(self.regions) if r.support is None), -1)
        index = _PolygonIndex(polys) if polys else None
        return index, np.array(owner, dtype=int), np.array(prio, dtype=int), np.array(order), default

    @cached_property
    def ridge_index(self) -> _SegmentIndex:
        """Region interfaces (support-union boundaries) plus the polygonal domain boundary."""
        segs = [_geometry_segments(r.support_geometry) for r in self.regions if r.support is not None]
        if isinstance(self.domain, PolygonDomain):
            segs.append(self.domain.boundary_segments)
        segs = [s for s in segs if len(s)]
        return _SegmentIndex(np.concatenate(segs) if segs else np.empty((0, 2, 2)))

    def locate(self, P) -> np.ndarray:
        index, owner, prio, order, default = self._supports
        region = np.full(len(P), default, dtype=int)
        if index is None or len(P) == 0:
            return region
        pi, ti = index.covering(P)
        best = np.full(len(P), np.iinfo(np.int64).max)
        np.minimum.at(best, pi, prio[ti])
        hit = best < np.iinfo(np.int64).max
        region[hit] = order[best[hit]]
        miss = np.flatnonzero(~hit & (region < 0))
        if len(miss):
            region[miss] = owner[index.nearest(P[miss])]
        return region

    # -- evaluation ----------------------------------------------------------

    def evaluate(self, P, boundary_tol: float = BOUNDARY_TOL) -> SampleBatch:
        """Values and gradients at ``P``.

        Points within ``boundary_tol`` of the domain boundary take the boundary
        value 0; ``boundary_tol=0`` keeps the one-sided region formula for any
        point not exactly on the boundary.
        """
        P = np.asarray(P, dtype=float).reshape(-1, 2)
        n = len(P)
        values = np.full(n, np.nan)
        grads = np.full((n, 2), np.nan)
        region = np.full(n, -1, dtype=int)
        regular = np.zeros(n, dtype=bool)
        inside = self.domain.contains(P)
        idx = np.flatnonzero(inside)
        on_bd = np.zeros(n, dtype=bool)
        on_bd[idx] = self.domain.near_boundary(P[idx], boundary_tol)
        values[on_bd] = 0.0
        work = np.flatnonzero(inside & ~on_bd)
        if len(work) == 0:
            return SampleBatch(values, grads, region, regular, inside, grads.copy())
        Pw = P[work]
        reg = self.locate(Pw)
        region[work] = reg
        smooth = np.zeros(len(work), dtype=bool)
        for r in np.unique(reg):
            sel = reg == r
            v, g, ok = self.regions[r].evaluate(Pw[sel])
            values[work[sel]] = v
            grads[work[sel]] = g
            smooth[sel] = ok
        smooth &= ~self.ridge_index.near(Pw, RIDGE_TOL)
        if isinstance(self.domain, DiskDomain):
            smooth &= self.domain.boundary_distance(Pw) > RIDGE_TOL
        regular[work] = smooth
        raw = grads.copy()
        grads[~regular] = np.nan
        return SampleBatch(values, grads, region, regular, inside, raw)

    def values(self, P) -> np.ndarray:
        return self.evaluate(P).values

    @property
    def area(self) -> float:
        return self.domain.area

    @property
    def bounds(self):
        return self.domain.bounds


def eval(surface: AdmissibleSurface, x) -> SurfaceSample:  # noqa: A001 - mirrors the documented API
    P = np.asarray(x, dtype=float).reshape(1, 2)
    b = surface.evaluate(P)
    if not b.inside[0]:
        raise OutOfDomain(f"{tuple(P[0])} is outside the domain")
    g = tuple(float(v) for v in b.gradients[0]) if b.regular[0] else None
    return SurfaceSample(tuple(float(v) for v in P[0]), float(b.values[0]), g, int(b.region[0]), bool(b.regular[0]))


# ---------------------------------------------------------------------------
# Constructors and transforms
# ---------------------------------------------------------------------------


def min_dimple_depth(tri: BigTriangle) -> float:
    """Smallest admissible flat depth: minus the paraboloid's infimum over the trapezoid."""
    return (1.0 - tri.kappa ** 2) * tri.r0 / 2.0


def dimple_regions(tri: BigTriangle, c: float) -> tuple[Region, Region]:
    para = Region((RadialParabola(tuple(tri.B), tri.r0),), support=(tri.trapezoid(),), label="trapezoid")
    flat = Region(level=-c, support=(tri.small_triangle(),), label="small-triangle")
    return para, flat


def dimple_surface(tri: BigTriangle, c: float | None = None) -> AdmissibleSurface:
    """Paraboloid with focus at the apex on the trapezoid, ``-c`` on the small triangle."""
    cmin = min_dimple_depth(tri)
    if c is None:
        c = cmin
    if c < cmin * (1 - 1e-12):
        raise InvalidParameter(f"c={c} is below the admissible depth {cmin}")
    para, flat = dimple_regions(tri, c)
    dom = PolygonDomain([tri.big_triangle()])
    return AdmissibleSurface(dom, [para, flat], c, {"construction": "dimple"})


def assemble(family) -> AdmissibleSurface:
    """One dimple per big triangle of the family, sharing the depth ``c_n``."""
    tris = family.triangles
    c = max(min_dimple_depth(t) for t in tris)
    regions = [Region((RadialParabola(tuple(t.B), t.r0),), support=(t.trapezoid(),), label=f"trap{k}")
               for k, t in enumerate(tris)]
    regions.append(Region(level=-c, support=tuple(t.small_triangle() for t in tris), label="small-triangles"))
    dom = PolygonDomain(family.domain_pieces)
    meta = {"construction": "besicovitch", "n": family.n, "a": family.a, "d": family.d, "c": c}
    return AdmissibleSurface(dom, regions, c, meta)


def scale_copy(surface: AdmissibleSurface, k: float = 1.0, angle: float = 0.0,
               shift=(0.0, 0.0), reflect: bool = False) -> AdmissibleSurface:
    """Surface ``v`` on ``f(k Omega)`` with ``v(f(k x)) = k u(x)``."""
    if not k > 0:
        raise InvalidParameter("k must be positive")
    f = Similarity(float(k), float(angle), tuple(float(s) for s in shift), bool(reflect))
    regions = [r.transformed(f) for r in surface.regions]
    meta = dict(surface.meta, copy={"k": f.k, "angle": f.angle, "shift": list(f.shift), "reflect": f.reflect})
    return AdmissibleSurface(surface.domain.transformed(f), regions, f.k * surface.c, meta)


def shrink(surface: AdmissibleSurface, lam: float) -> AdmissibleSurface:
    """``lam * u`` on the same domain.  Admissibility must be re-checked by the caller."""
    if not 0 < lam <= 1:
        raise InvalidParameter("lambda must lie in (0, 1]")
    meta = dict(surface.meta, shrink=surface.meta.get("shrink", 1.0) * lam)
    return AdmissibleSurface(surface.domain, [r.scaled(lam) for r in surface.regions], lam * surface.c, meta)


def support_cells(region: Region, domain) -> np.ndarray:
    """Triangulation ``(N, 3, 2)`` of a region's support (polygonal supports only)."""
    polys = region.support
    if polys is None:
        polys = domain.pieces if len(domain.pieces) == 1 else None
        if polys is None:
            geom = domain.geometry
            tris = shapely.constrained_delaunay_triangles(geom)
            return np.array([np.asarray(t.exterior.coords)[:3] for t in shapely.get_parts(tris)])
    out = []
    for p in polys:
        p = ccw(p)
        if is_convex(p):
            out.extend(np.array([p[0], p[i], p[i + 1]]) for i in range(1, len(p) - 1))
        else:
            tris = shapely.constrained_delaunay_triangles(shapely.Polygon(p))
            out.extend(ccw(np.asarray(t.exterior.coords)[:3]) for t in shapely.get_parts(tris))
    return np.array(out)


def region_area(region: Region, domain) -> float:
    if region.support is None:
        return domain.area
    return float(region.support_geometry.area)
