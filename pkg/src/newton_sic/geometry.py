"""Planar primitives, big triangles and the delta-doubling construction.

A big triangle ``ABC`` has apex ``B`` and a separating segment ``MN``
parallel to the base ``AC``.  It splits into the small triangle ``MBN`` and
the trapezoid ``AMNC``.  Repeated delta-doubling turns one big triangle into
``2**n`` of them whose trapezoids stay disjoint while the small triangles
pile up on top of each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import shapely

from .errors import DegenerateGeometry, InvalidGeometry, InvalidParameter, ResourceLimit

LENGTH_RTOL = 1e-9
INCIDENCE_TOL = 1e-12
EXACT_UNION_MAX_N = 12
FULL_PAIRWISE_MAX = 2 ** 10
MAX_FAMILY_GENERATION = 18


def as_point(p) -> np.ndarray:
    q = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(q)):
        raise InvalidParameter(f"non-finite point {p!r}")
    return q


def cross2(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def polygon_area(poly) -> float:
    """Signed shoelace area (positive for counter-clockwise vertex order)."""
    P = np.asarray(poly, dtype=float)
    x, y = P[:, 0], P[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def ccw(poly) -> np.ndarray:
    P = np.asarray(poly, dtype=float)
    return P if polygon_area(P) >= 0 else P[::-1].copy()


def is_convex(poly, tol: float = INCIDENCE_TOL) -> bool:
    P = ccw(poly)
    e = np.roll(P, -1, axis=0) - P
    turns = cross2(e, np.roll(e, -1, axis=0))
    scale = max(1.0, float(np.max(np.abs(P))) ** 2)
    return bool(np.all(turns >= -tol * scale))


def line_intersection(p1, p2, q1, q2) -> np.ndarray:
    """Intersection of the lines through ``p1 p2`` and ``q1 q2``."""
    p1, p2, q1, q2 = (np.asarray(v, dtype=float) for v in (p1, p2, q1, q2))
    r = p2 - p1
    s = q2 - q1
    denom = float(cross2(r, s))
    if abs(denom) <= INCIDENCE_TOL * np.linalg.norm(r) * np.linalg.norm(s):
        raise DegenerateGeometry("lines are parallel")
    t = float(cross2(q1 - p1, s)) / denom
    return p1 + t * r


def point_segment_distance(P, a, b) -> np.ndarray:
    """Distance from each row of ``P`` to the closed segment ``ab``."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    L2 = float(ab @ ab)
    if L2 == 0.0:
        return np.hypot(*(P - a).T)
    t = np.clip(((P - a) @ ab) / L2, 0.0, 1.0)
    foot = a + t[:, None] * ab
    return np.hypot(*(P - foot).T)


def polygon_segments(poly) -> np.ndarray:
    P = np.asarray(poly, dtype=float)
    return np.stack([P, np.roll(P, -1, axis=0)], axis=1)


def clip_convex(subject, clip) -> np.ndarray:
    """Sutherland-Hodgman clipping of ``subject`` against a convex ``clip``."""
    out = [np.asarray(v, dtype=float) for v in ccw(subject)]
    C = ccw(clip)
    for i in range(len(C)):
        if not out:
            break
        c1, c2 = C[i], C[(i + 1) % len(C)]
        edge = c2 - c1
        inp, out = out, []

        def side(p):
            return edge[0] * (p[1] - c1[1]) - edge[1] * (p[0] - c1[0])

        s = inp[-1]
        for e in inp:
            se, ss = side(e), side(s)
            if se >= 0:
                if ss < 0:
                    out.append(s + (e - s) * (ss / (ss - se)))
                out.append(e)
            elif ss >= 0:
                out.append(s + (e - s) * (ss / (ss - se)))
            s = e
    return np.array(out).reshape(-1, 2)


def overlap_area(p, q) -> float:
    """Area of the intersection of two polygons (convex pairs are clipped directly)."""
    if is_convex(p) and is_convex(q):
        inter = clip_convex(p, q)
        return abs(polygon_area(inter)) if len(inter) >= 3 else 0.0
    return float(shapely.Polygon(p).intersection(shapely.Polygon(q)).area)


def check_simple(poly) -> np.ndarray:
    P = np.asarray(poly, dtype=float)
    if P.ndim != 2 or P.shape[1] != 2 or len(P) < 3:
        raise InvalidGeometry("a polygon needs at least three 2-D vertices")
    if not np.all(np.isfinite(P)):
        raise InvalidGeometry("non-finite polygon vertex")
    if not shapely.is_simple(shapely.LinearRing(P)):
        raise InvalidGeometry("self-intersecting polygon")
    return P


# ---------------------------------------------------------------------------
# Big triangles
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BigTriangle:
    """Triangle ``ABC`` (apex ``B``) with separating segment ``MN``, ``M`` on ``AB``, ``N`` on ``BC``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    M: np.ndarray
    N: np.ndarray

    def __post_init__(self):
        for name in "ABCMN":
            object.__setattr__(self, name, as_point(getattr(self, name)))
        A, B, C, M, N = self.A, self.B, self.C, self.M, self.N
        scale = max(np.linalg.norm(B - A), np.linalg.norm(B - C))
        if scale <= 0:
            raise DegenerateGeometry("zero-size triangle")
        if abs(cross2(B - A, C - A)) <= INCIDENCE_TOL * scale**2:
            raise DegenerateGeometry("collinear triangle vertices")
        for P, Q, X, label in ((A, B, M, "M on AB"), (C, B, N, "N on BC")):
            d = Q - P
            s = float((X - P) @ d / (d @ d))
            off = abs(float(cross2(d, X - P))) / np.linalg.norm(d)
            if not (0.0 < s < 1.0) or off > LENGTH_RTOL * scale:
                raise InvalidGeometry(f"separating point violates {label}")
        mn, ac = N - M, C - A
        if abs(float(cross2(mn, ac))) > LENGTH_RTOL * np.linalg.norm(mn) * np.linalg.norm(ac):
            raise InvalidGeometry("MN is not parallel to AC")

    @property
    def r0(self) -> float:
        return float(max(np.linalg.norm(self.A - self.B), np.linalg.norm(self.C - self.B)))

    @property
    def apex_to_separator(self) -> float:
        """dist(B, MN) measured to the closed segment, not the line."""
        return float(point_segment_distance(self.B, self.M, self.N)[0])

    @property
    def kappa(self) -> float:
        return self.apex_to_separator / self.r0

    @property
    def separating_length(self) -> float:
        return float(np.linalg.norm(self.N - self.M))

    @property
    def small_height(self) -> float:
        """Distance from the apex to the line through ``MN``."""
        mn = self.N - self.M
        return abs(float(cross2(mn, self.B - self.M))) / np.linalg.norm(mn)

    @property
    def trap_height(self) -> float:
        ac = self.C - self.A
        return abs(float(cross2(ac, self.M - self.A))) / np.linalg.norm(ac)

    def trapezoid(self) -> np.ndarray:
        return np.array([self.A, self.M, self.N, self.C])

    def small_triangle(self) -> np.ndarray:
        return np.array([self.M, self.B, self.N])

    def big_triangle(self) -> np.ndarray:
        return np.array([self.A, self.B, self.C])

    def annulus(self) -> tuple[float, float]:
        """Radii of the smallest ring about ``B`` holding the closed trapezoid."""
        T = self.trapezoid()
        inner = min(float(point_segment_distance(self.B, a, b)[0]) for a, b in polygon_segments(T))
        outer = float(np.max(np.hypot(*(T - self.B).T)))
        return inner, outer


def make_initial_triangle(a: float = 1.0, d: float = 1.0, h: float = 1.0) -> BigTriangle:
    """Separating segment on the x-axis centred at the origin, apex at ``(0, h)``."""
    for name, v in (("a", a), ("d", d), ("h", h)):
        if not (np.isfinite(v) and v > 0):
            raise InvalidParameter(f"{name} must be positive, got {v!r}")
    half_base = a * (h + d) / (2 * h)
    return BigTriangle(
        A=(-half_base, -d),
        B=(0.0, h),
        C=(half_base, -d),
        M=(-a / 2, 0.0),
        N=(a / 2, 0.0),
    )


@dataclass(frozen=True, eq=False)
class DoublingTrace:
    M_prime: np.ndarray
    N_prime: np.ndarray
    T: np.ndarray
    A_prime: np.ndarray
    C_prime: np.ndarray
    R: np.ndarray
    S: np.ndarray
    P: np.ndarray
    Q: np.ndarray


def delta_double(tri: BigTriangle, delta: float):
    """Replace ``tri`` by two big triangles sharing halves of its separating segment.

    Returns ``(left, right, trace)``; ``left`` carries ``(M, T)`` and ``right``
    carries ``(T, N)``.
    """
    if not (np.isfinite(delta) and delta > 0):
        raise InvalidParameter(f"delta must be positive, got {delta!r}")
    A, B, C, M, N = tri.A, tri.B, tri.C, tri.M, tri.N
    T = 0.5 * (M + N)
    Mp = B + delta * (B - M)
    Np = B + delta * (B - N)
    Cp = line_intersection(Mp, T, A, C)
    Ap = line_intersection(Np, T, A, C)
    R = line_intersection(Np, T, M, B)
    S = line_intersection(Mp, T, N, B)
    P = line_intersection(B, B + (N - M), Np, T)
    Q = line_intersection(B, B + (N - M), Mp, T)
    left = BigTriangle(A=A, B=Mp, C=Cp, M=M, N=T)
    right = BigTriangle(A=Ap, B=Np, C=C, M=T, N=N)
    return left, right, DoublingTrace(Mp, Np, T, Ap, Cp, R, S, P, Q)


# ---------------------------------------------------------------------------
# Areas and disjointness
# ---------------------------------------------------------------------------

UNION_METHODS = {"exact": "exact", "exact-sweep": "exact", "raster": "raster", "rasterization": "raster"}


@dataclass(frozen=True)
class AreaEstimate:
    value: float
    error: float
    method: str

    @property
    def lower(self) -> float:
        return self.value - self.error

    @property
    def upper(self) -> float:
        return self.value + self.error


def union_area(polys: Sequence, method: str = "exact", resolution: float | None = None,
               max_intervals: int = 20_000_000) -> AreaEstimate:
    """Area of the union of simple polygons.

    ``exact`` overlays the polygons (GEOS) and is exact up to rounding.
    ``raster`` scan-converts convex pieces into horizontal strips of height
    ``resolution``, merges each strip's covered x-intervals, and brackets the
    area between grid cells inside the merged inner intervals and cells touched
    by the merged outer intervals.  The returned error is half the bracket,
    i.e. at most (cell area) x (boundary cell count).
    """
    try:
        kind = UNION_METHODS[method]
    except KeyError:
        raise InvalidParameter(f"unknown union method {method!r}") from None
    polys = [check_simple(p) for p in polys]
    if not polys:
        return AreaEstimate(0.0, 0.0, kind)
    if kind == "exact":
        total = sum(abs(polygon_area(p)) for p in polys)
        value = float(shapely.union_all(shapely.polygons(polys) if _uniform(polys) else
                                        [shapely.Polygon(p) for p in polys]).area)
        return AreaEstimate(value, 1e-12 * max(total, 1.0), kind)
    return _raster_union(polys, resolution, max_intervals)


def _uniform(polys) -> bool:
    return len({len(p) for p in polys}) == 1


def _convex_pieces(polys):
    pieces = []
    for p in polys:
        if is_convex(p):
            pieces.append(ccw(p))
        else:
            tris = shapely.constrained_delaunay_triangles(shapely.Polygon(p))
            pieces.extend(np.asarray(t.exterior.coords)[:3] for t in tris.geoms)
    return pieces


def _raster_union(polys, resolution, max_intervals) -> AreaEstimate:
    pieces = _convex_pieces(polys)
    allv = np.concatenate(pieces)
    x0, y0 = allv.min(axis=0)
    x1, y1 = allv.max(axis=0)
    if resolution is None:
        resolution = max(x1 - x0, y1 - y0) / 4000.0
    h = float(resolution)
    ncols = int(math.ceil((x1 - x0) / h)) + 1
    nrows = int(math.ceil((y1 - y0) / h)) + 1
    est = sum(int((p[:, 1].max() - p[:, 1].min()) / h) + 2 for p in pieces)
    if est > max_intervals:
        raise ResourceLimit(f"raster needs ~{est} strip intervals, budget {max_intervals}")
    ys = y0 + h * np.arange(nrows + 1)
    rows_o, lo_o, hi_o, rows_i, lo_i, hi_i = [], [], [], [], [], []
    for P in pieces:
        pymin, pymax = P[:, 1].min(), P[:, 1].max()
        r0 = max(int(math.floor((pymin - y0) / h)), 0)
        r1 = min(int(math.floor((pymax - y0) / h)), nrows - 1)
        yl = ys[r0:r1 + 2]
        L, R = _cross_section(P, yl)
        lo = np.fmin(L[:-1], L[1:])
        hi = np.fmax(R[:-1], R[1:])
        # vertices strictly inside a strip can stick out further
        vr = np.clip(np.floor((P[:, 1] - y0) / h).astype(int), r0, r1) - r0
        np.fmin.at(lo, vr, P[:, 0])
        np.fmax.at(hi, vr, P[:, 0])
        rows = np.arange(r0, r1 + 1)
        rows_o.append(rows)
        lo_o.append(lo)
        hi_o.append(hi)
        full = (yl[:-1] >= pymin) & (yl[1:] <= pymax)
        ilo = np.fmax(L[:-1], L[1:])
        ihi = np.fmin(R[:-1], R[1:])
        ok = full & (ihi > ilo)
        rows_i.append(rows[ok])
        lo_i.append(ilo[ok])
        hi_i.append(ihi[ok])
    stride = ncols + 2
    # outer: round each interval out to whole cells, then merge
    ro = np.concatenate(rows_o)
    a = np.floor((np.concatenate(lo_o) - x0) / h) + ro * stride
    b = np.ceil((np.concatenate(hi_o) - x0) / h) + ro * stride
    n_touch = _merged_length(a, b)
    # inner: merge in continuous coordinates, then round in
    ri = np.concatenate(rows_i)
    a = (np.concatenate(lo_i) - x0) / h + ri * stride
    b = (np.concatenate(hi_i) - x0) / h + ri * stride
    n_in = _merged_cells_inside(a, b)
    cell = h * h
    lower, upper = n_in * cell, n_touch * cell
    return AreaEstimate(0.5 * (lower + upper), 0.5 * (upper - lower), "raster")


def _merge(a, b):
    if len(a) == 0:
        return a, b
    order = np.argsort(a, kind="stable")
    a, b = a[order], b[order]
    run = np.maximum.accumulate(b)
    start = np.ones(len(a), dtype=bool)
    start[1:] = a[1:] > run[:-1]
    idx = np.flatnonzero(start)
    ends = np.append(idx[1:], len(a)) - 1
    return a[idx], run[ends]


def _merged_length(a, b) -> int:
    ma, mb = _merge(a, b)
    return int(np.sum(mb - ma))


def _merged_cells_inside(a, b) -> int:
    ma, mb = _merge(a, b)
    return int(np.sum(np.maximum(np.floor(mb) - np.ceil(ma), 0)))


def _cross_section(P, ys):
    """Left/right x of a convex polygon's horizontal cross-sections (NaN outside)."""
    a = P
    b = np.roll(P, -1, axis=0)
    ya, yb = a[:, 1][None, :], b[:, 1][None, :]
    Y = ys[:, None]
    lo_y, hi_y = np.minimum(ya, yb), np.maximum(ya, yb)
    dy = yb - ya
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(dy != 0, (Y - ya) / dy, 0.0)
    X = a[:, 0][None, :] + t * (b[:, 0] - a[:, 0])[None, :]
    hit = (Y >= lo_y) & (Y <= hi_y)
    # horizontal edges contribute both endpoints
    flat = (dy == 0) & hit
    Xa = np.where(flat, np.minimum(a[:, 0], b[:, 0])[None, :], X)
    Xb = np.where(flat, np.maximum(a[:, 0], b[:, 0])[None, :], X)
    L = np.where(hit, Xa, np.inf).min(axis=1)
    R = np.where(hit, Xb, -np.inf).max(axis=1)
    L[~np.isfinite(L)] = np.nan
    R[~np.isfinite(R)] = np.nan
    return L, R


@dataclass(frozen=True)
class DisjointReport:
    disjoint: bool
    worst_overlap: float
    worst_pair: tuple[int, int] | None
    pairs_checked: int
    mode: str


def bbox_candidate_pairs(polys, chunk: int = 2048) -> np.ndarray:
    """Index pairs ``i < j`` whose bounding boxes intersect."""
    B = np.array([[p[:, 0].min(), p[:, 1].min(), p[:, 0].max(), p[:, 1].max()] for p in polys])
    out = []
    n = len(B)
    for s in range(0, n, chunk):
        Bi = B[s:s + chunk]
        hit = ((Bi[:, None, 0] <= B[None, :, 2]) & (B[None, :, 0] <= Bi[:, None, 2])
               & (Bi[:, None, 1] <= B[None, :, 3]) & (B[None, :, 1] <= Bi[:, None, 3]))
        i, j = np.nonzero(hit)
        i = i + s
        keep = i < j
        out.append(np.stack([i[keep], j[keep]], axis=1))
    return np.concatenate(out) if out else np.empty((0, 2), dtype=int)


def verify_disjoint(polys: Sequence, tol: float = 1e-10, mode: str = "auto",
                    samples: int = 20_000, seed: int = 0) -> DisjointReport:
    """Check that polygons have pairwise intersections of area at most ``tol``.

    ``full`` clips every pair whose closed sets meet; an R-tree prunes pairs
    that cannot touch.  ``ordered`` assumes the input runs left to right
    and checks adjacent pairs plus ``samples`` random non-adjacent ones.
    """
    polys = [check_simple(p) for p in polys]
    n = len(polys)
    if mode == "auto":
        mode = "full" if n <= FULL_PAIRWISE_MAX else "ordered"
    if mode == "full":
        geoms = [shapely.Polygon(p) for p in polys]
        i, j = shapely.STRtree(geoms).query(geoms, predicate="intersects")
        keep = i < j
        pairs = np.stack([i[keep], j[keep]], axis=1)
    elif mode == "ordered":
        adj = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1)
        rng = np.random.default_rng(seed)
        i = rng.integers(0, n, size=samples)
        j = rng.integers(0, n, size=samples)
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        rnd = np.stack([lo, hi], axis=1)[hi - lo > 1]
        pairs = np.unique(np.concatenate([adj, rnd]), axis=0)
    else:
        raise InvalidParameter(f"unknown disjointness mode {mode!r}")
    worst, worst_pair = 0.0, None
    for i, j in pairs:
        a = overlap_area(polys[i], polys[j])
        if a > worst:
            worst, worst_pair = a, (int(i), int(j))
    return DisjointReport(worst <= tol, worst, worst_pair if worst > tol else None, len(pairs), mode)


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------


def harmonic_deltas(m: int) -> float:
    """Default rule: delta_m = 1/m, so that h_m = m + 1 when h_0 = 1."""
    return 1.0 / m


@dataclass(eq=False)
class DoublingFamily:
    n: int
    a: float
    d: float
    h0: float
    deltas: tuple[float, ...]
    heights: tuple[float, ...]
    generations: list[list[BigTriangle]] = field(repr=False)
    small_area: AreaEstimate
    trap_area: float
    kappa_min: float

    @property
    def triangles(self) -> list[BigTriangle]:
        return self.generations[-1]

    def trapezoids(self) -> list[np.ndarray]:
        return [t.trapezoid() for t in self.triangles]

    def small_triangles(self) -> list[np.ndarray]:
        return [t.small_triangle() for t in self.triangles]

    @property
    def kappas(self) -> np.ndarray:
        return np.array([t.kappa for t in self.triangles])

    @property
    def kappa_lower_bound(self) -> float:
        """Closed-form lower bound on every ratio for the default h_m = m+1, d = sqrt(n)."""
        n = self.n
        s = n + 1 + math.sqrt(n)
        return (n + 1) / s - math.ldexp(self.a, -n) / s

    @property
    def small_area_upper_bound(self) -> float:
        return self.a * (math.log(self.n) + 1.5) if self.n >= 1 else self.a * self.h0 / 2

    def small_area_history(self, method: str = "exact") -> list[AreaEstimate]:
        return [union_area([t.small_triangle() for t in gen], method=method) for gen in self.generations]

    @property
    def domain_pieces(self) -> list[np.ndarray]:
        return self.trapezoids() + self.small_triangles()


def build_family(n: int, a: float = 1.0, d: float | None = None,
                 delta_rule: Callable[[int], float] | Sequence[float] | None = None,
                 h0: float = 1.0, union_method: str = "auto",
                 max_generation: int = MAX_FAMILY_GENERATION) -> DoublingFamily:
    """Apply ``delta_m``-doubling to every triangle for ``m = 1..n``.

    ``d=None`` selects the trapezoid height ``sqrt(n)``.  ``union_method='auto'``
    overlays the small triangles exactly up to ``n = 12`` and rasterizes above.
    """
    if int(n) != n or n < 0:
        raise InvalidParameter(f"n must be a non-negative integer, got {n!r}")
    n = int(n)
    if n > max_generation:
        raise ResourceLimit(f"2**{n} triangles exceeds the generation budget {max_generation}")
    if d is None:
        if n < 1:
            raise InvalidParameter("automatic trapezoid height sqrt(n) needs n >= 1")
        d = math.sqrt(n)
    if delta_rule is None:
        delta_rule = harmonic_deltas
    if callable(delta_rule):
        deltas = tuple(float(delta_rule(m)) for m in range(1, n + 1))
    else:
        deltas = tuple(float(x) for x in delta_rule)[:n]
        if len(deltas) < n:
            raise InvalidParameter("delta sequence shorter than n")
    gens = [[make_initial_triangle(a, d, h0)]]
    heights = [float(h0)]
    for delta in deltas:
        nxt = []
        for tri in gens[-1]:
            left, right, _ = delta_double(tri, delta)
            nxt.append(left)
            nxt.append(right)
        gens.append(nxt)
        heights.append(heights[-1] * (1.0 + delta))
    tris = gens[-1]
    if union_method == "auto":
        union_method = "exact" if n <= EXACT_UNION_MAX_N else "raster"
    small = union_area([t.small_triangle() for t in tris], method=union_method)
    trap = float(sum(abs(polygon_area(t.trapezoid())) for t in tris))
    kmin = float(min(t.kappa for t in tris))
    return DoublingFamily(n=n, a=float(a), d=float(d), h0=float(h0), deltas=deltas,
                          heights=tuple(heights), generations=gens, small_area=small,
                          trap_area=trap, kappa_min=kmin)
