"""Catalog of concrete surfaces and the copy-packing transfer.

``baseline_ua`` and ``baseline_ub`` are the two classical candidates; the
Besicovitch family comes from :func:`geometry.build_family` glued into one
surface; ``pack_copies``/``transfer`` move any polygonal surface into another
domain by tiling it with shrunken copies and filling the rest with a flat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import shapely

from .errors import InvalidParameter, ResourceLimit
from .geometry import DoublingFamily, build_family, ccw, cross2
from .surface import (AdmissibleSurface, Cone, DiskDomain, LinearParabola, PolygonDomain,
                      RadialParabola, Region, assemble, scale_copy)

UA_RESISTANCE = 0.593
UB_RESISTANCE = 0.581


def square(half: float = 0.5, center=(0.0, 0.0)) -> np.ndarray:
    cx, cy = center
    return np.array([[cx - half, cy - half], [cx + half, cy - half],
                     [cx + half, cy + half], [cx - half, cy + half]])


def regular_polygon(k: int = 64, radius: float = 1.0, center=(0.0, 0.0)) -> np.ndarray:
    if k < 3:
        raise InvalidParameter("a polygon needs at least 3 vertices")
    t = 2 * np.pi * np.arange(k) / k
    return np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])


def baseline_ua() -> AdmissibleSurface:
    """``max{phi(|x1|+1/2), phi(|x2|+1/2)}`` with ``phi(r) = (r^2-1)/2`` on the centered unit square."""
    gens = (LinearParabola((0.0, 0.0), (1.0, 0.0), 0.5, 1.0),
            LinearParabola((0.0, 0.0), (0.0, 1.0), 0.5, 1.0))
    sq = square()
    return AdmissibleSurface(PolygonDomain([sq]), [Region(gens, support=(sq,), label="ua")], 3 / 8,
                             {"construction": "ua"})


def equilateral(side: float = 1.0) -> np.ndarray:
    return side * np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]])


def baseline_ub() -> AdmissibleSurface:
    """``max{phi(r_A), phi(r_B), phi(r_C)}`` on the Reuleaux triangle of a unit equilateral triangle."""
    V = equilateral()
    gens = tuple(RadialParabola(tuple(v), 1.0) for v in V)
    return AdmissibleSurface(DiskDomain(V, 1.0), [Region(gens, label="ub")], 1 / 3, {"construction": "ub"})


def besicovitch(n: int, a: float = 1.0, d: float | None = None, **kw) -> tuple[DoublingFamily, AdmissibleSurface]:
    if n < 1:
        raise InvalidParameter("n must be at least 1")
    fam = build_family(n, a=a, d=d, **kw)
    return fam, assemble(fam)


def cone_fixture(slope: float = 1.2) -> AdmissibleSurface:
    """``slope * (|x| - 1)`` on the unit disk; inadmissible once ``slope >= 1``."""
    return AdmissibleSurface(DiskDomain([(0.0, 0.0)], 1.0), [Region((Cone((0.0, 0.0), slope, 1.0),))],
                             slope, {"construction": "cone", "slope": slope})


def flat_fixture(level: float = -0.25, polygon=None) -> AdmissibleSurface:
    poly = square() if polygon is None else np.asarray(polygon, dtype=float)
    return AdmissibleSurface(PolygonDomain([poly]), [Region(level=level, support=(poly,))], -level,
                             {"construction": "flat"})


CATALOG = {"ua": baseline_ua, "ub": baseline_ub, "cone": cone_fixture, "flat": flat_fixture}


# ---------------------------------------------------------------------------
# Packing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CopyPlacement:
    k: float
    shift: tuple[float, float]
    round: int
    polygon: np.ndarray = field(repr=False)


@dataclass(eq=False)
class PackingLayout:
    copies: list[CopyPlacement]
    target: np.ndarray
    target_area: float
    uncovered_area: float
    rounds: int
    j0: int
    delta_pack: float
    half_width: float
    source_center: tuple[float, float]
    history: list[float]
    pitches: list[float]
    leftover: object = field(repr=False, default=None)

    @property
    def uncovered_fraction(self) -> float:
        return self.uncovered_area / self.target_area

    def law_holds(self) -> bool:
        """Leftover after round j stays below ``(1 - delta/2)^j`` of the target."""
        q = 1 - self.delta_pack / 2
        return all(u < q ** j * self.target_area * (1 + 1e-12)
                   for j, u in enumerate(self.history, start=1))

    def summary(self) -> dict:
        return {"copies": len(self.copies), "rounds": self.rounds, "j0": self.j0,
                "delta_pack": self.delta_pack, "uncovered_fraction": self.uncovered_fraction,
                "history": [u / self.target_area for u in self.history], "pitches": self.pitches}


def rounds_needed(delta: float, eps: float) -> int:
    """Smallest ``j`` with ``(1 - delta/2)^j < eps``."""
    if not 0 < delta <= 1 or not 0 < eps < 1:
        raise InvalidParameter("need delta in (0, 1] and eps in (0, 1)")
    q = 1 - delta / 2
    j = max(0, math.floor(math.log(eps) / math.log(q)))
    while q ** j >= eps:
        j += 1
    while j > 0 and q ** (j - 1) < eps:
        j -= 1
    return j


def _source_polygons(source):
    if isinstance(source, AdmissibleSurface):
        if not isinstance(source.domain, PolygonDomain):
            raise InvalidParameter("packing needs a polygonal source domain")
        return source.domain.pieces
    if isinstance(source, PolygonDomain):
        return source.pieces
    arr = np.asarray(source, dtype=float)
    return [arr] if arr.ndim == 2 else list(arr)


def _grid_boxes(geom, pitch: float, origin) -> np.ndarray:
    """Lower-left corners of lattice squares fully inside ``geom``."""
    found = []
    for part in shapely.get_parts(geom):
        x0, y0, x1, y1 = part.bounds
        i0 = math.floor((x0 - origin[0]) / pitch)
        i1 = math.ceil((x1 - origin[0]) / pitch)
        j0 = math.floor((y0 - origin[1]) / pitch)
        j1 = math.ceil((y1 - origin[1]) / pitch)
        ii, jj = np.meshgrid(np.arange(i0, i1), np.arange(j0, j1), indexing="ij")
        lo = np.column_stack([origin[0] + ii.ravel() * pitch, origin[1] + jj.ravel() * pitch])
        if len(lo) == 0:
            continue
        boxes = shapely.box(lo[:, 0], lo[:, 1], lo[:, 0] + pitch, lo[:, 1] + pitch)
        shapely.prepare(part)
        inside = shapely.covers(part, boxes)
        found.append(lo[inside])
    return np.unique(np.concatenate(found), axis=0) if found else np.empty((0, 2))


def pack_copies(source, target, eps: float, max_rounds: int | None = None,
                min_pitch_ratio: float = 2.0 ** -14) -> PackingLayout:
    """Greedy lattice packing of shrunken copies of ``source`` into ``target``.

    Each round picks the coarsest lattice (pitch halving) whose squares inside
    the current leftover cover more than half of it, and puts one centered copy
    of the source, scaled to fit the square, in every such square.
    """
    if not 0 < eps < 1:
        raise InvalidParameter("eps must lie in (0, 1)")
    src = _source_polygons(source)
    src_geom = shapely.union_all([shapely.Polygon(p) for p in src])
    sx0, sy0, sx1, sy1 = src_geom.bounds
    center = np.array([(sx0 + sx1) / 2, (sy0 + sy1) / 2])
    M = max(sx1 - sx0, sy1 - sy0) / 2
    delta = src_geom.area / (2 * M) ** 2
    j0 = rounds_needed(delta, eps)
    if max_rounds is None:
        max_rounds = 4 * j0 + 8

    tgt = ccw(np.asarray(target, dtype=float))
    tgt_geom = shapely.Polygon(tgt)
    tx0, ty0, tx1, ty1 = tgt_geom.bounds
    origin = np.array([tx0, ty0])
    A = tgt_geom.area
    leftover = tgt_geom
    copies: list[CopyPlacement] = []
    history: list[float] = []
    pitches: list[float] = []
    pitch = max(tx1 - tx0, ty1 - ty0)
    min_pitch = pitch * min_pitch_ratio
    rnd = 0
    while leftover.area >= eps * A:
        if rnd >= max_rounds:
            raise ResourceLimit(f"uncovered fraction {leftover.area / A:.6g} after {rnd} rounds",
                                partial=_layout(copies, tgt, A, leftover, rnd, j0, delta, M, center,
                                                history, pitches))
        rnd += 1
        while True:
            lo = _grid_boxes(leftover, pitch, origin)
            if len(lo) * pitch * pitch > leftover.area / 2:
                break
            pitch /= 2
            if pitch < min_pitch:
                raise ResourceLimit("lattice pitch underflow",
                                    partial=_layout(copies, tgt, A, leftover, rnd - 1, j0, delta, M, center,
                                                    history, pitches))
        k = pitch / (2 * M)
        placed = []
        for corner in lo:
            shift = corner + pitch / 2 - k * center
            for p in src:
                placed.append(k * p + shift)
            copies.append(CopyPlacement(k, tuple(float(v) for v in shift), rnd, k * src[0] + shift))
        leftover = shapely.difference(leftover, shapely.union_all([shapely.Polygon(p) for p in placed]))
        history.append(float(leftover.area))
        pitches.append(pitch)
    return _layout(copies, tgt, A, leftover, rnd, j0, delta, M, center, history, pitches)


def _layout(copies, tgt, A, leftover, rnd, j0, delta, M, center, history, pitches):
    return PackingLayout(copies, tgt, A, float(leftover.area), rnd, j0, delta, M,
                         tuple(float(v) for v in center), history, pitches, leftover)


def _leftover_triangles(geom, area_floor: float) -> list[np.ndarray]:
    tris = []
    for part in shapely.get_parts(geom):
        if part.area <= area_floor:
            continue
        for t in shapely.get_parts(shapely.constrained_delaunay_triangles(part)):
            c = np.asarray(t.exterior.coords)[:3]
            if abs(cross2(c[1] - c[0], c[2] - c[0])) > 2 * area_floor:
                tris.append(c)
    return tris


def transfer(surface: AdmissibleSurface, target, eps: float, layout: PackingLayout | None = None):
    """Surface on ``target`` made of transported copies of ``surface`` plus a flat remainder.

    Returns ``(surface, layout)``.
    """
    if layout is None:
        layout = pack_copies(surface, target, eps)
    tgt = layout.target
    regions: list[Region] = []
    c = 0.0
    for cp in layout.copies:
        moved = scale_copy(surface, cp.k, 0.0, cp.shift)
        pieces = tuple(moved.domain.pieces)
        for r in moved.regions:
            if r.support is None:
                r = Region(r.generators, r.level, pieces, r.label)
            regions.append(r)
        c = max(c, moved.c)
    c = c or surface.c
    rest = _leftover_triangles(layout.leftover, 1e-14 * layout.target_area)
    if rest:
        regions.append(Region(level=-c, support=tuple(rest), label="remainder"))
    meta = {"construction": "transfer", "source": surface.meta.get("construction"), "epsilon": eps,
            "copies": len(layout.copies), "uncovered_fraction": layout.uncovered_fraction}
    return AdmissibleSurface(PolygonDomain([tgt]), regions, c, meta), layout
