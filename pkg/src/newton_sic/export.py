"""Mesh, layout and grid exports: OBJ height field, SVG regions, CSV samples."""

from __future__ import annotations

import csv
import math

import numpy as np
from scipy.spatial import Delaunay

from .errors import InvalidParameter
from .surface import AdmissibleSurface, DiskDomain


def grid_points(surface: AdmissibleSurface, resolution: float) -> np.ndarray:
    """Square-lattice points of spacing ``resolution`` inside the closed domain."""
    if not resolution > 0:
        raise InvalidParameter("resolution must be positive")
    x0, y0, x1, y1 = surface.domain.bounds
    xs = np.arange(x0, x1 + resolution / 2, resolution)
    ys = np.arange(y0, y1 + resolution / 2, resolution)
    gx, gy = np.meshgrid(xs, ys)
    P = np.column_stack([gx.ravel(), gy.ravel()])
    return P[surface.domain.contains(P)]


def boundary_points(domain, spacing: float) -> np.ndarray:
    if isinstance(domain, DiskDomain):
        pts = []
        for c, a0, sw in domain.arcs():
            k = max(2, math.ceil(sw * domain.radius / spacing))
            t = a0 + sw * np.arange(k) / k
            pts.append(c + domain.radius * np.column_stack([np.cos(t), np.sin(t)]))
        return np.concatenate(pts)
    segs = domain.boundary_segments
    pts = []
    for a, b in segs:
        k = max(1, math.ceil(np.hypot(*(b - a)) / spacing))
        t = np.arange(k) / k
        pts.append(a + t[:, None] * (b - a))
    return np.concatenate(pts)


def height_mesh(surface: AdmissibleSurface, resolution: float):
    """``(vertices (N, 3), faces (M, 3))`` of the graph over the domain.

    Boundary vertices lie exactly on the domain boundary, where ``z = 0``.
    """
    inner = grid_points(surface, resolution)
    if len(inner):
        keep = surface.domain.boundary_distance(inner) > 0.25 * resolution
        inner = inner[keep]
    P = np.concatenate([boundary_points(surface.domain, resolution), inner])
    tri = Delaunay(P)
    F = tri.simplices
    cent = P[F].mean(axis=1)
    F = F[surface.domain.contains(cent, tol=0.0)]
    z = surface.values(P)
    z = np.where(np.isfinite(z), z, 0.0)
    return np.column_stack([P, z]), F


def export_obj(surface: AdmissibleSurface, path, resolution: float = 0.02) -> tuple[int, int]:
    V, F = height_mesh(surface, resolution)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# height field, {len(V)} vertices, {len(F)} faces\n")
        for x, y, z in V:
            fh.write(f"v {x:.17g} {y:.17g} {z:.17g}\n")
        for a, b, c in F + 1:
            fh.write(f"f {a} {b} {c}\n")
    return len(V), len(F)


def _path_d(polys) -> str:
    parts = []
    for p in polys:
        p = np.asarray(p)
        parts.append("M " + " L ".join(f"{x:.12g} {y:.12g}" for x, y in p) + " Z")
    return " ".join(parts)


def region_fill(region) -> str:
    if region.is_flat:
        return "#4a6fa5"
    if region.kind == "max-of":
        return "#e0a458"
    return "#c4d6b0"


def export_svg(surface: AdmissibleSurface, path, width: float = 800.0) -> int:
    """One ``<path>`` per region; the viewBox is the domain's bounding box."""
    x0, y0, x1, y1 = surface.domain.bounds
    w, h = x1 - x0, y1 - y0
    px = width
    py = width * h / w if w > 0 else width
    lw = 1e-3 * max(w, h)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{px:.0f}" height="{py:.0f}" '
           f'viewBox="{x0:.12g} {y0:.12g} {w:.12g} {h:.12g}">',
           f'<g transform="matrix(1 0 0 -1 0 {y0 + y1:.12g})" stroke="#222" stroke-width="{lw:.6g}" '
           'stroke-linejoin="round">']
    count = 0
    for i, r in enumerate(surface.regions):
        polys = r.support if r.support is not None else surface.domain.outline_pieces()
        out.append(f'<path id="region-{i}" data-kind="{r.kind}" fill="{region_fill(r)}" '
                   f'fill-opacity="0.85" fill-rule="nonzero" d="{_path_d(polys)}"/>')
        count += 1
    out.append("</g>\n</svg>\n")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out))
    return count


def export_csv(surface: AdmissibleSurface, path, resolution: float = 0.02) -> int:
    P = grid_points(surface, resolution)
    u = surface.values(P)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x1", "x2", "u"])
        for (x, y), v in zip(P, u):
            wr.writerow([f"{x:.17g}", f"{y:.17g}", f"{v:.17g}"])
    return len(P)


EXPORTERS = {"obj": export_obj, "svg": export_svg, "csv": export_csv}
