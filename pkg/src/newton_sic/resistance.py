"""Resistance ``R(u; Omega) = |Omega|^-1 * integral of 1 / (1 + |grad u|^2)``.

Deterministic quadrature brackets the integrand on every cell using the
monotonicity of ``1/(1+g^2)`` in the generator's radial variable, then
refines cells until the bracket is narrow enough.  Flat regions are exact.
The Monte Carlo estimator is kept independent of that machinery and serves
as a cross-check.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import InvalidGeometry, InvalidParameter
from .geometry import BigTriangle
from .surface import AdmissibleSurface, DiskDomain, Region, region_area, support_cells

DEFAULT_TARGET = 1e-3
DEFAULT_MAX_CELLS = 4_000_000
MC_BATCH = 200_000


@dataclass(frozen=True)
class ResistanceEstimate:
    value: float
    error: float
    method: str
    cells: int = 0
    seed: int | None = None
    converged: bool = True

    @property
    def lower(self) -> float:
        return self.value - self.error

    @property
    def upper(self) -> float:
        return self.value + self.error

    def as_dict(self) -> dict:
        return {"value": self.value, "error": self.error, "method": self.method,
                "cells": self.cells, "seed": self.seed, "converged": self.converged}


# ---------------------------------------------------------------------------
# Cell geometry
# ---------------------------------------------------------------------------


def _cell_area(cells: np.ndarray) -> np.ndarray:
    x, y = cells[..., 0], cells[..., 1]
    return 0.5 * np.abs(np.sum(x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y, axis=1))


def _bisect_triangles(T: np.ndarray) -> np.ndarray:
    """Split each triangle at the midpoint of its longest edge; keeps orientation."""
    e = np.stack([np.sum((T[:, (i + 1) % 3] - T[:, i]) ** 2, axis=1) for i in range(3)], axis=1)
    k = np.argmax(e, axis=1)
    idx = (k[:, None] + np.arange(3)) % 3
    R = np.take_along_axis(T, idx[..., None], axis=1)
    a, b, c = R[:, 0], R[:, 1], R[:, 2]
    m = 0.5 * (a + b)
    return np.concatenate([np.stack([a, m, c], axis=1), np.stack([m, b, c], axis=1)])


def _split_squares(Q: np.ndarray) -> np.ndarray:
    lo = Q[:, 0]
    h = 0.5 * (Q[:, 2] - Q[:, 0])
    out = []
    for dx, dy in ((0, 0), (1, 0), (0, 1), (1, 1)):
        o = lo + h * np.array([dx, dy])
        out.append(_squares(o, h))
    return np.concatenate(out)


def _squares(lo: np.ndarray, h: np.ndarray) -> np.ndarray:
    hx, hy = h[:, 0], h[:, 1]
    return np.stack([lo, lo + np.stack([hx, 0 * hy], 1), lo + h, lo + np.stack([0 * hx, hy], 1)], axis=1)


def _disk_classify(domain: DiskDomain, Q: np.ndarray):
    """(inside, outside) flags for axis-aligned squares against an intersection of disks."""
    inside = np.ones(len(Q), dtype=bool)
    outside = np.zeros(len(Q), dtype=bool)
    lo, hi = Q[:, 0], Q[:, 2]
    for c in domain.centers:
        far = np.max(np.hypot(*(Q - c).transpose(2, 0, 1)), axis=1)
        near = np.hypot(*(np.clip(c, lo, hi) - c).T)
        inside &= far <= domain.radius
        outside |= near > domain.radius
    return inside, outside


# ---------------------------------------------------------------------------
# Deterministic quadrature
# ---------------------------------------------------------------------------


@dataclass
class _RegionIntegral:
    lo: float
    hi: float
    cells: int
    converged: bool


def _integrate_region(region: Region, cells: np.ndarray, kind: str, budget: float,
                      max_cells: int, domain=None) -> _RegionIntegral:
    """Refine until the integral bracket width is at most ``budget``."""
    done_lo = done_hi = 0.0
    total_cells = 0
    active = cells
    boundary_mode = kind == "square"
    while True:
        area = _cell_area(active)
        flo, fhi = region.integrand_bounds(active)
        if boundary_mode:
            inside, outside = _disk_classify(domain, active)
            keep = ~outside
            active, area, flo, fhi, inside = active[keep], area[keep], flo[keep], fhi[keep], inside[keep]
            flo = np.where(inside, flo, 0.0)
        lo_c, hi_c = flo * area, fhi * area
        width = hi_c - lo_c
        total = np.sum(width)
        ncells = total_cells + len(active)
        if total <= budget or ncells >= max_cells or len(active) == 0:
            return _RegionIntegral(done_lo + float(np.sum(lo_c)), done_hi + float(np.sum(hi_c)),
                                   ncells, bool(total <= budget))
        # retire cells that are already below the mean share; split the rest
        split = width > budget / max(len(active), 1)
        done_lo += float(np.sum(lo_c[~split]))
        done_hi += float(np.sum(hi_c[~split]))
        total_cells += int(np.count_nonzero(~split))
        budget -= float(np.sum(width[~split]))
        nxt = active[split]
        active = _split_squares(nxt) if kind == "square" else _bisect_triangles(nxt)


def _region_key(region: Region):
    """Key invariant under translation and positive scaling, plus the scale factor."""
    pts = np.concatenate(region.support)
    p0 = pts[0]
    L = float(np.max(np.ptp(pts, axis=0)))
    q = lambda v: tuple(np.round(np.ravel(v), 10))  # noqa: E731
    parts = [q([(np.asarray(p) - p0) / L for p in region.support])]
    for g in region.generators:
        d = {k: getattr(g, k) for k in g.__dataclass_fields__}
        for k in ("focus", "point", "apex"):
            if k in d:
                d[k] = (np.asarray(d[k]) - p0) / L
        for k in ("r0", "offset", "radius"):
            if k in d:
                d[k] = d[k] / L
        parts.append((g.kind,) + tuple((k, q(v)) for k, v in sorted(d.items())))
    return tuple(parts), L


class QuadratureCache:
    """Region integrals keyed up to translation and scaling (integral scales by L^2)."""

    def __init__(self):
        self._store: dict = {}

    def get(self, key):
        return self._store.get(key)

    def put(self, key, value):
        self._store[key] = value

    def __len__(self):
        return len(self._store)


def _deterministic(surface: AdmissibleSurface, target: float, max_cells: int,
                   cache: QuadratureCache | None) -> ResistanceEstimate:
    omega = surface.domain.area
    lo = hi = 0.0
    ncells = 0
    converged = True
    for region in surface.regions:
        A = region_area(region, surface.domain)
        if region.is_flat:
            lo += A
            hi += A
            continue
        budget = 2.0 * target * A
        key = None
        if region.support is not None and cache is not None:
            key, L = _region_key(region)
            hit = cache.get(key)
            if hit is not None:
                lo += hit.lo * L * L
                hi += hit.hi * L * L
                converged &= hit.converged
                continue
        if region.support is None and isinstance(surface.domain, DiskDomain):
            x0, y0, x1, y1 = surface.domain.bounds
            side = max(x1 - x0, y1 - y0) * (1 + 1e-9)
            cells = _squares(np.array([[x0, y0]]), np.array([[side, side]]))
            res = _integrate_region(region, cells, "square", budget, max_cells, surface.domain)
        else:
            cells = support_cells(region, surface.domain)
            res = _integrate_region(region, cells, "triangle", budget, max_cells)
        if key is not None:
            cache.put(key, _RegionIntegral(res.lo / L / L, res.hi / L / L, res.cells, res.converged))
        lo += res.lo
        hi += res.hi
        ncells += res.cells
        converged &= res.converged
    value = 0.5 * (lo + hi) / omega
    error = 0.5 * (hi - lo) / omega
    return ResistanceEstimate(min(value, 1.0), error, "deterministic-quadrature", ncells, None, bool(converged))


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def _monte_carlo(surface: AdmissibleSurface, samples: int, seed: int) -> ResistanceEstimate:
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = surface.domain.bounds
    total = total2 = 0.0
    count = 0
    while count < samples:
        m = min(MC_BATCH, 2 * (samples - count) + 1024)
        P = np.column_stack([rng.uniform(x0, x1, m), rng.uniform(y0, y1, m)])
        b = surface.evaluate(P)
        g = b.raw_gradients[b.inside]
        g = g[np.all(np.isfinite(g), axis=1)][: samples - count]
        f = 1.0 / (1.0 + np.sum(g * g, axis=1))
        total += float(np.sum(f))
        total2 += float(np.sum(f * f))
        count += len(f)
    mean = total / count
    var = max(total2 / count - mean * mean, 0.0)
    return ResistanceEstimate(mean, 3.0 * math.sqrt(var / count), "monte-carlo", count, seed, True)


def resistance(surface: AdmissibleSurface, method: str = "deterministic-quadrature",
               target_error: float = DEFAULT_TARGET, seed: int = 0, samples: int = 1_000_000,
               max_cells: int | None = None, cache: QuadratureCache | None = None) -> ResistanceEstimate:
    """Estimate ``R(u; Omega)``.

    ``method`` is ``deterministic-quadrature`` (alias ``quadrature``) or
    ``monte-carlo`` (alias ``mc``).  Quadrature stops at ``max_cells`` with
    ``converged=False`` rather than raising.
    """
    if not target_error > 0:
        raise InvalidParameter("target_error must be positive")
    method = {"quadrature": "deterministic-quadrature", "mc": "monte-carlo"}.get(method, method)
    if method == "deterministic-quadrature":
        if max_cells is None:
            max_cells = int(os.environ.get("NEWTON_SIC_MAX_CELLS", DEFAULT_MAX_CELLS))
        return _deterministic(surface, target_error, max_cells, cache if cache is not None else QuadratureCache())
    if method == "monte-carlo":
        return _monte_carlo(surface, samples, seed)
    raise InvalidParameter(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# Semi-analytic trapezoid integral
# ---------------------------------------------------------------------------


def trap_resistance_semianalytic(tri: BigTriangle, order: int = 200) -> ResistanceEstimate:
    """Resistance of ``u_ABC`` on the trapezoid, by polar integration about the apex.

    For each direction the radial integral of ``r / (1 + r^2/r0^2)`` is
    ``(r0^2/2) ln(1 + r^2/r0^2)`` between the two parallel sides; the angular
    integral is done adaptively.
    """
    B = np.asarray(tri.B)
    trap_area = abs(_cell_area(np.asarray(tri.trapezoid())[None])[0])
    if trap_area <= 1e-14 * tri.r0 ** 2:
        raise InvalidGeometry("degenerate trapezoid")
    M, N, A, C = (np.asarray(p) for p in (tri.M, tri.N, tri.A, tri.C))
    e = (N - M) / np.linalg.norm(N - M)
    nrm = np.array([-e[1], e[0]])
    h_in = float(np.dot(M - B, nrm))
    if h_in < 0:
        nrm, h_in = -nrm, -h_in
    h_out = float(np.dot(A - B, nrm))
    if h_out <= h_in:
        raise InvalidGeometry("trapezoid sides are not ordered away from the apex")
    base = math.atan2(nrm[1], nrm[0])
    ang = lambda P: math.atan2(P[1] - B[1], P[0] - B[0]) - base  # noqa: E731
    wrap = lambda t: (t + math.pi) % (2 * math.pi) - math.pi  # noqa: E731
    t0, t1 = sorted((wrap(ang(A)), wrap(ang(C))))
    r0sq = tri.r0 ** 2

    def radial(t):
        c2 = math.cos(t) ** 2
        return 0.5 * r0sq * (math.log1p(h_out ** 2 / (c2 * r0sq)) - math.log1p(h_in ** 2 / (c2 * r0sq)))

    val, err = integrate.quad(radial, t0, t1, limit=order, epsabs=1e-13, epsrel=1e-12)
    return ResistanceEstimate(val / trap_area, err / trap_area + 1e-15, "semi-analytic", order, None, True)


# ---------------------------------------------------------------------------
# Bound arithmetic
# ---------------------------------------------------------------------------


def resistance_bound(trap_area: float, small_area: float, kappa_min: float) -> float:
    if trap_area < 0 or small_area < 0 or trap_area + small_area <= 0:
        raise InvalidParameter("areas must be non-negative with a positive sum")
    tot = trap_area + small_area
    return trap_area / tot / (1.0 + kappa_min ** 2) + small_area / tot


@dataclass(frozen=True)
class BoundInputs:
    n: int
    a: float = 1.0

    def __post_init__(self):
        if self.n < 1 or not self.a > 0:
            raise InvalidParameter("need n >= 1 and a > 0")

    @property
    def trap_area_lower(self) -> float:
        return self.a * math.sqrt(self.n)

    @property
    def small_area_upper(self) -> float:
        return self.a * (math.log(self.n) + 1.5)

    @property
    def kappa_lower(self) -> float:
        n, s = self.n, math.sqrt(self.n)
        return (n + 1) / (n + 1 + s) - math.ldexp(self.a, -n) / (n + 1 + s)

    @property
    def bound(self) -> float:
        return resistance_bound(self.trap_area_lower, self.small_area_upper, self.kappa_lower)


def bound_curve(n_values, a: float = 1.0) -> list[tuple[int, float]]:
    """``(n, bound)`` rows from the asymptotic inputs only; nothing is constructed."""
    return [(int(n), BoundInputs(int(n), a).bound) for n in n_values]


def surface_bound(family) -> float:
    """The same bound evaluated on a constructed family's measured quantities."""
    return resistance_bound(family.trap_area, family.small_area.value, family.kappa_min)

