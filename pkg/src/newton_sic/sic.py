"""Single impact checks.

Two independent tests per regular point ``x`` with ``g = grad u(x)``:

* analytic: ``(u(x - t g) - u(x)) / t <= (1 - |g|^2) / 2`` over a grid of
  ``t > 0`` with ``x - t g`` in the closed domain; the reported residual is
  the smallest ``rhs - lhs``;
* raytrace: reflect the falling direction ``(0, 0, -1)`` off the tangent
  plane and follow the outgoing ray until its shadow leaves the domain; the
  clearance is the smallest height of the ray above the graph.

Along the ray ``z - u = t * (rhs - lhs)`` with ``t = 2 s / (1 + |g|^2)``, so
the two agree in sign.  Touching (clearance in ``[-tol, 0]``) is allowed.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .errors import InvalidParameter, NotRegular
from .surface import BOUNDARY_TOL, AdmissibleSurface

T_POINTS = 64
T_FLOOR = 1e-6
NUDGE = 1e-10
DEFAULT_TOL = 1e-9
CHUNK = 2000

PASS, TANGENT, VIOLATION = "pass", "tangent", "violation"


@dataclass(frozen=True)
class SicSample:
    x: tuple[float, float]
    gradient: tuple[float, float]
    residual_analytic: float
    raytrace_clearance: float
    verdict: str


@dataclass(frozen=True)
class SicReport:
    samples: int
    regular: int
    skipped: int
    violations: int
    violations_analytic: int
    violations_raytrace: int
    tangent: int
    disagreements: int
    worst_residual: float
    worst_clearance: float
    tolerance: float
    mode: str

    @property
    def certified(self) -> bool:
        return self.violations == 0

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__} | {"certified": self.certified}


# ---------------------------------------------------------------------------
# Parameter grids
# ---------------------------------------------------------------------------


def _crossings(surface: AdmissibleSurface, X, D):
    """Domain exits and region-interface crossings along ``X + t D``.

    Also returns, per crossing, how far its parameter moves when the ray is
    shifted sideways by the boundary snap distance: ``tol / (|D| sin angle)``,
    large for a ray grazing an edge.
    """
    ext = surface.domain.ray_extent(X, D)
    dom, dsin = surface.domain.exit_crossings(X, D, ext, sines=True)
    ridge, rsin = surface.ridge_index.crossings(X, D, ext, sines=True)
    last = np.array([c.max() if len(c) else e for c, e in zip(dom, ext)])
    speed = np.hypot(*np.asarray(D).T)
    cross, slack = [], []
    for i in range(len(X)):
        sines = np.concatenate([dsin[i], rsin[i]])
        with np.errstate(divide="ignore"):
            slack.append(np.minimum(BOUNDARY_TOL / (speed[i] * sines), ext[i]))
        cross.append(np.concatenate([dom[i], ridge[i]]))
    return last, cross, slack


def _grid(tmax, cross, slack, tol):
    """Geometric grid on ``(0, tmax]`` plus crossings and their two-sided nudges.

    Returns the parameters and a matching array of per-column position slack.
    """
    tmax = np.asarray(tmax, float)
    lo = np.minimum(np.maximum(tol, T_FLOOR * tmax), tmax)
    frac = np.linspace(0.0, 1.0, T_POINTS)
    base = lo[:, None] * (tmax / lo)[:, None] ** frac
    K = max((len(c) for c in cross), default=0)
    C = np.full((len(tmax), K), np.nan)
    W = np.zeros((len(tmax), K))
    for i, (c, w) in enumerate(zip(cross, slack)):
        C[i, : len(c)] = c
        W[i, : len(w)] = w
    E = np.concatenate([C, C * (1 - NUDGE), C * (1 + NUDGE)], axis=1)
    E[~((E > 0) & (E <= tmax[:, None]))] = np.nan
    return np.concatenate([base, E], axis=1), np.concatenate([np.zeros_like(base), W, W, W], axis=1)


def _sweep(surface, X, D, T):
    """``u`` at ``X + T D`` (NaN where the point leaves the closed domain).

    The geometric-grid columns are interior points in exact arithmetic, so
    they keep the one-sided region value even when rounding puts them within
    the boundary snap distance; only the crossing columns, which are meant to
    land on interfaces and on the boundary, are snapped.  Also returns the
    mask of snapped points.
    """
    Y = X[:, None, :] + T[..., None] * D[:, None, :]
    vals = np.full(T.shape, np.nan)
    snapped = np.zeros(T.shape, dtype=bool)
    for cols, tol in ((slice(0, T_POINTS), 0.0), (slice(T_POINTS, None), BOUNDARY_TOL)):
        Tc = T[:, cols]
        ok = np.isfinite(Tc)
        if not ok.any():
            continue
        b = surface.evaluate(Y[:, cols][ok], boundary_tol=tol)
        sub = np.full(Tc.shape, np.nan)
        sub[ok] = np.where(b.inside, b.values, np.nan)
        vals[:, cols] = sub
        snap = np.zeros(Tc.shape, dtype=bool)
        snap[ok] = b.inside & (b.region < 0)
        snapped[:, cols] = snap
    return vals, snapped


def _credited(gap, snapped, credit):
    """At snapped boundary points an apparent penetration within ``credit`` counts as touching."""
    return np.where(snapped & (gap < 0), np.minimum(gap + credit, 0.0), gap)


# ---------------------------------------------------------------------------
# Batched checks
# ---------------------------------------------------------------------------


def analytic_residuals(surface: AdmissibleSurface, X, u, G, tol: float = DEFAULT_TOL) -> np.ndarray:
    X, G = np.asarray(X, float), np.asarray(G, float)
    g2 = np.sum(G * G, axis=1)
    rhs = 0.5 * (1 - g2)
    out = np.full(len(X), 0.5)
    mv = g2 > 0
    if not np.any(mv):
        return out
    Xm, Gm, um, rm = X[mv], G[mv], u[mv], rhs[mv]
    D = -Gm
    last, cross, slack = _crossings(surface, Xm, D)
    # beyond t = -u/rhs the left side cannot exceed the right side (u <= 0)
    with np.errstate(divide="ignore"):
        cap = np.where(rm > 0, -um / rm, np.inf)
    tmax = np.minimum(last, cap)
    T, W = _grid(tmax, cross, slack, tol)
    V, snapped = _sweep(surface, Xm, D, T)
    lhs = (V - um[:, None]) / T
    # at a snapped boundary point lhs = -u/t, whose drift over the slack is |u| W / t^2
    gap = _credited(rm[:, None] - lhs, snapped, np.abs(um)[:, None] * W / T ** 2)
    res = np.nanmin(np.where(np.isfinite(lhs), gap, np.nan), axis=1)
    out[mv] = np.where(np.isfinite(res), res, rm)
    return out


def reflected_direction(G) -> np.ndarray:
    """Specular reflection of ``(0, 0, -1)`` off the graph with gradient ``G``."""
    G = np.atleast_2d(np.asarray(G, float))
    nrm = np.column_stack([-G, np.ones(len(G))])
    nrm /= np.linalg.norm(nrm, axis=1)[:, None]
    v = np.array([0.0, 0.0, -1.0])
    return v - 2 * (nrm @ v)[:, None] * nrm


def raytrace_clearances(surface: AdmissibleSurface, X, u, G, tol: float = DEFAULT_TOL) -> np.ndarray:
    X, G = np.asarray(X, float), np.asarray(G, float)
    V3 = reflected_direction(G)
    H, vz = V3[:, :2], V3[:, 2]
    moving = np.hypot(*H.T) > 0
    out = np.empty(len(X))
    # vertical rebound: the ray rises straight up over its own foot point
    out[~moving] = T_FLOOR
    if not np.any(moving):
        return out
    Xm, Hm, um, zm = X[moving], H[moving], u[moving], vz[moving]
    last, cross, slack = _crossings(surface, Xm, Hm)
    # once the ray is above z = 0 it clears every non-positive graph
    with np.errstate(divide="ignore"):
        rise = np.where(zm > 0, -um / zm, np.inf)
    smax = np.minimum(last, rise)
    S, W = _grid(smax, cross, slack, tol)
    V, snapped = _sweep(surface, Xm, Hm, S)
    Z = um[:, None] + S * zm[:, None]
    # a boundary hit whose position is uncertain by W moves the ray height by |vz| W
    gap = _credited(Z - V, snapped, np.abs(zm)[:, None] * W)
    clr = np.nanmin(np.where(np.isfinite(V), gap, np.nan), axis=1)
    out[moving] = np.where(np.isfinite(clr), clr, np.inf)
    return out


def verdicts(residual, clearance, tol: float = DEFAULT_TOL) -> np.ndarray:
    bad = (residual < -tol) | (clearance < -tol)
    touch = ~bad & (clearance <= 0)
    return np.where(bad, VIOLATION, np.where(touch, TANGENT, PASS))


def _regular(surface, x):
    b = surface.evaluate(np.asarray(x, float).reshape(1, 2))
    if not b.regular[0]:
        raise NotRegular(f"{tuple(np.ravel(x))} is not a regular point")
    return b.values, b.gradients


def sic_analytic(surface: AdmissibleSurface, x, tol: float = DEFAULT_TOL) -> float:
    u, g = _regular(surface, x)
    return float(analytic_residuals(surface, np.reshape(x, (1, 2)), u, g, tol)[0])


def sic_raytrace(surface: AdmissibleSurface, x, tol: float = DEFAULT_TOL) -> float:
    u, g = _regular(surface, x)
    return float(raytrace_clearances(surface, np.reshape(x, (1, 2)), u, g, tol)[0])


def sic_sample(surface: AdmissibleSurface, x, tol: float = DEFAULT_TOL) -> SicSample:
    u, g = _regular(surface, x)
    X = np.reshape(np.asarray(x, float), (1, 2))
    r = analytic_residuals(surface, X, u, g, tol)
    c = raytrace_clearances(surface, X, u, g, tol)
    return SicSample(tuple(X[0]), tuple(g[0]), float(r[0]), float(c[0]), str(verdicts(r, c, tol)[0]))


# ---------------------------------------------------------------------------
# Sampling and reports
# ---------------------------------------------------------------------------


def sample_domain(surface: AdmissibleSurface, count: int, sampler: str = "halton", seed: int = 0) -> np.ndarray:
    """``count`` points of the closed domain: scrambled Halton, uniform random, or a grid."""
    if count < 1:
        raise InvalidParameter("count must be at least 1")
    x0, y0, x1, y1 = surface.domain.bounds
    lo, span = np.array([x0, y0]), np.array([x1 - x0, y1 - y0])
    if sampler == "grid":
        m = int(np.ceil(np.sqrt(count * (span[0] * span[1]) / surface.domain.area))) + 1
        while True:
            gx, gy = np.meshgrid(np.linspace(x0, x1, m + 2)[1:-1], np.linspace(y0, y1, m + 2)[1:-1])
            P = np.column_stack([gx.ravel(), gy.ravel()])
            P = P[surface.domain.contains(P)]
            if len(P) >= count:
                return P[:count]
            m = int(m * 1.3) + 1
    if sampler == "halton":
        gen = qmc.Halton(d=2, scramble=True, seed=seed)
        draw = gen.random
    elif sampler == "random":
        rng = np.random.default_rng(seed)
        draw = lambda k: rng.random((k, 2))  # noqa: E731
    else:
        raise InvalidParameter(f"unknown sampler {sampler!r}")
    got = []
    need = count
    while need > 0:
        P = lo + span * draw(max(2 * need, 256))
        P = P[surface.domain.contains(P)][:need]
        got.append(P)
        need -= len(P)
    return np.concatenate(got)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("NEWTON_SIC_THREADS", "1")))
    except ValueError:
        return 1


def check_points(surface: AdmissibleSurface, X, tol: float = DEFAULT_TOL, mode: str = "both"):
    """Residuals, clearances and verdicts for the regular points among ``X``.

    Returns ``(mask_regular, residual, clearance, verdict)``; the last three
    cover only the regular points.  Chunks run on up to ``NEWTON_SIC_THREADS``
    threads and are stitched back in order.
    """
    if mode not in ("analytic", "raytrace", "both"):
        raise InvalidParameter(f"unknown mode {mode!r}")
    X = np.asarray(X, float).reshape(-1, 2)
    b = surface.evaluate(X)
    reg = b.regular
    Xr, ur, Gr = X[reg], b.values[reg], b.gradients[reg]

    def work(sl):
        r = (analytic_residuals(surface, Xr[sl], ur[sl], Gr[sl], tol) if mode != "raytrace"
             else np.full(sl.stop - sl.start, np.inf))
        c = (raytrace_clearances(surface, Xr[sl], ur[sl], Gr[sl], tol) if mode != "analytic"
             else np.full(sl.stop - sl.start, np.inf))
        return r, c

    chunks = [slice(i, min(i + CHUNK, len(Xr))) for i in range(0, len(Xr), CHUNK)]
    nt = min(_threads(), max(len(chunks), 1))
    if nt > 1:
        with ThreadPoolExecutor(nt) as ex:
            parts = list(ex.map(work, chunks))
    else:
        parts = [work(sl) for sl in chunks]
    res = np.concatenate([p[0] for p in parts]) if parts else np.empty(0)
    clr = np.concatenate([p[1] for p in parts]) if parts else np.empty(0)
    return reg, res, clr, verdicts(res, clr, tol)


def sic_report(surface: AdmissibleSurface, count: int = 10_000, tol: float = DEFAULT_TOL,
               mode: str = "both", sampler: str = "halton", seed: int = 0) -> SicReport:
    X = sample_domain(surface, count, sampler, seed)
    reg, res, clr, ver = check_points(surface, X, tol, mode)
    bad_a = res < -tol
    bad_r = clr < -tol
    both = mode == "both"
    return SicReport(
        samples=len(X), regular=int(reg.sum()), skipped=int((~reg).sum()),
        violations=int(np.count_nonzero(ver == VIOLATION)),
        violations_analytic=int(bad_a.sum()), violations_raytrace=int(bad_r.sum()),
        tangent=int(np.count_nonzero(ver == TANGENT)),
        disagreements=int(np.count_nonzero(bad_a != bad_r)) if both else 0,
        worst_residual=float(res.min()) if len(res) and mode != "raytrace" else float("nan"),
        worst_clearance=float(clr.min()) if len(clr) and mode != "analytic" else float("nan"),
        tolerance=tol, mode=mode)


def gradient_bound_check(surface: AdmissibleSurface, samples: int = 10_000, seed: int = 0) -> float:
    """Largest ``|grad u|`` over the regular points of a sample."""
    b = surface.evaluate(sample_domain(surface, samples, "halton", seed))
    g = b.gradients[b.regular]
    return float(np.max(np.hypot(*g.T))) if len(g) else 0.0


def focal_distances(X, u, G, focus) -> np.ndarray:
    """Distance from ``(focus, 0)`` to each reflected ray's supporting line."""
    V = reflected_direction(G)
    P = np.column_stack([np.asarray(X, float), np.asarray(u, float)])
    F = np.array([focus[0], focus[1], 0.0])
    w = F - P
    along = np.sum(w * V, axis=1) / np.sum(V * V, axis=1)
    return np.linalg.norm(w - along[:, None] * V, axis=1)
