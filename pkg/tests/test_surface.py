from __future__ import annotations

import math

import numpy as np
import pytest

from newton_sic.constructions import baseline_ua, baseline_ub, besicovitch
from newton_sic.errors import InvalidParameter, OutOfDomain
from newton_sic.geometry import build_family, ccw, make_initial_triangle, verify_disjoint
from newton_sic.resistance import resistance
from newton_sic.sic import gradient_bound_check, sample_domain
from newton_sic.surface import (Region, assemble, dimple_surface, eval, min_dimple_depth, scale_copy,
                                shrink)


def trapezoid_samples(tri, count, seed=0):
    """Rejection samples strictly inside the trapezoid, away from its edges."""
    rng = np.random.default_rng(seed)
    T = ccw(tri.trapezoid())
    lo, hi = T.min(axis=0), T.max(axis=0)
    out = []
    while sum(len(o) for o in out) < count:
        P = rng.uniform(lo, hi, size=(4 * count, 2))
        ok = np.ones(len(P), dtype=bool)
        for a, b in zip(T, np.roll(T, -1, axis=0)):
            e = b - a
            side = e[0] * (P[:, 1] - a[1]) - e[1] * (P[:, 0] - a[0])
            ok &= side / np.hypot(*e) > 1e-3
        out.append(P[ok])
    return np.concatenate(out)[:count]


# dimple_surface ---------------------------------------------------------------


def test_dimple_zero_on_sides():
    tri = make_initial_triangle(1, 1, 1)
    s = dimple_surface(tri)
    for P0, P1 in ((tri.A, tri.B), (tri.B, tri.C), (tri.C, tri.A)):
        for t in np.linspace(0, 1, 11):
            assert abs(eval(s, P0 + t * (P1 - P0)).value) < 1e-12


def test_dimple_radial_values():
    tri = make_initial_triangle(1, 1, 1)
    s = dimple_surface(tri)
    r0, k = tri.r0, tri.kappa
    # A point on the trapezoid at distance r0 from B is a base vertex.
    assert eval(s, tri.A).value == pytest.approx(0.0, abs=1e-12)
    # The closest trapezoid points to B lie on MN at distance kappa*r0.
    x = np.array([0.0, 0.0])
    assert np.linalg.norm(x - tri.B) == pytest.approx(k * r0)
    below = x + np.array([0.0, -1e-7])
    v = eval(s, below).value
    assert v == pytest.approx(-(1 - k ** 2) * r0 / 2, abs=1e-6)


def test_dimple_gradient_is_radial():
    tri = make_initial_triangle(1, 1, 1)
    s = dimple_surface(tri)
    x = np.array([0.3, -0.5])
    smp = eval(s, x)
    np.testing.assert_allclose(smp.gradient, (x - tri.B) / tri.r0, atol=1e-14)
    g = np.hypot(*smp.gradient)
    assert tri.kappa <= g < 1


def test_dimple_finite_difference_gradient():
    tri = make_initial_triangle(1.3, 0.8, 1.1)
    s = dimple_surface(tri)
    X = trapezoid_samples(tri, 10_000)
    b = s.evaluate(X)
    assert b.regular.all()
    h = 1e-5
    fd = np.column_stack([
        (s.values(X + [h, 0]) - s.values(X - [h, 0])) / (2 * h),
        (s.values(X + [0, h]) - s.values(X - [0, h])) / (2 * h),
    ])
    assert np.max(np.abs(fd - b.gradients)) < 1e-6
    np.testing.assert_allclose(b.gradients, (X - tri.B) / tri.r0, atol=1e-14)


def test_dimple_rejects_shallow_flat():
    tri = make_initial_triangle(1, 1, 1)
    with pytest.raises(InvalidParameter):
        dimple_surface(tri, c=0.5 * min_dimple_depth(tri))
    deeper = dimple_surface(tri, c=2 * min_dimple_depth(tri))
    assert deeper.c == pytest.approx(2 * min_dimple_depth(tri))


def test_flat_region_requires_negative_level():
    with pytest.raises(InvalidParameter):
        Region(level=0.0, support=(np.eye(3)[:, :2],))


# assemble ---------------------------------------------------------------------


def test_assemble_generation_zero_is_single_dimple():
    fam = build_family(0, a=1.0, d=1.0)
    s = assemble(fam)
    tri = fam.triangles[0]
    assert s.c == pytest.approx((1 - tri.kappa ** 2) * tri.r0 / 2)
    ref = dimple_surface(tri)
    X = sample_domain(ref, 500, seed=1)
    np.testing.assert_allclose(s.values(X), ref.values(X), atol=1e-14)


def test_assemble_two_steps_structure():
    fam, s = besicovitch(2)
    para = [r for r in s.regions if not r.is_flat]
    flat = [r for r in s.regions if r.is_flat]
    assert len(para) == 4 and len(flat) == 1
    supports = [r.support[0] for r in para]
    assert verify_disjoint(supports, tol=1e-12, mode="full").disjoint


@pytest.mark.parametrize("n", [1, 3, 5])
def test_small_triangle_centroids_are_flat(n):
    fam, s = besicovitch(n)
    for t in fam.triangles:
        x = (t.B + t.M + t.N) / 3
        assert eval(s, x).value == pytest.approx(-s.c, abs=1e-14)


@pytest.mark.parametrize("n", [2, 4, 6])
def test_parabola_on_separating_segment_above_flat(n):
    fam, s = besicovitch(n)
    for t, r in zip(fam.triangles, s.regions):
        ts = np.linspace(0, 1, 17)[:, None]
        P = t.M + ts * (t.N - t.M)
        v = r.generators[0].value(P)
        assert np.all(v >= -s.c - 1e-12)


@pytest.mark.parametrize("factory", [baseline_ua, lambda: besicovitch(4)[1]])
def test_boundary_values_vanish(factory):
    s = factory()
    P = s.domain.sample_boundary(1000, np.random.default_rng(3))
    assert np.max(np.abs(s.values(P))) < 1e-9


def test_boundary_values_vanish_on_arcs():
    s = baseline_ub()
    P = s.domain.sample_boundary(1000, np.random.default_rng(3))
    assert np.max(np.abs(s.values(P))) < 1e-9


@pytest.mark.parametrize("factory", [baseline_ua, baseline_ub, lambda: besicovitch(5)[1]])
def test_interior_negative_and_gradient_below_one(factory):
    s = factory()
    X = sample_domain(s, 3000, seed=2)
    keep = s.domain.boundary_distance(X) > 1e-6
    assert np.all(s.values(X[keep]) < 0)
    assert gradient_bound_check(s, 5000) < 1


# eval ---------------------------------------------------------------------------


def test_eval_ua_center_is_ridge():
    smp = eval(baseline_ua(), (0.0, 0.0))
    assert smp.value == pytest.approx(-3 / 8)
    assert smp.gradient is None and not smp.regular


def test_eval_ua_off_center():
    smp = eval(baseline_ua(), (0.25, 0.0))
    assert smp.value == pytest.approx(-0.21875)
    assert smp.regular
    np.testing.assert_allclose(smp.gradient, (0.75, 0.0), atol=1e-14)


def test_eval_ub_center():
    smp = eval(baseline_ub(), (0.5, math.sqrt(3) / 6))
    assert smp.value == pytest.approx(-1 / 3)


def test_eval_outside_raises():
    with pytest.raises(OutOfDomain):
        eval(baseline_ua(), (2.0, 0.0))
    with pytest.raises(OutOfDomain):
        eval(baseline_ub(), (0.5, -0.2))


def test_boundary_vertices_of_dimple():
    tri = make_initial_triangle(1, 1, 1)
    s = dimple_surface(tri)
    for v in (tri.A, tri.B, tri.C, tri.M, tri.N):
        smp = eval(s, v)
        assert smp.value == pytest.approx(0.0, abs=1e-12)
        assert not smp.regular


# scale_copy / shrink -------------------------------------------------------------


def test_scale_copy_identity():
    s = baseline_ua()
    t = scale_copy(s)
    X = sample_domain(s, 1000, seed=4)
    np.testing.assert_array_equal(s.values(X), t.values(X))


@pytest.mark.parametrize("k,angle,shift,reflect", [(0.3, 0.7, (2.0, -1.0), False), (2.5, -1.1, (0.0, 3.0), True)])
def test_scale_copy_transport(k, angle, shift, reflect):
    s = besicovitch(3)[1]
    t = scale_copy(s, k, angle, shift, reflect)
    X = sample_domain(s, 2000, seed=5)
    R = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    Xm = X * [1, -1] if reflect else X
    Y = k * Xm @ R.T + np.asarray(shift)
    bs, bt = s.evaluate(X), t.evaluate(Y)
    np.testing.assert_allclose(bt.values, k * bs.values, atol=1e-12)
    both = bs.regular & bt.regular
    assert both.mean() > 0.95
    np.testing.assert_allclose(np.hypot(*bt.gradients[both].T), np.hypot(*bs.gradients[both].T), atol=1e-12)
    r0 = resistance(s, target_error=1e-3)
    r1 = resistance(t, target_error=1e-3)
    assert abs(r0.value - r1.value) <= r0.error + r1.error


def test_shrink_identity_and_scaling():
    s = baseline_ua()
    X = sample_domain(s, 1000, seed=6)
    np.testing.assert_array_equal(shrink(s, 1.0).values(X), s.values(X))
    half = shrink(s, 0.5)
    np.testing.assert_allclose(half.values(X), 0.5 * s.values(X), atol=1e-15)
    assert gradient_bound_check(half) == pytest.approx(0.5 * gradient_bound_check(s), rel=1e-12)
    with pytest.raises(InvalidParameter):
        shrink(s, 0.0)
    with pytest.raises(InvalidParameter):
        shrink(s, 1.5)
