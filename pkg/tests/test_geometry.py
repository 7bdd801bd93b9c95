from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from newton_sic.errors import DegenerateGeometry, InvalidGeometry, InvalidParameter
from newton_sic.geometry import (BigTriangle, build_family, delta_double, make_initial_triangle,
                                 point_segment_distance, polygon_area, union_area, verify_disjoint)


def unit_square(x0=0.0, y0=0.0, w=1.0, h=1.0):
    return np.array([[x0, y0], [x0 + w, y0], [x0 + w, y0 + h], [x0, y0 + h]])


def raster_oracle(polys, n=1500):
    """Independent midpoint-grid area of a union of convex polygons."""
    P = np.concatenate(polys)
    x0, y0 = P.min(axis=0)
    x1, y1 = P.max(axis=0)
    xs = x0 + (np.arange(n) + 0.5) * (x1 - x0) / n
    ys = y0 + (np.arange(n) + 0.5) * (y1 - y0) / n
    gx, gy = np.meshgrid(xs, ys)
    hit = np.zeros(gx.shape, dtype=bool)
    for p in polys:
        p = p if polygon_area(p) > 0 else p[::-1]
        inside = np.ones(gx.shape, dtype=bool)
        for a, b in zip(p, np.roll(p, -1, axis=0)):
            inside &= (b[0] - a[0]) * (gy - a[1]) - (b[1] - a[1]) * (gx - a[0]) >= 0
        hit |= inside
    return hit.mean() * (x1 - x0) * (y1 - y0)


# make_initial_triangle ------------------------------------------------------


def test_initial_triangle_placement():
    t = make_initial_triangle(1, 1, 1)
    np.testing.assert_allclose(t.A, [-1, -1])
    np.testing.assert_allclose(t.B, [0, 1])
    np.testing.assert_allclose(t.C, [1, -1])
    np.testing.assert_allclose(t.M, [-0.5, 0])
    np.testing.assert_allclose(t.N, [0.5, 0])


def test_initial_triangle_kappa():
    t = make_initial_triangle(1, 1, 1)
    assert t.r0 == pytest.approx(math.sqrt(5))
    assert t.kappa == pytest.approx(1 / math.sqrt(5))


def test_thin_trapezoid_area():
    t = make_initial_triangle(2, 1e-4, 1)
    assert abs(polygon_area(t.trapezoid())) == pytest.approx(2e-4, rel=0.01)


@pytest.mark.parametrize("args", [(0, 1, 1), (1, -1, 1), (1, 1, 0), (float("nan"), 1, 1)])
def test_initial_triangle_rejects_bad_parameters(args):
    with pytest.raises(InvalidParameter):
        make_initial_triangle(*args)


def test_big_triangle_validation():
    with pytest.raises(DegenerateGeometry):
        BigTriangle(A=(0, 0), B=(1, 0), C=(2, 0), M=(0.5, 0), N=(1.5, 0))
    with pytest.raises(InvalidGeometry):
        BigTriangle(A=(-1, -1), B=(0, 1), C=(1, -1), M=(-0.5, 0), N=(0.25, 0.5))


# delta_double ---------------------------------------------------------------


def test_doubling_points_unit_case():
    left, right, tr = delta_double(make_initial_triangle(1, 1, 1), 1.0)
    np.testing.assert_allclose(tr.M_prime, [0.5, 2])
    np.testing.assert_allclose(tr.N_prime, [-0.5, 2])
    np.testing.assert_allclose(tr.T, [0, 0], atol=1e-15)
    np.testing.assert_allclose(left.B, tr.M_prime)
    np.testing.assert_allclose(right.B, tr.N_prime)


def test_doubling_rb_ratio_and_area_gain():
    tri = make_initial_triangle(1, 1, 1)
    _, _, tr = delta_double(tri, 1.0)
    rb = np.linalg.norm(tr.R - tri.B)
    mb = np.linalg.norm(tri.M - tri.B)
    assert rb / mb == pytest.approx(1 / 3, rel=1e-12)
    gain = abs(polygon_area(np.array([tr.R, tri.B, tr.N_prime])))
    assert gain == pytest.approx((1 / 3) * (1.0 * 1.0 / 2), rel=1e-12)


def test_doubling_rejects_nonpositive_delta():
    with pytest.raises(InvalidParameter):
        delta_double(make_initial_triangle(), 0.0)


@settings(max_examples=60, deadline=None)
@given(a=st.floats(0.2, 3), d=st.floats(0.05, 3), h=st.floats(0.2, 3), delta=st.floats(0.05, 3))
def test_doubling_invariants(a, d, h, delta):
    tri = make_initial_triangle(a, d, h)
    left, right, tr = delta_double(tri, delta)
    mb = np.linalg.norm(tri.M - tri.B)
    assert np.linalg.norm(tr.R - tri.B) == pytest.approx(delta / (1 + 2 * delta) * mb, rel=1e-9)
    # The two separating segments partition MN.
    np.testing.assert_allclose(left.M, tri.M, atol=1e-12)
    np.testing.assert_allclose(left.N, right.M, atol=1e-12)
    np.testing.assert_allclose(right.N, tri.N, atol=1e-12)
    assert left.separating_length == pytest.approx(tri.separating_length / 2, rel=1e-12)
    for t in (left, right):
        assert t.small_height == pytest.approx((1 + delta) * tri.small_height, rel=1e-9)
    # R on MB, S on NB, P and Q on the line through B parallel to MN.
    for X, P0, P1 in ((tr.R, tri.M, tri.B), (tr.S, tri.N, tri.B)):
        assert point_segment_distance(X, P0, P1)[0] < 1e-9 * tri.r0
    for X in (tr.P, tr.Q):
        assert abs(X[1] - tri.B[1]) < 1e-9 * tri.r0
    # New trapezoids are disjoint and inside the old one.
    assert verify_disjoint([left.trapezoid(), right.trapezoid()]).disjoint
    old = abs(polygon_area(tri.trapezoid()))
    both = union_area([tri.trapezoid(), left.trapezoid(), right.trapezoid()]).value
    assert both == pytest.approx(old, rel=1e-9)


# build_family ---------------------------------------------------------------


def test_family_generation_zero():
    fam = build_family(0, a=1.0, d=1.0)
    assert len(fam.triangles) == 1
    assert fam.small_area.value == pytest.approx(0.5)


def test_family_three_steps_against_raster():
    fam = build_family(3, a=1.0)
    S3 = fam.small_area.value
    assert 0.5 < S3 < math.log(3) + 1.5
    oracle = raster_oracle(fam.small_triangles(), n=2000)
    assert S3 == pytest.approx(oracle, rel=5e-3)


def test_family_five_steps_disjoint_and_area():
    fam = build_family(5, a=1.0)
    assert len(fam.triangles) == 32
    assert verify_disjoint(fam.trapezoids(), tol=1e-10, mode="full").disjoint
    assert fam.trap_area > math.sqrt(5)


def test_family_heights_and_segments():
    n = 6
    fam = build_family(n, a=1.0)
    assert fam.heights == pytest.approx(tuple(m + 1.0 for m in range(n + 1)))
    xs = [(t.M[0], t.N[0]) for t in fam.triangles]
    for (l0, r0), (l1, _) in zip(xs, xs[1:]):
        assert abs(r0 - l1) < 1e-12
    assert xs[0][0] == pytest.approx(-0.5, abs=1e-12)
    assert xs[-1][1] == pytest.approx(0.5, abs=1e-12)
    for t in fam.triangles:
        assert t.separating_length == pytest.approx(2.0 ** -n, rel=1e-9)
        assert abs(t.small_height - (n + 1)) < 1e-9 * (n + 1)


def test_family_area_increments():
    fam = build_family(6, a=1.0)
    S = [e.value for e in fam.small_area_history()]
    for m in range(len(S) - 1):
        delta = fam.deltas[m]
        assert S[m + 1] - S[m] < delta ** 2 * fam.a * fam.heights[m] + 1e-12


def test_family_annulus_characterization():
    fam = build_family(4, a=1.0)
    for t in fam.triangles:
        inner, outer = t.annulus()
        assert inner == pytest.approx(t.kappa * t.r0, rel=1e-9)
        assert outer == pytest.approx(t.r0, rel=1e-9)


def test_family_kappa_bound():
    for n in (1, 3, 6):
        fam = build_family(n, a=1.0)
        assert fam.kappa_min >= fam.kappa_lower_bound - 1e-12


def test_family_rejects_bad_input():
    with pytest.raises(InvalidParameter):
        build_family(-1)
    with pytest.raises(InvalidParameter):
        build_family(0)


# union_area / verify_disjoint -------------------------------------------------


def test_union_of_identical_squares():
    assert union_area([unit_square(), unit_square()]).value == pytest.approx(1.0)


def test_union_of_disjoint_squares():
    assert union_area([unit_square(), unit_square(3, 0)]).value == pytest.approx(2.0)


def test_union_methods_agree_on_first_family():
    tris = build_family(1, a=1.0).small_triangles()
    ex = union_area(tris, method="exact")
    ra = union_area(tris, method="raster", resolution=1e-3)
    assert abs(ex.value - ra.value) <= ex.error + ra.error + 1e-12


def test_union_rejects_self_intersecting():
    bow = np.array([[0, 0], [1, 1], [1, 0], [0, 1]], dtype=float)
    with pytest.raises(InvalidGeometry):
        union_area([bow])


def test_disjoint_edge_sharing_squares():
    rep = verify_disjoint([unit_square(), unit_square(1, 0)], tol=1e-12)
    assert rep.disjoint


def test_overlapping_strip():
    rep = verify_disjoint([unit_square(), unit_square(0.5, 0)], tol=1e-12)
    assert not rep.disjoint
    assert rep.worst_overlap == pytest.approx(0.5)
    assert rep.worst_pair == (0, 1)


def test_family_eight_trapezoids_disjoint():
    fam = build_family(8, a=1.0)
    assert verify_disjoint(fam.trapezoids(), tol=1e-10).disjoint


def test_union_methods_agree_on_random_triangle_sets():
    rng = np.random.default_rng(7)
    for _ in range(100):
        tris = []
        for _ in range(rng.integers(1, 6)):
            p = rng.uniform(-1, 1, size=(3, 2))
            if abs(polygon_area(p)) > 1e-3:
                tris.append(p)
        if not tris:
            continue
        ex = union_area(tris, method="exact")
        ra = union_area(tris, method="raster", resolution=2e-3)
        assert abs(ex.value - ra.value) <= ex.error + ra.error + 1e-12
