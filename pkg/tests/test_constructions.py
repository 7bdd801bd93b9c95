from __future__ import annotations

import math

import numpy as np
import pytest
import shapely

from newton_sic.constructions import (CATALOG, baseline_ua, baseline_ub, besicovitch, pack_copies,
                                      regular_polygon, rounds_needed, square, transfer)
from newton_sic.errors import InvalidParameter, ResourceLimit
from newton_sic.geometry import verify_disjoint
from newton_sic.resistance import resistance
from newton_sic.sic import sic_report
from newton_sic.surface import eval


def test_ua_values():
    s = baseline_ua()
    for x2 in np.linspace(-0.5, 0.5, 9):
        assert eval(s, (0.5, x2)).value == pytest.approx(0.0, abs=1e-15)
        assert eval(s, (-0.5, x2)).value == pytest.approx(0.0, abs=1e-15)
    assert eval(s, (0.0, 0.0)).value == -3 / 8
    assert s.domain.area == pytest.approx(1.0)


def test_ub_values():
    s = baseline_ub()
    assert eval(s, (0.5, math.sqrt(3) / 6)).value == pytest.approx(-1 / 3)
    # Midpoint of the arc opposite vertex A, centred at A.
    p = np.array([math.cos(math.pi / 6), math.sin(math.pi / 6)])
    assert eval(s, p).value == pytest.approx(0.0, abs=1e-14)
    assert s.domain.area == pytest.approx((math.pi - math.sqrt(3)) / 2)


def test_besicovitch_first_step():
    fam, s = besicovitch(1)
    assert len(fam.triangles) == 2
    assert len([r for r in s.regions if not r.is_flat]) == 2
    a, b = fam.small_triangles()
    assert shapely.Polygon(a).intersection(shapely.Polygon(b)).area > 0
    with pytest.raises(InvalidParameter):
        besicovitch(0)


def test_besicovitch_resistance_decreases():
    r4 = resistance(besicovitch(4)[1], target_error=1e-3)
    r8 = resistance(besicovitch(8)[1], target_error=1e-3)
    assert r8.upper < r4.lower
    assert r8.lower > 0.5


def test_catalog_names():
    assert set(CATALOG) == {"ua", "ub", "cone", "flat"}


def test_rounds_needed():
    assert rounds_needed(0.5, 0.01) == 17
    assert 0.75 ** 17 < 0.01 <= 0.75 ** 16
    assert rounds_needed(1.0, 0.05) == 5
    with pytest.raises(InvalidParameter):
        rounds_needed(0.0, 0.1)


def test_pack_square_into_itself():
    lay = pack_copies(square(), square(), 0.5)
    assert len(lay.copies) == 1
    assert lay.delta_pack == pytest.approx(1.0)
    assert lay.uncovered_fraction == pytest.approx(1 - lay.delta_pack, abs=1e-12)
    assert lay.copies[0].k == pytest.approx(1.0)


def test_pack_disk_layout_invariants():
    target = regular_polygon(64)
    lay = pack_copies(square(), target, 0.2)
    assert lay.uncovered_fraction < 0.2
    assert lay.law_holds()
    polys = [c.polygon for c in lay.copies]
    assert verify_disjoint(polys, tol=1e-10).disjoint
    tgt = shapely.Polygon(target).buffer(1e-12)
    assert all(tgt.covers(shapely.Polygon(p)) for p in polys)


def test_pack_round_budget():
    with pytest.raises(ResourceLimit) as info:
        pack_copies(square(), regular_polygon(64), 1e-4, max_rounds=1)
    assert info.value.partial is not None
    assert info.value.partial.rounds == 1


def test_pack_rejects_bad_epsilon():
    with pytest.raises(InvalidParameter):
        pack_copies(square(), square(), 1.5)


def test_transfer_identity():
    s = baseline_ua()
    t, lay = transfer(s, square(), 0.5)
    assert len(lay.copies) == 1
    r0 = resistance(s, target_error=1e-3)
    r1 = resistance(t, target_error=1e-3)
    assert r1.value == pytest.approx(r0.value, abs=1e-12)


def test_transfer_remainder_contributes_its_area():
    s = baseline_ua()
    t, lay = transfer(s, regular_polygon(16), 0.3)
    rs = resistance(s, target_error=1e-3)
    rt = resistance(t, target_error=1e-3)
    f = lay.uncovered_fraction
    assert abs(rt.value - ((1 - f) * rs.value + f)) <= rt.error + rs.error
    assert sic_report(t, count=1500).certified
