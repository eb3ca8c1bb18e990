import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fidendrite.ifs_core import Similarity
from fidendrite.slope import (
    arg_increment,
    cumulative_arg,
    invariant_arc,
    parameter_match,
    slope_parameter,
    spiral_arc,
    strip_range,
    subarc_deviation,
)


def test_arg_increment_examples():
    assert math.isclose(arg_increment([1, 1j], 0), math.pi / 2)
    assert arg_increment([1, 2, 3], 0) == 0
    circle = [np.exp(2j * math.pi * k / 8) for k in range(9)]
    assert math.isclose(arg_increment(circle, 0), 2 * math.pi)
    assert math.isclose(arg_increment(circle[::-1], 0), -2 * math.pi)


def test_arg_increment_rejects_anchor_vertex():
    with pytest.raises(ValueError):
        arg_increment([1, 0, 1j], 0)


def test_long_segments_are_split():
    # a single segment that passes close to z0 turns by almost pi
    got = arg_increment([1 + 1e-3j, -1 + 1e-3j], 0)
    assert math.isclose(got, math.pi - 2 * math.atan(1e-3), rel_tol=1e-9)


def test_cumulative_arg_ends_at_increment():
    poly = np.array([2, 1 + 1j, 1j, -1, -1j])
    c = cumulative_arg(poly, 0)
    assert c[0] == 0 and math.isclose(c[-1], arg_increment(poly, 0))


@pytest.mark.parametrize("r, theta, m", [(0.5, math.pi / 2, 0), (0.5, math.pi / 2, -1), (1 / 3, -1.0, 0), (0.7, 0.0, 1)])
def test_spiral_closed_form(r, theta, m):
    S = Similarity(r, theta, False, 0.2 - 0.1j)
    arc = spiral_arc(S, y=1.0, windings=m)
    est = slope_parameter(arc)
    expected = (theta + 2 * math.pi * m) / math.log(r)
    assert math.isclose(est.lam, expected, rel_tol=1e-9, abs_tol=1e-12)
    assert est.winding == m
    # what remains is the sagitta of the chords, quadratic in the step
    c2 = math.log(r) ** 2 + (theta + 2 * math.pi * m) ** 2
    assert est.residual <= 2 * (1 + abs(expected)) * c2 / (8 * 64 ** 2)
    fine = slope_parameter(spiral_arc(S, y=1.0, windings=m, samples=256))
    assert fine.residual <= est.residual / 10 + 1e-12


def test_spiral_reference_value():
    est = slope_parameter(spiral_arc(Similarity(0.5, math.pi / 2)))
    assert round(est.lam, 5) == -2.26618


def test_doubling_the_period_keeps_lambda():
    arc = spiral_arc(Similarity(0.5, math.pi / 2), windings=1)
    a = slope_parameter(arc).lam
    b = slope_parameter(arc.doubled()).lam
    assert math.isclose(a, b, rel_tol=1e-9)


def test_vicsek_diagonal_arc(vicsek):
    arc = invariant_arc(vicsek, (5,), 0.2 + 0.2j)
    assert abs(arc.anchor - (0.5 + 0.5j)) <= 1e-12
    est = slope_parameter(arc)
    assert abs(est.lam) <= 1e-9
    # the arc lies on the diagonal
    assert np.max(np.abs(arc.polyline.real - arc.polyline.imag)) <= 1e-9


def test_gasket_and_segment_arcs_are_straight(gasket, segment):
    for system, i, seed in ((gasket, (1,), 0.3), (segment, (1,), 0.3), (gasket, (2,), 0.7)):
        est = slope_parameter(invariant_arc(system, i, seed))
        assert abs(est.lam) <= 1e-6


def test_rotated_vicsek_arms_agree(rotated_vicsek):
    from fidendrite.slope import _local_cover
    loc = _local_cover(rotated_vicsek, (5,))
    lams = []
    for seed in loc.seeds():
        arc = invariant_arc(rotated_vicsek, (5,), seed, local=loc)
        est = slope_parameter(arc)
        assert est.fundamental_count == 4
        lams.append(est.lam)
    assert len(lams) == 4
    assert max(lams) - min(lams) <= 1e-3 and abs(lams[0]) <= 1e-6


def test_arc_is_invariant(vicsek, gasket):
    # the period map sends the arc into itself
    for system, i, seed in ((vicsek, (5,), 0.2 + 0.2j), (gasket, (1,), 0.3 + 0.1j)):
        arc = invariant_arc(system, i, seed)
        img = arc.period_map(arc.polyline)
        fund = arc.polyline
        d = np.min(np.abs(img[:, None] - fund[None, :]), axis=1)
        seg = np.max(np.abs(np.diff(fund)))
        assert d.max() <= seg + 1e-12


def _strip_check(arc, est, rng, n=100):
    poly = arc.polyline[:-1]
    L = len(poly) - 1
    for _ in range(n):
        s1, s2 = sorted(rng.uniform(0, L) for _ in range(2))
        dev = subarc_deviation(poly, arc.anchor, est.lam, s1, s2)
        assert dev <= est.residual + 1e-9


def test_strip_property_spiral():
    arc = spiral_arc(Similarity(0.6, 1.2, False, 0.3j), windings=1)
    _strip_check(arc, slope_parameter(arc), random.Random(1))


def test_strip_property_vicsek(rotated_vicsek):
    from fidendrite.slope import _local_cover
    loc = _local_cover(rotated_vicsek, (5,))
    arc = invariant_arc(rotated_vicsek, (5,), loc.seeds()[0], local=loc)
    _strip_check(arc, slope_parameter(arc), random.Random(2))


@settings(max_examples=50, deadline=None)
@given(lam=st.floats(-5, 5), seed=st.integers(0, 1000))
def test_strip_range_bounds_every_subarc(lam, seed):
    rng = np.random.default_rng(seed)
    poly = np.cumsum(rng.normal(size=12) + 1j * rng.normal(size=12)) + 5 + 5j
    lo, hi = strip_range(poly, 0, lam)
    for _ in range(10):
        s1, s2 = sorted(rng.uniform(0, len(poly) - 1, 2))
        assert subarc_deviation(poly, 0, lam, s1, s2) <= hi - lo + 1e-9


def test_parameter_match_examples(gasket, vicsek, fi_cache):
    for name, system, z in (("gasket", gasket, 0.5), ("vicsek", vicsek, (1 + 1j) / 3)):
        cl = min(fi_cache(name).critical_points(), key=lambda c: abs(c.center - z))
        res = parameter_match(system, cl)
        assert res.status == "matched" and abs(res.lam) <= 1e-3
        assert len(res.table) >= 2
