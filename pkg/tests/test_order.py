import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fidendrite.attractor import cover
from fidendrite.ifs_core import Address, compose, eval_address
from fidendrite.order import (
    count_addresses,
    count_components,
    order_report,
    stable_neighborhood,
    zerner_bounds,
    zerner_constant,
)

from conftest import SQRT3_4


@pytest.mark.parametrize(
    "name, x, count",
    [
        ("gasket", 0.5, 2),
        ("gasket", 0.0, 1),
        ("vicsek", 0.5 + 0.5j, 1),
        ("vicsek", (1 + 1j) / 3, 2),
        ("segment", 0.0, 1),
        ("segment", 0.5, 2),
        ("gasket", 0.3 + 0.3j, 0),
    ],
)
def test_address_counts(name, x, count, gasket, vicsek, segment):
    system = {"gasket": gasket, "vicsek": vicsek, "segment": segment}[name]
    res = count_addresses(system, x)
    assert res.count == count
    assert all(c == count for _, c in res.per_scale[-2:])


def test_generic_point_has_one_address(gasket):
    x = eval_address(gasket, Address.parse("1(23)"))
    assert count_addresses(gasket, x).count == 1


def test_cluster_input(gasket, fi_cache):
    for cl in fi_cache("gasket").critical_points():
        assert count_addresses(gasket, cl).count == 2


def _cantor_oracle(a: float, kmax: int = 4) -> int:
    """Exact M_a for the middle-thirds set, using closed windows of side 3^-k."""
    best = 0
    for k in range(kmax):
        hi = a * math.sqrt(2) * 3.0 ** -k
        ns = [n for n in range(k, k + 8) if hi / 3 < 3.0 ** -n <= hi]
        L = Fraction(1, 3 ** k)
        for n in ns:
            size = Fraction(1, 3 ** n)
            lefts = [Fraction(0)]
            for _ in range(n):
                lefts = [x / 3 for x in lefts] + [x / 3 + Fraction(2, 3) for x in lefts]
            # an optimal window starts at the right end of some piece
            for t in [x + size for x in lefts] + [x - L for x in lefts]:
                c = sum(1 for x in lefts if x <= t + L and x + size >= t)
                best = max(best, c)
    return best


@pytest.mark.parametrize("a", [1 / 3, 1 / 2, 1.0, 2.0])
def test_cantor_zerner_below_exact_value(cantor, a):
    est = zerner_constant(cantor, a=a, depth=8)
    assert est.stabilized and est.lower_estimate
    assert 1 <= est.value <= _cantor_oracle(a)


def test_gasket_zerner_stabilizes(gasket):
    est = zerner_constant(gasket, a=1.0, depth=8)
    assert est.stabilized
    assert [d for d, _ in est.per_depth] == [6, 7, 8]


def test_zerner_nonincreasing_in_a(gasket, cantor):
    for system, depth in ((gasket, 7), (cantor, 8)):
        vals = [zerner_constant(system, a=a, depth=depth).value for a in (1 / 3, 1 / 2, 1, 2)]
        assert all(b <= v for v, b in zip(vals, vals[1:])), vals


def test_zerner_rejects_bad_a(gasket):
    with pytest.raises(ValueError):
        zerner_constant(gasket, a=0)


def test_critical_counts_below_m1(gasket, vicsek, fi_cache):
    for name, system in (("gasket", gasket), ("vicsek", vicsek)):
        m1 = zerner_constant(system, a=1.0, depth=6).value
        for cl in fi_cache(name).critical_points():
            assert count_addresses(system, cl).count <= m1


@pytest.mark.parametrize(
    "name, x, n, boundary",
    [("gasket", 0.5, 2, 4), ("vicsek", 0.5 + 0.5j, 4, 4), ("segment", 0.0, 1, 1), ("vicsek", (1 + 1j) / 3, 2, 2)],
)
def test_stable_neighborhood_examples(name, x, n, boundary, gasket, vicsek, segment):
    system = {"gasket": gasket, "vicsek": vicsek, "segment": segment}[name]
    nb = stable_neighborhood(system, x)
    assert nb.n_components == n
    assert len(nb.boundary) == boundary
    assert nb.history[-1][1] == nb.history[-2][1] == n
    counts = [c for _, c in nb.history]
    assert counts == sorted(counts)  # never decreases with depth


def test_stable_neighborhood_off_attractor(cantor):
    with pytest.raises(ValueError):
        stable_neighborhood(cantor, 0.5)


def test_neighborhood_covers_nearby_points(gasket, vicsek):
    # every point of K within delta of x lies in one of the J pieces
    for system, x in ((gasket, 0.5), (vicsek, 0.5 + 0.5j)):
        nb = stable_neighborhood(system, x)
        full = cover(system, eps=nb.delta / 20)
        near = full.centers[np.abs(full.centers - x) <= nb.delta - full.error_bound]
        assert len(near) > 0
        pieces = [cover(system, w, eps=nb.delta / 20) for w in nb.J]
        d = np.min([p.distance_to(near) for p in pieces], axis=0)
        assert d.max() <= 2 * full.error_bound


def test_count_components_with_hole():
    # a plus sign of cells, centered at the origin, minus a small ball is four arms
    h = 0.1
    cells = np.array([(i, 0) for i in range(-10, 10)] + [(0, j) for j in range(-10, 10) if j != 0])
    assert count_components(cells, h)[0] == 1
    assert count_components(cells, h, hole=0.05 + 0.05j, hole_radius=0.3)[0] == 4


def test_gasket_midpoint_report(gasket, fi_cache):
    rep = order_report(gasket, 0.5, fi_cache("gasket"))
    assert rep.address_count == 2
    assert rep.n_components == 2
    assert rep.ord_estimate == 4
    assert rep.upper_bounds["M1"] >= rep.address_count


def test_vicsek_piece_reports(vicsek, fi_cache):
    rep = order_report(vicsek, (5,), fi_cache("vicsek"), dendrite=True)
    assert (rep.address_count, rep.n_components, rep.ord_estimate) == (8, 4, 4)
    assert "M1/2" in rep.upper_bounds
    corner = order_report(vicsek, (1,), fi_cache("vicsek"), dendrite=True)
    assert (corner.n_components, corner.ord_estimate) == (1, 1)


def test_zerner_bound_keys(gasket):
    b = zerner_bounds(gasket, 1, 5, False)
    m1 = b["M1"]
    assert b["M1^2*s"] == m1 ** 2 and b["M1^3*s^2"] == m1 ** 3
    assert "M1/2" not in b
    assert "M1/2" in zerner_bounds(gasket, 1, 5, True)


@settings(max_examples=15, deadline=None)
@given(word=st.lists(st.integers(1, 3), min_size=0, max_size=4))
def test_images_of_the_midpoint_have_two_addresses(word):
    # S_w(1/2) is again a cut point where two pieces meet
    from fidendrite.cli import load_spec
    system = load_spec("gasket").to_system()
    x = compose(system, tuple(word))(0.5)
    assert count_addresses(system, x).count == 2
