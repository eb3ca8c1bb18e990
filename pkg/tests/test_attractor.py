import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fidendrite.attractor import (
    BUDGET_ENV,
    ResourceError,
    bounding_disk,
    cover,
    dilate_cells,
    expand_tree,
    hausdorff_upper,
    hutchinson_image,
    image_cells,
    leaf_count,
    read_pbm,
)
from fidendrite.ifs_core import SimSystem, Similarity, compose

from conftest import SQRT3_4


def test_gasket_bounding_disk(gasket):
    d = bounding_disk(gasket)
    assert d.center == 0 and math.isclose(d.radius, 1.0)
    for v in (0, 1, complex(0.5, 2 * SQRT3_4)):
        assert d.contains(v)


def test_degenerate_disk_has_positive_radius():
    d = bounding_disk(SimSystem((Similarity(0.5), Similarity(0.5))))
    assert d.radius > 0


def test_vicsek_disk_contains_unit_square(vicsek):
    d = bounding_disk(vicsek)
    for z in (0, 1, 1j, 1 + 1j):
        assert d.contains(z)


@pytest.mark.parametrize("center", [None, "centroid", 0.3 + 0.1j])
def test_disk_invariance(gasket, vicsek, rotated_vicsek, center):
    for system in (gasket, vicsek, rotated_vicsek):
        d = bounding_disk(system, center)
        for s in system.maps:
            img = d.image(s)
            assert abs(img.center - d.center) + img.radius <= d.radius * (1 + 1e-12)


def test_leaf_counts(gasket, vicsek):
    # with R = 1 a level-n leaf has diameter 2 * 2^-n
    assert leaf_count(gasket, eps=1.0 + 1e-9) == 3
    assert leaf_count(gasket, eps=0.5 + 1e-9) == 9
    for system in (gasket, vicsek):
        assert leaf_count(system, eps=2 * bounding_disk(system).radius) == 1
    R = bounding_disk(vicsek).radius
    assert leaf_count(vicsek, eps=2 * R / 9) == 25


def test_cover_error_bound_and_cell_size(gasket):
    c = cover(gasket, eps=0.01)
    assert c.cell_size <= 0.01
    assert c.error_bound <= 2 * 0.01


def test_cover_contains_known_points(gasket, vicsek):
    c = cover(gasket, eps=0.01)
    for z in (0, 1, 0.5, 0.25 + 0.5 * SQRT3_4, complex(0.5, 2 * SQRT3_4)):
        assert c.near(z, c.error_bound)
    cv = cover(vicsek, eps=0.01)
    for z in (0, 1, 1j, 1 + 1j, 0.5 + 0.5j):
        assert cv.near(z, cv.error_bound)


def test_cover_cells_near_the_set(gasket):
    # every cell center is within error_bound of a point of a much finer cover
    c = cover(gasket, eps=0.02)
    fine = cover(gasket, eps=0.002)
    d = fine.distance_to(c.centers)
    assert d.max() <= c.error_bound + fine.error_bound


def test_hausdorff_examples(gasket, cantor):
    a = cover(gasket, eps=0.02)
    assert hausdorff_upper(a, a) <= 2 * a.error_bound + 1e-15
    b1 = hausdorff_upper(cover(gasket, eps=0.1), cover(gasket, eps=0.05))
    b2 = hausdorff_upper(cover(gasket, eps=0.05), cover(gasket, eps=0.025))
    assert b2 < b1
    c1 = cover(cantor, (1,), eps=0.01)
    c2 = cover(cantor, (2,), eps=0.01)
    assert hausdorff_upper(c1, c2) >= 1 / 3 - c1.error_bound - c2.error_bound


def test_hutchinson_containment(gasket, vicsek):
    for system in (gasket, vicsek):
        c = cover(system, eps=0.02)
        img = hutchinson_image(system, c)
        k = math.ceil(c.error_bound / c.cell_size)
        grown = dilate_cells(c.cells, k)
        assert all(tuple(x) in grown for x in img.tolist())


def test_halving_eps_never_increases_error(vicsek):
    errs = [cover(vicsek, eps=e).error_bound for e in (0.2, 0.1, 0.05, 0.025)]
    assert all(b <= a for a, b in zip(errs, errs[1:]))


def test_piece_consistency(gasket):
    word = (1, 3)
    s = compose(gasket, word)
    eps = 0.01
    piece = cover(gasket, word, eps=eps)
    whole = cover(gasket, eps=eps / s.ratio)
    mapped = image_cells(whole, s, h=piece.cell_size)
    mapped_pts = (mapped[:, 0] + 0.5) * piece.cell_size + 1j * (mapped[:, 1] + 0.5) * piece.cell_size
    tol = piece.error_bound + s.ratio * whole.error_bound + 2 * piece.cell_size
    assert piece.distance_to(mapped_pts).max() <= tol
    ref = cover(gasket, eps=eps).distance_to(piece.centers)
    assert ref.max() <= 2 * piece.error_bound


def test_budget_exceeded(gasket, monkeypatch):
    with pytest.raises(ResourceError) as info:
        cover(gasket, eps=1e-4, budget=1000)
    assert info.value.reached is not None and info.value.reached > 1e-4
    monkeypatch.setenv(BUDGET_ENV, "500")
    with pytest.raises(ResourceError):
        cover(gasket, eps=1e-3)


def test_eps_must_be_positive(gasket):
    with pytest.raises(ValueError):
        cover(gasket, eps=0)


def test_pbm_roundtrip(vicsek):
    c = cover(vicsek, eps=0.05)
    data = c.to_pbm()
    assert data.startswith(b"P4\n")
    np.testing.assert_array_equal(read_pbm(data), c.bitmap())
    assert c.bitmap().sum() == len(c)


def test_svg_has_rectangles(segment):
    svg = cover(segment, eps=0.1).to_svg()
    assert svg.startswith("<?xml") and svg.count("<rect") >= 1 and svg.rstrip().endswith("</svg>")


def test_expand_tree_words(gasket):
    leaves = expand_tree(gasket, (2,), max_depth=2)
    # words are relative to the target
    words = sorted(leaves.word(k) for k in range(len(leaves)))
    assert words == [(a, b) for a in (1, 2, 3) for b in (1, 2, 3)]


@settings(max_examples=30, deadline=None)
@given(st.floats(0.02, 0.5), st.integers(1, 3))
def test_every_leaf_point_is_covered(eps, k):
    from fidendrite.cli import load_spec
    system = load_spec("gasket").to_system()
    c = cover(system, eps=eps)
    pts = [compose(system, (k, j)).fixed_point() for j in (1, 2, 3)]
    assert max(c.distance_to(pts)) <= c.error_bound
