import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fidendrite.graph import (
    BLACK,
    WHITE,
    IntersectionGraph,
    Outcome,
    TreeStatus,
    build_graph,
    dendrite_verdict,
    format_cycle,
    graph_by_refinement,
    is_tree,
    refine_graph,
    relabel,
    to_dot,
)


def G(white, black, edges, level=None):
    return IntersectionGraph(white, black, frozenset(edges), level=level)


@pytest.mark.parametrize(
    "name, n, counts",
    [
        ("gasket", 1, (3, 3, 6)),
        ("gasket", 2, (9, 12, 24)),
        ("gasket", 3, (27, 39, 78)),
        ("vicsek", 1, (5, 4, 8)),
        ("vicsek", 2, (25, 24, 48)),
    ],
)
def test_graph_sizes(name, n, counts, fi_cache, gasket, vicsek):
    system = {"gasket": gasket, "vicsek": vicsek}[name]
    g = build_graph(system, n, fi_cache(name))
    assert (len(g.white), len(g.black), len(g.edges)) == counts


def test_gasket_first_graph_is_a_hexagon(gasket, fi_cache):
    res = is_tree(build_graph(gasket, 1, fi_cache("gasket")))
    assert res.status is TreeStatus.NOT_TREE
    assert format_cycle(res.cycle) == ["1", "p/0", "3", "p/2", "2", "p/1", "1"]


def test_vicsek_graphs_are_trees(vicsek, fi_cache):
    for n in (1, 2, 3):
        assert is_tree(build_graph(vicsek, n, fi_cache("vicsek")))


def test_black_vertices_have_degree_two(gasket, vicsek, fi_cache):
    for name, system in (("gasket", gasket), ("vicsek", vicsek)):
        g = build_graph(system, 2, fi_cache(name))
        assert all(g.degree(b, BLACK) >= 2 for b in g.black)


@pytest.mark.parametrize("name", ["gasket", "vicsek"])
@pytest.mark.parametrize("n", [2, 3])
def test_refinement_matches_direct_construction(name, n, gasket, vicsek, fi_cache):
    system = {"gasket": gasket, "vicsek": vicsek}[name]
    assert graph_by_refinement(system, n, fi_cache(name)) == build_graph(system, n, fi_cache(name))


def test_tree_has_single_black_per_pair(vicsek, fi_cache):
    # a tree graph means every pair of first-level pieces meets at most once
    rep = fi_cache("vicsek")
    assert is_tree(build_graph(vicsek, 1, rep)) and rep.s == 1


def test_is_tree_cases():
    assert is_tree(G([1], [], [])).status is TreeStatus.TREE
    path = G(["a", "b"], ["p"], [("a", "p"), ("b", "p")])
    assert is_tree(path)
    split = G(["a", "b"], [], [])
    res = is_tree(split)
    assert res.status is TreeStatus.DISCONNECTED and res.components == 2
    square = G(["a", "b"], ["p", "q"], [("a", "p"), ("b", "p"), ("a", "q"), ("b", "q")])
    res = is_tree(square)
    assert res.status is TreeStatus.NOT_TREE and len(res.cycle) == 5
    assert res.cycle[0] == (WHITE, "a") and res.cycle[0] == res.cycle[-1]


def test_graph_validation():
    with pytest.raises(ValueError):
        G(["a"], ["p"], [("a", "q")])
    with pytest.raises(ValueError):
        G(["a", "a"], [], [])


def test_single_white_template_is_isomorphic(gasket, fi_cache):
    g = build_graph(gasket, 1, fi_cache("gasket"))
    tmpl = G([("new",)], [], [], level=1)
    l = (1,)
    gluing = {p: ("new",) for p in g.neighbors(l, WHITE)[:1]}
    with pytest.raises(ValueError):
        refine_graph(g, l, tmpl, gluing)  # not injective once both neighbors are glued
    # rename l to a fresh white: the refined graph is the relabeled original
    nbrs = g.neighbors(l, WHITE)
    tmpl = G(["X"], nbrs, [("X", p) for p in nbrs])
    out = refine_graph(g, l, tmpl, {p: p for p in nbrs})
    assert out == relabel(g, lambda w: "X" if w == l else w, lambda b: b)


def test_gasket_refinement_keeps_the_cycle(gasket, fi_cache):
    g = build_graph(gasket, 1, fi_cache("gasket"))
    assert not is_tree(refine_graph(g, (1,), *_gasket_template(g, (1,))))


def _gasket_template(g, l):
    # a path of three whites hanging off the two neighbors of l
    p, q = g.neighbors(l, WHITE)
    tmpl = G(["A", "B", "C"], ["ab", "bc"], [("A", "ab"), ("B", "ab"), ("B", "bc"), ("C", "bc")])
    return tmpl, {p: "A", q: "C"}


def test_refine_rejects_bad_gluings():
    g = G(["a", "b"], ["p"], [("a", "p"), ("b", "p")])
    t = G(["X", "Y"], ["q"], [("X", "q"), ("Y", "q")])
    with pytest.raises(ValueError):
        refine_graph(g, "a", t, {})
    with pytest.raises(ValueError):
        refine_graph(g, "a", t, {"p": "X", "zz": "Y"})
    with pytest.raises(ValueError):
        refine_graph(g, "a", t, {"p": "nope"})
    with pytest.raises(ValueError):
        refine_graph(g, "a", G(["b"], [], []), {"p": "b"})
    with pytest.raises(ValueError):
        refine_graph(g, "zz", t, {})


def _random_tree(rng, prefix, size):
    white, black, edges = [f"{prefix}w0"], [], []
    for k in range(size):
        if black and rng.random() < 0.5:
            w = f"{prefix}w{len(white)}"
            white.append(w)
            edges.append((w, rng.choice(black)))
        else:
            b = f"{prefix}b{len(black)}"
            black.append(b)
            edges.append((rng.choice(white), b))
    return G(white, black, edges)


def _random_refinement(rng):
    g = _random_tree(rng, "", rng.randint(0, 12))
    t = _random_tree(rng, "T", rng.randint(0, 12))
    l = rng.choice(g.white)
    nbrs = g.neighbors(l, WHITE)
    verts = list(t.white) + list(t.black)
    if len(verts) < len(nbrs):
        return None
    return g, l, t, dict(zip(nbrs, rng.sample(verts, len(nbrs))))


def test_random_tree_refinements_stay_trees():
    rng = random.Random(12345)
    done = 0
    while done < 1000:
        case = _random_refinement(rng)
        if case is None:
            continue
        g, l, t, gluing = case
        assert is_tree(refine_graph(g, l, t, gluing)), (g, l, t, gluing)
        done += 1


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_refinement_preserves_trees(seed):
    case = _random_refinement(random.Random(seed))
    if case is not None:
        assert is_tree(refine_graph(*case))


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_refinement_preserves_cycles(seed):
    # refining a white that is not on a cycle, or on it, never removes the cycle
    rng = random.Random(seed)
    case = _random_refinement(rng)
    if case is None:
        return
    g, l, t, gluing = case
    extra = g.white[-1]
    cyc = G(list(g.white) + ["c1"], list(g.black) + ["cb1", "cb2"],
            set(g.edges) | {(extra, "cb1"), ("c1", "cb1"), (extra, "cb2"), ("c1", "cb2")})
    if l == extra:
        return
    assert not is_tree(refine_graph(cyc, l, t, gluing))


def test_dendrite_verdicts(gasket, vicsek, cantor):
    v = dendrite_verdict(gasket)
    assert v.outcome is Outcome.NOT_DENDRITE and v.witness is not None
    v = dendrite_verdict(vicsek)
    assert v.outcome is Outcome.DENDRITE and v.checked_levels == 3
    v = dendrite_verdict(cantor)
    assert v.outcome is Outcome.INCONCLUSIVE and "disconnected" in v.note


def test_dot_is_deterministic(gasket, fi_cache):
    g = build_graph(gasket, 2, fi_cache("gasket"))
    a = to_dot(g)
    assert a == to_dot(build_graph(gasket, 2, fi_cache("gasket"))) == g.to_dot()
    assert a.startswith("graph") and a.count("shape=box") >= 1
    cyc = is_tree(g).cycle
    assert "red" in to_dot(g, highlight=cyc) or "bold" in to_dot(g, highlight=cyc)
