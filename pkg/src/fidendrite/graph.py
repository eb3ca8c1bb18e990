"""Intersection graphs of systems of similarities.

The graph at level n is bipartite: white vertices are the words of length n,
black vertices are the points where distinct level-n pieces meet, and a white
vertex is joined to every black point lying in its piece.

A black vertex is named by a pair ``(w, k)``: the point S_w(p_k), where p_k is
the k-th level-1 critical point (in the order of ``FIReport.critical_points``).
The same point usually has several such names; the canonical one is the
shortest prefix, then the lexicographically smallest, then the smallest k.
This naming is stable across levels, so refinement and direct construction can
be compared exactly.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Mapping

import numpy as np

from .attractor import ResourceError, leaf_budget
from .ifs_core import SimSystem, Word, compose
from .intersection import (
    FIReport,
    IntersectionCluster,
    Verdict,
    fi_report,
    overlap_groups,
    pieces_near,
)

WHITE = "white"
BLACK = "black"


def _word_key(w):
    return (len(w), tuple(w))


def _black_key(b):
    if isinstance(b, tuple) and len(b) == 2 and isinstance(b[0], tuple):
        return (0, len(b[0]), b[0], b[1])
    return (1, repr(b))


def _white_key(w):
    if isinstance(w, tuple) and all(isinstance(x, int) for x in w):
        return (0,) + _word_key(w)
    return (1, repr(w))


@dataclass(frozen=True, eq=False)
class IntersectionGraph:
    """Bipartite graph (white pieces, black points; edges).

    ``positions`` optionally maps black vertices to (center, radius) of the
    enclosing disk; it does not take part in equality.
    """

    white: tuple
    black: tuple
    edges: frozenset
    level: int | None = None
    positions: Mapping = field(default_factory=dict)

    def __post_init__(self):
        ws, bs = set(self.white), set(self.black)
        if len(ws) != len(self.white) or len(bs) != len(self.black):
            raise ValueError("duplicate vertices")
        for w, b in self.edges:
            if w not in ws or b not in bs:
                raise ValueError(f"edge {(w, b)!r} has an endpoint outside the graph")
        object.__setattr__(self, "white", tuple(sorted(self.white, key=_white_key)))
        object.__setattr__(self, "black", tuple(sorted(self.black, key=_black_key)))
        object.__setattr__(self, "edges", frozenset(self.edges))

    def __eq__(self, other):
        if not isinstance(other, IntersectionGraph):
            return NotImplemented
        return (set(self.white) == set(other.white) and set(self.black) == set(other.black)
                and self.edges == other.edges)

    def __hash__(self):
        return hash((frozenset(self.white), frozenset(self.black), self.edges))

    @property
    def vertex_count(self) -> int:
        return len(self.white) + len(self.black)

    def neighbors(self, v, kind: str | None = None) -> list:
        if kind is None:
            kind = WHITE if v in set(self.white) else BLACK
        if kind == WHITE:
            out = [b for w, b in self.edges if w == v]
            return sorted(out, key=_black_key)
        return sorted((w for w, b in self.edges if b == v), key=_white_key)

    def adjacency(self) -> dict:
        """Adjacency over tagged vertices (WHITE, v) / (BLACK, v)."""
        adj = {(WHITE, w): [] for w in self.white}
        adj.update({(BLACK, b): [] for b in self.black})
        for w, b in sorted(self.edges, key=lambda e: (_white_key(e[0]), _black_key(e[1]))):
            adj[(WHITE, w)].append((BLACK, b))
            adj[(BLACK, b)].append((WHITE, w))
        return adj

    def degree(self, v, kind: str) -> int:
        return len(self.neighbors(v, kind))

    def to_dot(self, highlight=None, digits: int = 6) -> str:
        return to_dot(self, highlight=highlight, digits=digits)

    def summary(self) -> dict:
        return {
            "level": self.level,
            "white": len(self.white),
            "black": len(self.black),
            "edges": len(self.edges),
        }


class TreeStatus(str, enum.Enum):
    TREE = "tree"
    NOT_TREE = "not_tree"
    DISCONNECTED = "disconnected"


@dataclass(frozen=True)
class TreeResult:
    status: TreeStatus
    cycle: tuple | None = None  # alternating tagged vertices, first repeated at the end
    components: int = 1

    @property
    def is_tree(self) -> bool:
        return self.status is TreeStatus.TREE

    def __bool__(self):
        return self.is_tree


def _components(adj) -> list[list]:
    seen = set()
    comps = []
    for v in adj:
        if v in seen:
            continue
        seen.add(v)
        comp = [v]
        queue = deque([v])
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    comp.append(y)
                    queue.append(y)
        comps.append(comp)
    return comps


def shortest_cycle(adj) -> tuple | None:
    """A shortest cycle of the graph, or None if it is a forest."""
    best = None
    for root in adj:
        dist = {root: 0}
        parent = {root: None}
        queue = deque([root])
        while queue:
            x = queue.popleft()
            if best is not None and 2 * dist[x] + 1 >= len(best) - 1:
                break
            for y in adj[x]:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    parent[y] = x
                    queue.append(y)
                elif parent[x] != y:
                    # two tree paths root..x and root..y closed by the edge x-y
                    px, py = [x], [y]
                    while parent[px[-1]] is not None:
                        px.append(parent[px[-1]])
                    while parent[py[-1]] is not None:
                        py.append(parent[py[-1]])
                    # trim the shared tail
                    while len(px) > 1 and len(py) > 1 and px[-2] == py[-2]:
                        px.pop()
                        py.pop()
                    cyc = list(reversed(px)) + py[:-1]
                    cyc.append(cyc[0])
                    if best is None or len(cyc) < len(best):
                        best = tuple(cyc)
    if best is None:
        return None
    return _rotate_cycle(best)


def _tag_key(v):
    kind, x = v
    return (0,) + _white_key(x) if kind == WHITE else (1,) + _black_key(x)


def _rotate_cycle(cyc):
    """Start the cycle at its smallest white vertex, walking toward the smaller neighbor."""
    body = list(cyc[:-1])
    whites = [i for i, v in enumerate(body) if v[0] == WHITE]
    i = min(whites, key=lambda k: _tag_key(body[k]))
    body = body[i:] + body[:i]
    if len(body) > 2 and _tag_key(body[-1]) < _tag_key(body[1]):
        body = [body[0]] + body[:0:-1]
    return tuple(body + [body[0]])


def is_tree(g: IntersectionGraph) -> TreeResult:
    """Check connectivity and |E| = |V| - 1; report a shortest cycle otherwise."""
    adj = g.adjacency()
    if not adj:
        return TreeResult(TreeStatus.DISCONNECTED, components=0)
    comps = _components(adj)
    if len(g.edges) == len(adj) - 1 and len(comps) == 1:
        return TreeResult(TreeStatus.TREE)
    cyc = shortest_cycle(adj)
    if cyc is not None:
        return TreeResult(TreeStatus.NOT_TREE, cycle=cyc, components=len(comps))
    return TreeResult(TreeStatus.DISCONNECTED, components=len(comps))


# ---------------------------------------------------------------------------
# construction


@dataclass(frozen=True)
class _Critical:
    points: tuple  # IntersectionCluster per index k
    system: SimSystem


def _check_fi(fi: FIReport):
    if fi.verdict is Verdict.NOT_FI:
        raise ValueError("graph construction needs an FI report, got NotFI")


def build_graph(system: SimSystem, n: int, fi: FIReport, budget: int | None = None) -> IntersectionGraph:
    """The level-n intersection graph built from the level-1 critical points.

    Every level-n contact point is S_w(p_k) for a prefix w of length < n and a
    level-1 critical point p_k, so rescaled copies of the p_k enumerate all
    black vertices.  Copies are merged by disk overlap, and a copy is joined to
    each level-n piece below its prefix that meets its disk.
    """
    _check_fi(fi)
    if n < 1:
        raise ValueError("level must be >= 1")
    budget = leaf_budget() if budget is None else budget
    m = system.m
    if m ** n > budget:
        raise ResourceError(f"{m}^{n} pieces exceed the budget", reached=float(n - 1))
    crit = fi.critical_points()
    white = [tuple(int(x) + 1 for x in idx) for idx in np.ndindex(*([m] * n))]
    if not crit:
        return IntersectionGraph(white, (), frozenset(), level=n)

    # words meeting each critical disk, per remaining depth
    below = {}
    for k, cl in enumerate(crit):
        for d in range(1, n + 1):
            below[(k, d)] = pieces_near(system, cl.center, cl.radius, length=d)

    names, centers, radii, pieces = [], [], [], []
    for plen in range(n):
        for idx in np.ndindex(*([m] * plen)):
            w = tuple(int(x) + 1 for x in idx)
            s = compose(system, w)
            for k, cl in enumerate(crit):
                names.append((w, k))
                centers.append(s(cl.center))
                radii.append(s.ratio * cl.radius)
                pieces.append([w + y for y in below[(k, n - plen)]])
    groups = overlap_groups(np.array(centers), np.array(radii))
    black, edges, positions = [], set(), {}
    for grp in groups:
        canon = min((names[i] for i in grp), key=_black_key)
        black.append(canon)
        i0 = names.index(canon)
        positions[canon] = (complex(centers[i0]), float(radii[i0]))
        for i in grp:
            for y in pieces[i]:
                edges.add((y, canon))
    # a black copy touching a single piece is not a contact point at this level
    deg = {}
    for _, b in edges:
        deg[b] = deg.get(b, 0) + 1
    black = [b for b in black if deg.get(b, 0) >= 2]
    keep = set(black)
    edges = {e for e in edges if e[1] in keep}
    positions = {b: positions[b] for b in black}
    return IntersectionGraph(white, black, frozenset(edges), level=n, positions=positions)


def relabel(g: IntersectionGraph, white_fn, black_fn, position_fn=None) -> IntersectionGraph:
    """Copy of g with vertices renamed by the two functions."""
    pos = {}
    if position_fn is not None:
        pos = {black_fn(b): position_fn(p) for b, p in g.positions.items()}
    return IntersectionGraph(
        [white_fn(w) for w in g.white],
        [black_fn(b) for b in g.black],
        frozenset((white_fn(w), black_fn(b)) for w, b in g.edges),
        level=g.level,
        positions=pos,
    )


def refine_graph(g: IntersectionGraph, l, template: IntersectionGraph, gluing: Mapping) -> IntersectionGraph:
    """Replace white vertex l by a template graph.

    ``gluing`` sends every black neighbor p of l to a vertex of the template.
    A black target is identified with p (p keeps its name); a white target W
    gets the new edge (W, p).  Template vertex names must not clash with the
    remaining vertices of g.
    """
    if l not in set(g.white):
        raise ValueError(f"{l!r} is not a white vertex")
    nbrs = g.neighbors(l, WHITE)
    missing = [p for p in nbrs if p not in gluing]
    if missing:
        raise ValueError(f"gluing misses black neighbors {missing!r}")
    extra = [p for p in gluing if p not in set(nbrs)]
    if extra:
        raise ValueError(f"gluing has non-neighbors {extra!r}")
    targets = list(gluing.values())
    if len(set(targets)) != len(targets):
        raise ValueError("gluing is not injective")
    tw, tb = set(template.white), set(template.black)
    for t in targets:
        if t not in tw and t not in tb:
            raise ValueError(f"gluing target {t!r} is not a template vertex")
        if t in tw and t in tb:
            raise ValueError(f"template vertex {t!r} is both white and black")
    rest_w = set(g.white) - {l}
    glued_black = {t: p for p, t in gluing.items() if t in tb}
    new_black = set(template.black) - set(glued_black)
    if rest_w & tw or (set(g.black) & new_black):
        raise ValueError("template vertex names clash with the graph")

    edges = {e for e in g.edges if e[0] != l}
    for w, b in template.edges:
        edges.add((w, glued_black.get(b, b)))
    for p, t in gluing.items():
        if t in tw:
            edges.add((t, p))
    positions = dict(g.positions)
    for b, pos in template.positions.items():
        if b in new_black:
            positions[b] = pos
    return IntersectionGraph(
        list(rest_w | tw),
        list(set(g.black) | new_black),
        frozenset(edges),
        level=g.level + 1 if g.level is not None and template.level == 1 else None,
        positions=positions,
    )


def _piece_of(system: SimSystem, z: complex, radius: float) -> list[Word]:
    return pieces_near(system, z, radius, length=1)


def refine_level(system: SimSystem, g: IntersectionGraph, base: IntersectionGraph,
                 crit: list[IntersectionCluster]) -> IntersectionGraph:
    """Level n+1 graph from level n by refining every white vertex with Γ₁."""
    out = g
    n = g.level
    for w in g.white:
        s = compose(system, w)
        inv = s.inverse()
        template = relabel(
            base,
            lambda c, w=w: w + c,
            lambda b, w=w: (w + b[0], b[1]),
            lambda p, s=s: (s(p[0]), s.ratio * p[1]),
        )
        gluing = {}
        for p in out.neighbors(w, WHITE):
            center, radius = out.positions[p]
            z, rz = inv(center), radius / s.ratio
            hit = [k for k, cl in enumerate(crit)
                   if abs(cl.center - z) <= (cl.radius + rz) * (1 + 1e-9) + 1e-13]
            if len(hit) == 1:
                gluing[p] = (w, hit[0])
            else:
                cs = _piece_of(system, z, rz)
                if len(cs) != 1:
                    raise ValueError(f"cannot place boundary point {p!r} of {w!r}")
                gluing[p] = w + cs[0]
        # glued template blacks keep the old (canonical) names
        out = refine_graph(out, w, template, gluing)
    return IntersectionGraph(out.white, out.black, out.edges, level=n + 1, positions=out.positions)


def graph_by_refinement(system: SimSystem, n: int, fi: FIReport) -> IntersectionGraph:
    base = build_graph(system, 1, fi)
    crit = fi.critical_points()
    g = base
    while g.level < n:
        g = refine_level(system, g, base, crit)
    return g


# ---------------------------------------------------------------------------
# verdict


class Outcome(str, enum.Enum):
    DENDRITE = "Dendrite"
    NOT_DENDRITE = "NotDendrite"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class DendriteVerdict:
    outcome: Outcome
    witness: tuple | None = None
    fi_witness: tuple | None = None
    checked_levels: int = 0
    note: str = ""
    fi: FIReport | None = field(default=None, compare=False)
    graphs: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.outcome is Outcome.NOT_DENDRITE and self.witness is None and self.fi_witness is None:
            raise ValueError("NotDendrite needs a witness")

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "witness": format_cycle(self.witness) if self.witness else None,
            "fi_witness": list(self.fi_witness) if self.fi_witness else None,
            "checked_levels": self.checked_levels,
            "note": self.note,
            "fi": self.fi.to_dict() if self.fi is not None else None,
            "graphs": [gr.summary() for gr in self.graphs],
        }


def dendrite_verdict(system: SimSystem, max_level: int = 3, tol: float = 1e-7,
                     budget: int | None = None) -> DendriteVerdict:
    """Decide whether the attractor of an FI system is a dendrite.

    Γ₁ being a tree under a certified FI report gives Dendrite; a cycle in
    some Γ_n gives NotDendrite.  Levels 2..max_level are built as a check.
    """
    schedule = tuple(x for x in (tol * 1e4, tol * 1e2, tol) if x < 1)
    try:
        fi = fi_report(system, tol=tol, schedule=schedule, budget=budget)
    except ResourceError as exc:
        return DendriteVerdict(Outcome.INCONCLUSIVE, note=f"resource limit in FI check: {exc}")
    if fi.verdict is Verdict.NOT_FI:
        return DendriteVerdict(Outcome.INCONCLUSIVE, fi=fi,
                               note="system is not FI; the criterion does not apply")
    graphs = []
    try:
        g1 = build_graph(system, 1, fi, budget=budget)
    except ResourceError as exc:
        return DendriteVerdict(Outcome.INCONCLUSIVE, fi=fi, note=f"resource limit: {exc}")
    graphs.append(g1)
    res = is_tree(g1)
    certified = fi.verdict is Verdict.FI_CERTIFIED
    if res.status is TreeStatus.DISCONNECTED:
        return DendriteVerdict(Outcome.INCONCLUSIVE, fi=fi, checked_levels=1,
                               graphs=tuple(graphs), note="attractor disconnected")
    if res.status is TreeStatus.NOT_TREE:
        if certified:
            return DendriteVerdict(Outcome.NOT_DENDRITE, witness=res.cycle, checked_levels=1,
                                   fi=fi, graphs=tuple(graphs), note="cycle in level-1 graph")
        return DendriteVerdict(Outcome.INCONCLUSIVE, witness=res.cycle, checked_levels=1, fi=fi,
                               graphs=tuple(graphs), note="cycle found but FI only likely")
    if not certified:
        return DendriteVerdict(Outcome.INCONCLUSIVE, checked_levels=1, fi=fi, graphs=tuple(graphs),
                               note="level-1 graph is a tree but FI only likely")
    checked = 1
    for n in range(2, max_level + 1):
        try:
            gn = build_graph(system, n, fi, budget=budget)
        except ResourceError as exc:
            return DendriteVerdict(Outcome.DENDRITE, checked_levels=checked, fi=fi,
                                   graphs=tuple(graphs), note=f"deeper checks stopped: {exc}")
        graphs.append(gn)
        rn = is_tree(gn)
        if rn.status is TreeStatus.NOT_TREE:
            return DendriteVerdict(Outcome.NOT_DENDRITE, witness=rn.cycle, checked_levels=n, fi=fi,
                                   graphs=tuple(graphs), note=f"cycle in level-{n} graph")
        if rn.status is TreeStatus.DISCONNECTED:
            return DendriteVerdict(Outcome.INCONCLUSIVE, checked_levels=n, fi=fi, graphs=tuple(graphs),
                                   note=f"level-{n} graph disconnected")
        checked = n
    return DendriteVerdict(Outcome.DENDRITE, checked_levels=checked, fi=fi, graphs=tuple(graphs),
                           note="level-1 graph is a tree")


# ---------------------------------------------------------------------------
# output


def _fmt_num(x: float, digits: int) -> str:
    s = f"{x:.{digits}f}"
    if s.startswith("-") and float(s) == 0.0:
        s = s[1:]
    return s


def _fmt_word(w) -> str:
    if isinstance(w, tuple) and all(isinstance(x, int) for x in w):
        return ".".join(map(str, w)) if any(x > 9 for x in w) else "".join(map(str, w)) or "()"
    return str(w)


def _fmt_black(b) -> str:
    if isinstance(b, tuple) and len(b) == 2 and isinstance(b[0], tuple):
        return f"{_fmt_word(b[0]) if b[0] else ''}/{b[1]}"
    return str(b)


def format_vertex(v) -> str:
    kind, x = v
    return _fmt_word(x) if kind == WHITE else "p" + _fmt_black(x)


def format_cycle(cyc) -> list[str]:
    return [format_vertex(v) for v in cyc]


def to_dot(g: IntersectionGraph, highlight=None, digits: int = 6) -> str:
    """GraphViz text; whites are boxes, blacks filled circles at rounded coordinates."""
    def bpos(b):
        if b in g.positions:
            z = g.positions[b][0]
            return (round(z.real, digits), round(z.imag, digits))
        return (0.0, 0.0)

    def bname(b):
        return "b:" + _fmt_black(b)

    def bkey(b):
        x, y = bpos(b)
        return (x, y, _black_key(b))

    hl = set()
    if highlight:
        seq = list(highlight)
        for a, b in zip(seq, seq[1:]):
            if a[0] == WHITE:
                hl.add((a[1], b[1]))
            else:
                hl.add((b[1], a[1]))
    lines = ["graph G {"]
    if g.level is not None:
        lines.append(f'  label="level {g.level}";')
    for w in sorted(g.white, key=_white_key):
        lines.append(f'  "w:{_fmt_word(w)}" [shape=box, label="{_fmt_word(w)}"];')
    for b in sorted(g.black, key=bkey):
        if b in g.positions:
            x, y = bpos(b)
            label = f"({_fmt_num(x, digits)}, {_fmt_num(y, digits)})"
        else:
            label = _fmt_black(b)
        lines.append(f'  "{bname(b)}" [shape=circle, style=filled, fillcolor=black, '
                     f'fontcolor=white, label="{label}"];')
    for w, b in sorted(g.edges, key=lambda e: (_white_key(e[0]), bkey(e[1]))):
        extra = " [color=red, penwidth=2]" if (w, b) in hl else ""
        lines.append(f'  "w:{_fmt_word(w)}" -- "{bname(b)}"{extra};')
    lines.append("}")
    return "\n".join(lines) + "\n"
