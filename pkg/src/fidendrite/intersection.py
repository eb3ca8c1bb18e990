"""Certified detection of piece intersections.

Pairs of pieces (K_u, K_v) are expanded breadth first: the member with the
larger bounding disk is replaced by its children and pairs whose disks are
separated are discarded.  Discarding is a certificate (the disks are inflated
before the test); survival is only ever an over-approximation, so every
verdict errs toward "inconclusive".
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from . import _kernels
from .attractor import DISK_SLACK, BoundingDisk, ResourceError, bounding_disk, leaf_budget
from .ifs_core import (
    Address,
    Similarity,
    SimSystem,
    Word,
    compose,
    eval_address,
    format_word,
    incomparable,
)

DEFAULT_SCHEDULE = (1e-3, 1e-5, 1e-7)
RECURRENCE_TOL = 1e-9
# an FI cluster is expected to have radius O(tol); beyond this factor it is suspect
RADIUS_FACTOR = 50.0


def pair_budget() -> int:
    """Pair frontier budget: one twentieth of the leaf budget."""
    return max(1000, leaf_budget() // 20)


def overlap_groups(centers: np.ndarray, radii: np.ndarray) -> list[list[int]]:
    """Connected components of the disk-overlap graph, each sorted, ordered by first member."""
    n = len(centers)
    if n <= 1:
        return [[i] for i in range(n)]
    pts = np.column_stack([centers.real, centers.imag])
    reach = 2.0 * float(radii.max()) * (1 + DISK_SLACK)
    cand = cKDTree(pts).query_pairs(reach, output_type="ndarray")
    if len(cand):
        i, j = cand[:, 0], cand[:, 1]
        ok = np.abs(centers[i] - centers[j]) <= (radii[i] + radii[j]) * (1 + DISK_SLACK)
        i, j = i[ok], j[ok]
    else:
        i = j = np.empty(0, dtype=np.int64)
    graph = coo_matrix((np.ones(len(i), dtype=np.int8), (i, j)), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    order = np.argsort(labels, kind="stable")
    split = np.flatnonzero(np.diff(labels[order])) + 1
    groups = [g.tolist() for g in np.split(order, split)]
    return sorted(groups, key=lambda g: g[0])


def lens_disks(cu, ru, cv, rv):
    """A disk containing D(cu, ru) & D(cv, rv) for each pair (vectorized)."""
    d = np.abs(cv - cu)
    small_u = ru <= rv
    center = np.where(small_u, cu, cv)
    radius = np.minimum(ru, rv)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = (d * d + ru * ru - rv * rv) / (2 * d)
        h2 = ru * ru - a * a
        chord = (d > 0) & (a >= 0) & (a <= d) & (h2 > 0)
        h = np.sqrt(np.where(chord, h2, 0.0))
        mid = cu + np.where(chord, a / np.where(d > 0, d, 1.0), 0.0) * (cv - cu)
    better = chord & (h < radius)
    center = np.where(better, mid, center)
    radius = np.where(better, h, radius) * (1 + DISK_SLACK)
    return center, radius


@dataclass
class IntersectionCluster:
    center: complex
    radius: float
    witness_pairs: list[tuple[Word, Word]]
    address_pair: tuple[Address, Address] | None = None
    roots: tuple[tuple[Word, Word], ...] = ()
    tol: float = 0.0

    def contains(self, z: complex, slack: float = 0.0) -> bool:
        return abs(complex(z) - self.center) <= self.radius + slack

    def pieces(self, level: int = 1) -> set[Word]:
        """Words of the given length that prefix some witness member."""
        out = set()
        for u, v in self.witness_pairs:
            for w in (u, v):
                if len(w) >= level:
                    out.add(w[:level])
        return out

    def scaled(self, s: Similarity, prefix: Word) -> "IntersectionCluster":
        """Image of the cluster under S_prefix (level invariance)."""
        pairs = [(prefix + u, prefix + v) for u, v in self.witness_pairs]
        addr = None
        if self.address_pair is not None:
            addr = tuple(a.prepend(prefix) for a in self.address_pair)
        return IntersectionCluster(
            s(self.center), s.ratio * self.radius, pairs, addr,
            tuple((prefix + u, prefix + v) for u, v in self.roots), self.tol * s.ratio,
        )

    def to_dict(self) -> dict:
        return {
            "center": [self.center.real, self.center.imag],
            "radius": self.radius,
            "witness_pairs": [[format_word(u), format_word(v)] for u, v in self.witness_pairs[:16]],
            "witness_count": len(self.witness_pairs),
            "addresses": None if self.address_pair is None else [str(a) for a in self.address_pair],
        }


def _sim_arrays(s: Similarity):
    return (
        np.array([s.linear.real]), np.array([s.linear.imag]),
        np.array([s.translation.real]), np.array([s.translation.imag]),
        np.array([s.reflect]), np.array([s.ratio]),
    )


def _cat(parts):
    return tuple(np.concatenate(x) for x in zip(*parts))


class PairFrontier:
    """Resumable breadth-first expansion of incomparable piece pairs.

    Refining to ``tol`` and then to a smaller ``tol2`` gives the same final
    pair set as refining to ``tol2`` directly: child disks lie inside their
    parent disks, so pruning is monotone.
    """

    def __init__(
        self,
        system: SimSystem,
        roots: Iterable[tuple[Sequence[int], Sequence[int]]],
        disk: BoundingDisk | None = None,
        budget: int | None = None,
    ):
        self.system = system
        self.disk = bounding_disk(system, "centroid") if disk is None else disk
        self.budget = pair_budget() if budget is None else budget
        la, lt, lf, lr = system.arrays()
        self._sys = (la.real.copy(), la.imag.copy(), lt.real.copy(), lt.imag.copy(), lf.copy(), lr.copy())
        self.roots: list[tuple[Word, Word]] = []
        us, vs = [], []
        for u0, v0 in roots:
            u0, v0 = tuple(u0), tuple(v0)
            if not incomparable(u0, v0):
                raise ValueError(f"root pair {u0}, {v0} is not incomparable")
            self.roots.append((u0, v0))
            us.append(_sim_arrays(compose(system, u0)))
            vs.append(_sim_arrays(compose(system, v0)))
        n = len(self.roots)
        if n:
            self.U, self.V = _cat(us), _cat(vs)
        else:
            empty = (np.empty(0),) * 4 + (np.empty(0, bool), np.empty(0))
            self.U = self.V = empty
        width_u = max((len(u) for u, _ in self.roots), default=0)
        width_v = max((len(v) for _, v in self.roots), default=0)
        self.wu = np.zeros((n, width_u + 8), dtype=np.uint8)
        self.wv = np.zeros((n, width_v + 8), dtype=np.uint8)
        self.lu = np.array([len(u) for u, _ in self.roots], dtype=np.int64)
        self.lv = np.array([len(v) for _, v in self.roots], dtype=np.int64)
        for k, (u, v) in enumerate(self.roots):
            self.wu[k, : len(u)] = u
            self.wv[k, : len(v)] = v
        self.root_id = np.arange(n, dtype=np.int64)
        self.tol = math.inf
        self.max_frontier = n

    def __len__(self):
        return len(self.lu)

    def _take(self, idx):
        self.U = tuple(x[idx] for x in self.U)
        self.V = tuple(x[idx] for x in self.V)
        self.wu, self.wv = self.wu[idx], self.wv[idx]
        self.lu, self.lv = self.lu[idx], self.lv[idx]
        self.root_id = self.root_id[idx]

    def refine(self, tol: float) -> "PairFrontier":
        """Expand until every surviving pair has both diameters <= tol."""
        if not tol > 0:
            raise ValueError("tol must be positive")
        R = self.disk.radius
        c = self.disk.center
        abs_slack = 1e-13 * (abs(c) + R)
        finished = []
        while len(self.lu):
            done, parent, side, letter, U2, V2 = _kernels.expand_pairs(
                self.U, self.V, self._sys, c, R, tol, DISK_SLACK, abs_slack
            )
            if len(done):
                finished.append(self._snapshot(done))
            n_new = len(parent)
            if n_new + sum(len(f[6]) for f in finished) > self.budget:
                reached = 2.0 * R * float(max(self.U[5].max(), self.V[5].max()))
                raise ResourceError(f"pair budget {self.budget} exceeded at scale {reached:.3g}", reached=reached)
            self.max_frontier = max(self.max_frontier, n_new)
            wu, wv = self.wu[parent], self.wv[parent]
            lu, lv = self.lu[parent].copy(), self.lv[parent].copy()
            su = side == 0
            if len(parent):
                if int(lu.max()) + 1 > wu.shape[1]:
                    wu = np.pad(wu, ((0, 0), (0, 8)))
                if int(lv.max()) + 1 > wv.shape[1]:
                    wv = np.pad(wv, ((0, 0), (0, 8)))
                rows = np.flatnonzero(su)
                wu[rows, lu[rows]] = letter[rows]
                lu[rows] += 1
                rows = np.flatnonzero(~su)
                wv[rows, lv[rows]] = letter[rows]
                lv[rows] += 1
            self.U, self.V = U2, V2
            self.wu, self.wv, self.lu, self.lv = wu, wv, lu, lv
            self.root_id = self.root_id[parent]
        if finished:
            self._restore(finished)
        self.tol = tol
        return self

    def _snapshot(self, idx):
        return (
            tuple(x[idx] for x in self.U), tuple(x[idx] for x in self.V),
            self.wu[idx], self.wv[idx], self.lu[idx], self.lv[idx], self.root_id[idx],
        )

    def _restore(self, parts):
        self.U = _cat([p[0] for p in parts])
        self.V = _cat([p[1] for p in parts])
        wmax_u = max(p[2].shape[1] for p in parts)
        wmax_v = max(p[3].shape[1] for p in parts)
        self.wu = np.concatenate([np.pad(p[2], ((0, 0), (0, wmax_u - p[2].shape[1]))) for p in parts])
        self.wv = np.concatenate([np.pad(p[3], ((0, 0), (0, wmax_v - p[3].shape[1]))) for p in parts])
        self.lu = np.concatenate([p[4] for p in parts])
        self.lv = np.concatenate([p[5] for p in parts])
        self.root_id = np.concatenate([p[6] for p in parts])
        # deterministic order independent of the expansion history
        keys = [self.root_id]
        for col in range(self.wv.shape[1] - 1, -1, -1):
            keys.append(self.wv[:, col])
        keys.append(self.lv)
        for col in range(self.wu.shape[1] - 1, -1, -1):
            keys.append(self.wu[:, col])
        keys.append(self.lu)
        order = np.lexsort(keys[::-1])
        self._take(order)

    def disks(self):
        """Centers and radii of the u-disks and v-disks of the surviving pairs."""
        c, R = self.disk.center, self.disk.radius

        def centers(S):
            ar, ai, tr, ti, f, r = S
            cc = np.where(f, np.conj(c), c)
            return (ar + 1j * ai) * cc + (tr + 1j * ti), r * R

        cu, ru = centers(self.U)
        cv, rv = centers(self.V)
        return cu, ru, cv, rv

    def pair_words(self, k: int) -> tuple[Word, Word]:
        return (
            tuple(int(x) for x in self.wu[k, : self.lu[k]]),
            tuple(int(x) for x in self.wv[k, : self.lv[k]]),
        )

    def clusters(self, by_root: bool = False) -> list[IntersectionCluster]:
        """Group surviving pairs by overlap of their intersection disks."""
        if len(self.lu) == 0:
            return []
        cu, ru, cv, rv = self.disks()
        centers, radii = lens_disks(cu, ru, cv, rv)
        if by_root:
            groups = []
            for rid in np.unique(self.root_id):
                idx = np.flatnonzero(self.root_id == rid)
                groups.extend([idx[g].tolist() for g in overlap_groups(centers[idx], radii[idx])])
        else:
            groups = overlap_groups(centers, radii)
        out = []
        for g in groups:
            g = np.asarray(g)
            cen = complex(np.mean(centers[g]))
            rad = float(np.max(np.abs(centers[g] - cen) + radii[g])) * (1 + DISK_SLACK)
            pairs = [self.pair_words(int(k)) for k in g]
            roots = tuple(sorted({self.roots[int(r)] for r in self.root_id[g]}))
            out.append(IntersectionCluster(cen, rad, pairs, None, roots, self.tol))
        out.sort(key=lambda cl: (round(cl.center.real, 9), round(cl.center.imag, 9)))
        return out


def pair_expand(
    system: SimSystem,
    u0: Sequence[int],
    v0: Sequence[int],
    tol: float,
    budget: int | None = None,
    disk: BoundingDisk | None = None,
) -> list[IntersectionCluster]:
    """Certified clusters containing K_u0 & K_v0, each of radius O(tol)."""
    front = PairFrontier(system, [(u0, v0)], disk=disk, budget=budget)
    return front.refine(tol).clusters()


def merge_clusters(clusters: Sequence[IntersectionCluster]) -> list[IntersectionCluster]:
    """Union clusters whose disks overlap (a point shared by several pairs)."""
    if not clusters:
        return []
    centers = np.array([c.center for c in clusters])
    radii = np.array([c.radius for c in clusters])
    out = []
    for g in overlap_groups(centers, radii):
        if len(g) == 1:
            out.append(clusters[g[0]])
            continue
        members = [clusters[k] for k in g]
        cen = complex(np.mean([c.center for c in members]))
        rad = max(abs(c.center - cen) + c.radius for c in members) * (1 + DISK_SLACK)
        pairs = [p for c in members for p in c.witness_pairs]
        roots = tuple(sorted({r for c in members for r in c.roots}))
        addr = next((c.address_pair for c in members if c.address_pair is not None), None)
        out.append(IntersectionCluster(cen, rad, pairs, addr, roots, max(c.tol for c in members)))
    out.sort(key=lambda cl: (round(cl.center.real, 9), round(cl.center.imag, 9)))
    return out


# ---------------------------------------------------------------------------
# address detection


def _chain(system: SimSystem, root: tuple[Word, Word], u: Word, v: Word):
    """Replay the expansion path from ``root`` to the pair (u, v).

    Yields (len_u, len_v, S_u, S_v) for every pair on the path, using the same
    split rule as the kernel (larger ratio splits, ties split u).
    """
    u0, v0 = root
    su, sv = compose(system, u0), compose(system, v0)
    iu, iv = len(u0), len(v0)
    out = [(iu, iv, su, sv)]
    while iu < len(u) or iv < len(v):
        split_u = su.ratio >= sv.ratio
        if split_u and iu < len(u):
            su = su.then(system[u[iu]])
            iu += 1
        elif not split_u and iv < len(v):
            sv = sv.then(system[v[iv]])
            iv += 1
        else:
            break
        out.append((iu, iv, su, sv))
    return out


def detect_address_pair(
    system: SimSystem,
    cluster: IntersectionCluster,
    max_period: int = 8,
    tol: float = RECURRENCE_TOL,
) -> tuple[Address, Address] | None:
    """Eventually periodic addresses (one per side) of the point in ``cluster``.

    Looks for a recurrence of the relative similarity S_u^-1 S_v along the
    expansion path of some witness pair.  A recurrence after appending x to u
    and y to v means u.x.x.x... and v.y.y.y... code the same point.
    """
    if max_period <= 0 or not cluster.witness_pairs:
        return None
    roots = cluster.roots or ((cluster.witness_pairs[0][0][:1], cluster.witness_pairs[0][1][:1]),)
    candidates = set()
    seen_paths = set()
    for u, v in cluster.witness_pairs:
        root = next((r for r in roots if u[: len(r[0])] == r[0] and v[: len(r[1])] == r[1]), None)
        if root is None:
            continue
        path = _chain(system, root, u, v)
        rel = [(iu, iv, su.inverse().then(sv)) for iu, iv, su, sv in path]
        for a in range(len(rel)):
            iu_a, iv_a, ra = rel[a]
            key = (u[:iu_a], v[:iv_a])
            if key in seen_paths:
                continue
            seen_paths.add(key)
            for b in range(a + 1, len(rel)):
                iu_b, iv_b, rb = rel[b]
                if iu_b - iu_a > max_period or iv_b - iv_a > max_period:
                    break
                if iu_b == iu_a or iv_b == iv_a:
                    continue
                if ra.close_to(rb, tol):
                    pa = Address(u[:iu_a], u[iu_a:iu_b])
                    pb = Address(v[:iv_a], v[iv_a:iv_b])
                    candidates.add((pa, pb))
    good = []
    for pa, pb in candidates:
        za, zb = eval_address(system, pa), eval_address(system, pb)
        if cluster.contains(za) and cluster.contains(zb):
            good.append((pa, pb))
    if not good:
        return None
    return min(good, key=lambda p: (len(str(p[0])) + len(str(p[1])), str(p[0]), str(p[1])))


# ---------------------------------------------------------------------------
# FI(s) report


class Verdict(enum.Enum):
    FI_CERTIFIED = "FI_certified"
    FI_LIKELY = "FI_likely"
    NOT_FI = "NotFI"


@dataclass
class PairHistory:
    pair: tuple[int, int]
    tols: list[float] = field(default_factory=list)
    counts: list[int] = field(default_factory=list)
    max_radius: list[float] = field(default_factory=list)
    pair_counts: list[int] = field(default_factory=list)
    status: str = "pending"
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "pair": list(self.pair),
            "tols": self.tols,
            "cluster_counts": self.counts,
            "max_radius": self.max_radius,
            "surviving_pairs": self.pair_counts,
            "status": self.status,
            "note": self.note,
        }


@dataclass
class FIReport:
    verdict: Verdict
    s: int
    clusters: dict[tuple[int, int], list[IntersectionCluster]]
    witness: tuple[Word, Word] | None = None
    history: dict[tuple[int, int], PairHistory] = field(default_factory=dict)
    tol: float = 0.0

    @property
    def total_clusters(self) -> int:
        return sum(len(v) for v in self.clusters.values())

    def critical_points(self) -> list[IntersectionCluster]:
        """The critical set: all first-level contact points, shared points merged."""
        return merge_clusters([c for k in sorted(self.clusters) for c in self.clusters[k]])

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "s": self.s,
            "tol": self.tol,
            "witness": None if self.witness is None else [format_word(w) for w in self.witness],
            "pairs": {
                f"{i},{j}": {
                    "clusters": [c.to_dict() for c in self.clusters.get((i, j), [])],
                    "history": self.history[(i, j)].to_dict() if (i, j) in self.history else None,
                }
                for (i, j) in sorted(set(self.clusters) | set(self.history))
            },
        }


def _probe_tols(system: SimSystem, disk: BoundingDisk, first: float) -> list[float]:
    """Coarse tolerances above the schedule, one ratio-level apart."""
    top = 2.0 * disk.radius * system.r_max
    step = max(system.r_max, 0.1) ** 2
    out = []
    t = top * step
    while t > first * 3:
        out.append(t)
        t *= step
    return out[:4]


def _overlap_signature(hist: PairHistory) -> bool:
    """Cluster extent that does not shrink with the tolerance.

    Compares each recorded stage with the latest earlier stage whose tol is
    at least 3x coarser: the largest cluster must exceed 3 tol and must have
    shrunk by less than a factor 1.5.
    """
    for k in range(1, len(hist.tols)):
        t1, r1 = hist.tols[k], hist.max_radius[k]
        earlier = [j for j in range(k) if hist.tols[j] >= 3 * t1]
        if not earlier:
            continue
        r0 = hist.max_radius[earlier[-1]]
        if r1 > 3 * t1 and r1 * 1.5 > r0:
            return True
    return False


def fi_report(
    system: SimSystem,
    tol: float | None = None,
    schedule: Sequence[float] | None = None,
    budget: int | None = None,
    detect_addresses: bool = True,
    max_period: int = 8,
) -> FIReport:
    """Run pair expansion over all first-level pairs and classify the system."""
    if schedule is None:
        schedule = DEFAULT_SCHEDULE if tol is None else (tol * 1e4, tol * 1e2, tol)
    schedule = sorted(set(float(t) for t in schedule), reverse=True)
    disk = bounding_disk(system, "centroid")
    probe = _probe_tols(system, disk, schedule[0])
    clusters: dict[tuple[int, int], list[IntersectionCluster]] = {}
    history: dict[tuple[int, int], PairHistory] = {}
    overlap_pair = None
    for i, j in combinations(range(1, system.m + 1), 2):
        hist = PairHistory((i, j))
        history[(i, j)] = hist
        front = PairFrontier(system, [((i,), (j,))], disk=disk, budget=budget)
        last = []
        try:
            for k, t in enumerate(probe + list(schedule)):
                front.refine(t)
                last = front.clusters()
                hist.tols.append(t)
                hist.counts.append(len(last))
                hist.max_radius.append(max((c.radius for c in last), default=0.0))
                hist.pair_counts.append(len(front))
                if _overlap_signature(hist):
                    hist.status = "overlap"
                    break
                if not last:
                    break
        except ResourceError as exc:
            hist.status = "resource"
            hist.note = str(exc)
            if _overlap_signature(hist):
                hist.status = "overlap"
        if hist.status == "overlap":
            overlap_pair = overlap_pair or ((i,), (j,))
            clusters[(i, j)] = last
            continue
        if hist.status == "resource":
            clusters[(i, j)] = last
            continue
        clusters[(i, j)] = last
        if not last:
            hist.status = "certified"
            hist.note = "pieces separated"
            continue
        n_sched = len(schedule)
        counts = hist.counts[-n_sched:]
        tols = hist.tols[-n_sched:]
        radii = hist.max_radius[-n_sched:]
        stable = len(counts) >= 2 and counts[-1] == counts[-2]
        shrinking = len(radii) >= 2 and all(r <= RADIUS_FACTOR * t for r, t in zip(radii[-2:], tols[-2:]))
        hist.status = "certified" if (stable and shrinking) else "likely"
        if detect_addresses:
            for c in last:
                c.address_pair = detect_address_pair(system, c, max_period=max_period)

    s = max((len(v) for k, v in clusters.items() if history[k].status != "overlap"), default=0)
    if overlap_pair is not None:
        verdict = Verdict.NOT_FI
    elif all(h.status == "certified" for h in history.values()):
        verdict = Verdict.FI_CERTIFIED
    else:
        verdict = Verdict.FI_LIKELY
    return FIReport(verdict, s, clusters, overlap_pair, history, schedule[-1])


def boundary_points(
    system: SimSystem,
    j: Sequence[int],
    tol: float = 1e-7,
    others: Iterable[Sequence[int]] | None = None,
    budget: int | None = None,
) -> list[IntersectionCluster]:
    """Points of K_j shared with the other pieces of the same level.

    ``others`` overrides the comparison family (it must consist of words
    incomparable with ``j``).
    """
    j = tuple(j)
    if others is None:
        others = _level_words(system.m, len(j))
    roots = [(j, tuple(u)) for u in others if tuple(u) != j]
    roots = [r for r in roots if incomparable(*r)]
    if not roots:
        return []
    front = PairFrontier(system, roots, budget=budget)
    return front.refine(tol).clusters()


def pieces_near(
    system: SimSystem,
    z: complex,
    radius: float,
    length: int | None = None,
    cut_ratio: float | None = None,
    confirm: bool = True,
    root: Sequence[int] = (),
    disk: BoundingDisk | None = None,
    budget: int | None = None,
) -> list[Word]:
    """Words whose pieces meet the closed disk B(z, radius).

    The words are taken at a fixed ``length`` below ``root`` or on the cut
    {w : ratio(w) <= cut_ratio < ratio(parent)}.  Candidates are found by
    pruning on bounding disks; with ``confirm`` each candidate is expanded
    further until its sub-pieces are no larger than ``radius`` and kept only if
    some sub-piece disk still meets B(z, radius).  Survival over-approximates:
    a kept piece is within about 3*radius of z.
    """
    if (length is None) == (cut_ratio is None):
        raise ValueError("give exactly one of length and cut_ratio")
    disk = bounding_disk(system, "centroid") if disk is None else disk
    budget = pair_budget() if budget is None else budget
    la, lt, lf, lr = system.arrays()
    m = system.m
    c, R = disk.center, disk.radius
    z = complex(z)
    r0 = compose(system, root)
    a = np.array([r0.linear]); t = np.array([r0.translation])
    f = np.array([r0.reflect]); r = np.array([r0.ratio])
    words = np.array([tuple(root)], dtype=np.int64).reshape(1, len(root))

    def meets(a, t, f, r):
        cen = a * np.where(f, np.conj(c), c) + t
        return np.abs(cen - z) <= (r * R + radius) * (1 + DISK_SLACK) + 1e-13 * (abs(c) + R)

    def children(a, t, f, r):
        ca = np.where(f[:, None], np.conj(la)[None, :], la[None, :])
        ct = np.where(f[:, None], np.conj(lt)[None, :], lt[None, :])
        return ((a[:, None] * ca).ravel(), (a[:, None] * ct + t[:, None]).ravel(),
                (f[:, None] != lf[None, :]).ravel(), (r[:, None] * lr[None, :]).ravel())

    found = []
    depth = 0
    while len(r):
        keep = meets(a, t, f, r)
        a, t, f, r, words = a[keep], t[keep], f[keep], r[keep], words[keep]
        if length is not None:
            stop = np.full(len(r), depth >= length)
        else:
            stop = r <= cut_ratio * (1 + 1e-12)
        if stop.any():
            found.append((a[stop], t[stop], f[stop], r[stop], words[stop]))
        go = ~stop
        a, t, f, r, words = a[go], t[go], f[go], r[go], words[go]
        if len(r) * m > budget:
            raise ResourceError("piece search exceeded the budget", reached=float(r.max() * 2 * R))
        if not len(r):
            break
        a, t, f, r = children(a, t, f, r)
        words = np.concatenate([np.repeat(words, m, axis=0),
                                np.tile(np.arange(1, m + 1), len(words))[:, None]], axis=1)
        depth += 1
    out = []
    for a, t, f, r, words in found:
        ids = np.arange(len(r))
        if confirm:
            alive = np.zeros(len(r), dtype=bool)
            ca, ct, cf, cr, cid = a, t, f, r, ids
            while len(cr):
                small = cr * R <= radius
                alive[cid[small]] = True
                go = ~small & ~alive[cid]
                ca, ct, cf, cr, cid = ca[go], ct[go], cf[go], cr[go], cid[go]
                if not len(cr):
                    break
                ca, ct, cf, cr = children(ca, ct, cf, cr)
                cid = np.repeat(cid, m)
                keep = meets(ca, ct, cf, cr)
                ca, ct, cf, cr, cid = ca[keep], ct[keep], cf[keep], cr[keep], cid[keep]
                if len(cr) > budget:
                    raise ResourceError("piece confirmation exceeded the budget", reached=radius)
            ids = ids[alive]
        out.extend(tuple(int(x) for x in words[k]) for k in ids)
    return sorted(out, key=lambda w: (len(w), w))


def _level_words(m: int, n: int):
    from itertools import product

    return product(range(1, m + 1), repeat=n)


def check_open_set(
    system: SimSystem, rects: Sequence[tuple[float, float, float, float]], samples: int = 64
) -> dict:
    """Heuristic check of a declared open set O (a union of open rectangles).

    Samples a grid inside O, and tests that the images S_i(samples) stay in O
    and that S_i(O), S_j(O) share no sample point.  Passing is evidence, not a
    proof.
    """
    rects = [tuple(map(float, r)) for r in rects]

    def inside(z):
        z = np.asarray(z)
        ok = np.zeros(z.shape, dtype=bool)
        for x0, y0, x1, y1 in rects:
            ok |= (z.real > x0) & (z.real < x1) & (z.imag > y0) & (z.imag < y1)
        return ok

    pts = []
    for x0, y0, x1, y1 in rects:
        gx = x0 + (np.arange(samples) + 0.5) / samples * (x1 - x0)
        gy = y0 + (np.arange(samples) + 0.5) / samples * (y1 - y0)
        pts.append((gx[:, None] + 1j * gy[None, :]).ravel())
    pts = np.concatenate(pts)
    contained = all(bool(inside(s(pts)).all()) for s in system.maps)
    disjoint = True
    offenders = []
    for a, b in combinations(range(system.m), 2):
        sa, sb = system.maps[a], system.maps[b]
        # a sample of S_a(O) lying in S_b(O) means S_b^-1 of it lies in O
        if inside(sb.inverse()(sa(pts))).any() or inside(sa.inverse()(sb(pts))).any():
            disjoint = False
            offenders.append((a + 1, b + 1))
    return {"contained": contained, "disjoint": disjoint, "overlapping_pairs": offenders}
