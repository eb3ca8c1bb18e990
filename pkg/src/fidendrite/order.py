"""Finiteness quantities at points and pieces: address counts, components, order.

All counts here come from finite computations at chosen scales and are only
reported once they agree at two successive scales.  Zerner constants are
lower estimates: windows are sampled on a grid and pieces are tested through
finitely many sample points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .attractor import BoundingDisk, ResourceError, bounding_disk, cover, leaf_budget, system_diameter
from .ifs_core import SimSystem, Word, compose, format_word
from .intersection import (
    FIReport,
    IntersectionCluster,
    PairFrontier,
    boundary_points,
    merge_clusters,
    pieces_near,
)


class InconclusiveError(RuntimeError):
    """A count did not stabilize within the allowed scales or depths."""


def _point(x, tol: float) -> tuple[complex, float]:
    if isinstance(x, IntersectionCluster):
        return x.center, tol + x.radius
    return complex(x), tol


# ---------------------------------------------------------------------------
# addresses


@dataclass(frozen=True)
class AddressCount:
    count: int
    per_scale: tuple[tuple[float, int], ...]
    words: tuple[Word, ...]

    def __int__(self):
        return self.count


def count_addresses(system: SimSystem, x, tol: float = 1e-7, scales: int = 3,
                    disk: BoundingDisk | None = None) -> AddressCount:
    """Number of addresses of x, read off Moran cuts at the finest safe scales.

    At the cut of relative size rho the pieces containing x (within tol) are
    counted.  The finest cut keeps pieces at least 1000*tol across, and the
    count must agree over the last two cuts.
    """
    z, rad = _point(x, tol)
    disk = bounding_disk(system, "centroid") if disk is None else disk
    diam = 2.0 * disk.radius
    rm = system.r_max
    kmax = max(1, min(60, int(math.floor(math.log(1000.0 * rad / diam) / math.log(rm)))))
    ks = range(max(1, kmax - scales + 1), kmax + 1)
    per, words = [], ()
    for k in ks:
        rho = rm ** k
        words = tuple(pieces_near(system, z, rad, cut_ratio=rho, disk=disk))
        per.append((rho, len(words)))
    if len(per) >= 2 and per[-1][1] != per[-2][1]:
        raise InconclusiveError(f"address count did not stabilize: {per}")
    return AddressCount(per[-1][1], tuple(per), words)


# ---------------------------------------------------------------------------
# Zerner constants


@dataclass(frozen=True)
class ZernerEstimate:
    a: float
    value: int
    depth: int
    stabilized: bool
    per_depth: tuple[tuple[int, int], ...]
    lower_estimate: bool = True

    def to_dict(self) -> dict:
        return {"a": self.a, "value": self.value, "depth": self.depth, "stabilized": self.stabilized,
                "per_depth": [list(p) for p in self.per_depth], "lower_estimate": True}


def _sample_points(system: SimSystem, limit: int = 32) -> np.ndarray:
    """Points of K: images of the fixed points under all words up to a small length."""
    fix = np.array(system.fixed_points())
    pts = [fix]
    cur = [()]
    while len(pts[-1]) * system.m <= limit:
        cur = [w + (i,) for w in cur for i in range(1, system.m + 1)]
        pts.append(np.array([compose(system, w)(p) for w in cur for p in fix]))
    return np.unique(np.round(np.concatenate(pts), 14))


def _words_arrays(system: SimSystem, depth: int, budget: int):
    """Linear parts, translations, reflections and ratios of all words up to depth."""
    la, lt, lf, lr = system.arrays()
    total = sum(system.m ** k for k in range(depth + 1))
    if total > budget:
        raise ResourceError(f"{total} words exceed the budget", reached=float(depth))
    a = [np.array([1.0 + 0j])]; t = [np.array([0j])]
    f = [np.array([False])]; r = [np.array([1.0])]
    for _ in range(depth):
        pa, pt, pf, pr = a[-1], t[-1], f[-1], r[-1]
        ca = np.where(pf[:, None], np.conj(la)[None, :], la[None, :])
        ct = np.where(pf[:, None], np.conj(lt)[None, :], lt[None, :])
        a.append((pa[:, None] * ca).ravel())
        t.append((pa[:, None] * ct + pt[:, None]).ravel())
        f.append((pf[:, None] != lf[None, :]).ravel())
        r.append((pr[:, None] * lr[None, :]).ravel())
    return np.concatenate(a), np.concatenate(t), np.concatenate(f), np.concatenate(r)


def _zerner_at_depth(system: SimSystem, a_const: float, depth: int, samples: np.ndarray,
                     arrays, diam: float, disk: BoundingDisk) -> int:
    la, lt, lf, lr = arrays
    rmin, rmax = system.r_min, system.r_max
    best = 0
    k = 0
    while True:
        side = diam * rmin ** k
        hi = a_const * math.sqrt(2.0) * rmin ** k  # ratio band (lo, hi]
        lo = hi * rmin
        if lo < rmax ** (depth + 1) * (1 - 1e-12):
            break
        sel = (lr > lo * (1 + 1e-12)) & (lr <= hi * (1 + 1e-12))
        k += 1
        if not sel.any():
            continue
        idx = np.flatnonzero(sel)
        sa = np.where(lf[idx, None], np.conj(samples)[None, :], samples[None, :])
        pts = la[idx, None] * sa + lt[idx, None]
        half = side / 2.0
        x0 = disk.center.real - disk.radius - side
        y0 = disk.center.imag - disk.radius - side
        gx = np.floor((pts.real - x0) / half).astype(np.int64)
        gy = np.floor((pts.imag - y0) / half).astype(np.int64)
        # a point lies in the windows anchored at offsets g-1 and g on each axis
        piece = np.broadcast_to(np.arange(len(idx))[:, None], pts.shape)
        keys = []
        for dx in (0, 1):
            for dy in (0, 1):
                keys.append(np.stack([(gx - dx).ravel(), (gy - dy).ravel(), piece.ravel()], axis=1))
        pairs = np.unique(np.concatenate(keys), axis=0)
        _, counts = np.unique(pairs[:, :2], axis=0, return_counts=True)
        best = max(best, int(counts.max()))
    return best


def zerner_constant(system: SimSystem, a: float = 1.0, depth: int = 6,
                    budget: int | None = None) -> ZernerEstimate:
    """Lower estimate of M_a from all words up to ``depth``.

    Windows are squares of side |K| r_min^k anchored at half-side offsets; a
    window size is used only when every word with ratio in its band has
    length <= depth.  The value is flagged stabilized when depths
    depth-2..depth agree.
    """
    if not a > 0:
        raise ValueError("a must be positive")
    budget = leaf_budget() if budget is None else budget
    disk = bounding_disk(system, "centroid")
    diam = system_diameter(system) or 2.0 * disk.radius
    samples = _sample_points(system)
    arrays = _words_arrays(system, depth, budget)
    per = []
    for d in range(max(1, depth - 2), depth + 1):
        n = sum(system.m ** k for k in range(d + 1))
        sub = tuple(x[:n] for x in arrays)
        per.append((d, _zerner_at_depth(system, a, d, samples, sub, diam, disk)))
    values = {v for _, v in per}
    return ZernerEstimate(a, per[-1][1], depth, len(per) == 3 and len(values) == 1, tuple(per))


# ---------------------------------------------------------------------------
# stable neighborhoods


@dataclass(frozen=True)
class StableNeighborhood:
    point: complex
    J: tuple[Word, ...]
    components: tuple[int, ...]  # labels of the components of V_J minus a small ball
    depth: int
    history: tuple[tuple[int, int], ...]  # (depth, component count)
    cell_size: float
    boundary: tuple[complex, ...] = ()
    delta: float = 0.0  # V_J contains the part of K within delta of the point

    @property
    def n_components(self) -> int:
        return len(self.components)


def _cover_cells(system: SimSystem, words: Sequence[Word], h: float, disk) -> np.ndarray:
    parts = [cover(system, w, eps=2.0 * h, cell_size=h, disk=disk).cells for w in words]
    return np.unique(np.concatenate(parts), axis=0)


def count_components(cells: np.ndarray, h: float, hole: complex | None = None,
                     hole_radius: float = 0.0, exclude: np.ndarray | None = None) -> tuple[int, np.ndarray]:
    """8-connected components of a cell set, optionally minus a ball or a cell set."""
    if len(cells) == 0:
        return 0, np.zeros(0, dtype=int)
    cells = np.asarray(cells)
    if hole is not None:
        cx = (cells[:, 0] + 0.5) * h
        cy = (cells[:, 1] + 0.5) * h
        far = np.hypot(cx - hole.real, cy - hole.imag) > hole_radius
        cells = cells[far]
    if exclude is not None and len(exclude) and len(cells):
        ex = {tuple(c) for c in exclude.tolist()}
        cells = cells[[tuple(c) not in ex for c in cells.tolist()]]
    if len(cells) == 0:
        return 0, np.zeros(0, dtype=int)
    lo = cells.min(axis=0)
    span = cells.max(axis=0) - lo + 1
    grid = np.zeros(tuple(span), dtype=bool)
    grid[tuple((cells - lo).T)] = True
    labels, n = ndimage.label(grid, structure=np.ones((3, 3), dtype=int))
    return int(n), labels[tuple((cells - lo).T)]


def _meet_only_at(system: SimSystem, J: Sequence[Word], z: complex, rad: float, tol: float) -> bool:
    pairs = [(u, v) for i, u in enumerate(J) for v in J[i + 1:]]
    if not pairs:
        return True
    cl = PairFrontier(system, pairs).refine(tol).clusters()
    return all(abs(c.center - z) <= c.radius + rad + tol for c in cl)


def _outer_boundary(system: SimSystem, J: Sequence[Word], z: complex, rad: float, tol: float) -> list:
    """Points where V_J meets same-level pieces outside J, x itself excluded."""
    m, k = system.m, len(J[0])
    jset = set(J)
    others = [w for w in (tuple(int(c) + 1 for c in idx) for idx in np.ndindex(*([m] * k))) if w not in jset]
    found = []
    for j in J:
        found.extend(boundary_points(system, j, tol=tol, others=others))
    pts = merge_clusters(found)
    return [c for c in pts if abs(c.center - z) > c.radius + rad + tol]


def stable_neighborhood(system: SimSystem, x, tol: float = 1e-7, max_depth: int = 10,
                        resolution: int = 48) -> StableNeighborhood:
    """Deepen J = {level-k pieces containing x} until V_J's local structure stabilizes.

    Components of V_J minus the ball B(x, 3h) are counted at cell size
    h = (smallest piece of J)/resolution; two successive depths must agree and
    the pieces of J must pairwise meet only at x.
    """
    z, rad = _point(x, tol)
    disk = bounding_disk(system, "centroid")
    diam = system_diameter(system) or 2.0 * disk.radius
    hist = []
    prev = None
    for k in range(1, max_depth + 1):
        J = tuple(pieces_near(system, z, rad, length=k, disk=disk))
        if not J:
            raise ValueError("point is not on the attractor")
        if not _meet_only_at(system, J, z, rad, tol):
            hist.append((k, -1))
            prev = None
            continue
        h = min(system.ratio_of(j) for j in J) * diam / resolution
        cells = _cover_cells(system, J, h, disk)
        n, labels = count_components(cells, h, hole=z, hole_radius=3.0 * h)
        hist.append((k, n))
        if prev is not None and prev == n:
            bnd = _outer_boundary(system, J, z, rad, tol)
            delta = _neighborhood_radius(system, J, z, disk)
            return StableNeighborhood(z, J, tuple(range(1, n + 1)), k, tuple(hist), h,
                                      tuple(c.center for c in bnd), delta)
        prev = n
    raise InconclusiveError(f"stable neighborhood not found up to depth {max_depth}: {hist}")


def _neighborhood_radius(system: SimSystem, J: Sequence[Word], z: complex, disk: BoundingDisk) -> float:
    """Lower bound for the distance from x to the same-level pieces outside J."""
    k = len(J[0])
    jset = set(J)
    best = math.inf
    for idx in np.ndindex(*([system.m] * k)):
        w = tuple(int(c) + 1 for c in idx)
        if w in jset:
            continue
        d = disk.image(compose(system, w))
        best = min(best, abs(d.center - z) - d.radius)
    return max(best, 0.0)


# ---------------------------------------------------------------------------
# reports


@dataclass
class OrderReport:
    point: complex | Word
    address_count: int
    n_components: int
    ord_estimate: int
    upper_bounds: dict = field(default_factory=dict)
    boundary: tuple = ()
    notes: tuple = ()

    def to_dict(self) -> dict:
        if isinstance(self.point, tuple):
            pt = format_word(self.point)
        else:
            pt = [self.point.real, self.point.imag]
        return {
            "point": pt,
            "address_count": self.address_count,
            "n_components": self.n_components,
            "ord_estimate": self.ord_estimate,
            "upper_bounds": dict(self.upper_bounds),
            "boundary": [[b.real, b.imag] for b in self.boundary],
            "notes": list(self.notes),
        }


def zerner_bounds(system: SimSystem, s: int, depth: int, dendrite: bool) -> dict:
    m1 = zerner_constant(system, 1.0, depth).value
    m3 = zerner_constant(system, 1.0 / 3.0, depth).value
    out = {
        "M1": m1,
        "M1^2*s": m1 * m1 * s,
        "M1/3": m3,
        "M1/3*M1*s": m3 * m1 * s,
        "M1^3*s^2": m1 ** 3 * s * s,
    }
    if dendrite:
        out["M1/2"] = zerner_constant(system, 0.5, depth).value
    return out


def order_report(system: SimSystem, x, fi: FIReport, tol: float = 1e-7, depth: int = 5,
                 dendrite: bool = False, bounds: dict | None = None) -> OrderReport:
    """Counts at a point (complex or cluster) or at a piece (a word) plus the Zerner bounds.

    The bounds use lower estimates of the Zerner constants, so they are
    indicative, not certified.
    """
    if bounds is None:
        bounds = zerner_bounds(system, max(fi.s, 1), depth, dendrite)
    notes = ["Zerner constants are lower estimates"]
    if isinstance(x, tuple) and all(isinstance(c, int) for c in x):
        return _piece_report(system, x, tol, bounds, notes)
    z, _ = _point(x, tol)
    addr = count_addresses(system, x, tol)
    nb = stable_neighborhood(system, x, tol)
    return OrderReport(z, addr.count, nb.n_components, max(len(nb.boundary), nb.n_components), bounds,
                       nb.boundary, tuple(notes))


def _piece_report(system: SimSystem, j: Word, tol: float, bounds: dict, notes: list) -> OrderReport:
    pts = merge_clusters(boundary_points(system, j, tol=tol))
    total = sum(count_addresses(system, p, tol).count for p in pts)
    # components of a small neighborhood of K_j with K_j removed, summed over
    # the boundary points: at each one, the stable neighborhood pieces outside K_j
    n = 0
    k = len(j)
    for p in pts:
        nb = stable_neighborhood(system, p, tol)
        outside = [w for w in nb.J if w[:k] != j]
        if outside:
            cells = _cover_cells(system, outside, nb.cell_size, bounding_disk(system, "centroid"))
            n += count_components(cells, nb.cell_size, hole=nb.point, hole_radius=3.0 * nb.cell_size)[0]
    return OrderReport(j, total, n, len(pts), bounds, tuple(p.center for p in pts), tuple(notes))
