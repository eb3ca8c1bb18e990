"""Invariant arcs at fixed points and their slope parameters.

An arc gamma ending at z0 = fix(S) with S^n(gamma) contained in gamma winds
around z0 like a logarithmic spiral: along any subarc the argument increment
of z - z0 differs from lambda times the increment of log|z - z0| by a bounded
amount.  Here arcs are polylines running from a point y toward z0, built from
one fundamental piece (y to S^n(y)) and its exact images.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import ndimage

from .attractor import bounding_disk, cover, system_diameter
from .ifs_core import Address, SimSystem, Similarity, Word, compose, format_word, normalize_angle
from .intersection import IntersectionCluster, boundary_points, detect_address_pair, merge_clusters


class ArcError(RuntimeError):
    """Arc construction failed (resolution too coarse or no recurrent point)."""


# ---------------------------------------------------------------------------
# argument increments


def arg_increment(polyline, z0: complex, max_split: int = 20) -> float:
    """Increment of Arg(z - z0) along the polyline.

    Each step is the principal angle of (z_{k+1} - z0)/(z_k - z0).  A step
    at or near pi is subdivided until it is not; straight segments that do
    not pass through z0 always sweep less than pi.
    """
    w = np.asarray(polyline, dtype=complex) - complex(z0)
    if w.size < 2:
        return 0.0
    if np.any(w == 0):
        raise ValueError("polyline vertex at the base point")
    steps = np.angle(w[1:] / w[:-1])
    bad = np.flatnonzero(np.abs(steps) > math.pi - 1e-9)
    total = float(steps.sum())
    for k in bad:
        total -= steps[k]
        total += _split_step(w[k], w[k + 1], max_split)
    return total


def _split_step(a: complex, b: complex, max_split: int) -> float:
    for level in range(1, max_split + 1):
        t = np.linspace(0.0, 1.0, 2 ** level + 1)
        pts = a + t * (b - a)
        if np.any(pts == 0):
            raise ValueError("polyline passes through the base point")
        st = np.angle(pts[1:] / pts[:-1])
        if np.all(np.abs(st) < math.pi - 1e-9):
            return float(st.sum())
    raise ArithmeticError("argument step stays near pi after subdivision")


def cumulative_arg(polyline, z0: complex) -> np.ndarray:
    """Continuous Arg(z - z0) at the vertices, starting from 0."""
    w = np.asarray(polyline, dtype=complex) - complex(z0)
    steps = np.angle(w[1:] / w[:-1])
    if np.any(np.abs(steps) > math.pi - 1e-9):
        steps = np.array([arg_increment(w[k:k + 2], 0.0) for k in range(len(w) - 1)])
    return np.concatenate([[0.0], np.cumsum(steps)])


# ---------------------------------------------------------------------------
# arcs


@dataclass(frozen=True, eq=False)
class InvariantArc:
    anchor: complex
    polyline: np.ndarray  # from y toward the anchor; the last vertex is the anchor
    period_word: Word
    fundamental_count: int
    fundamental_len: int  # polyline[:fundamental_len] runs from y to S^n(y)
    period_map: Similarity  # S_i^n
    cell_size: float = 0.0
    eps: float = 0.0
    notes: tuple = ()

    @property
    def y(self) -> complex:
        return complex(self.polyline[0])

    @property
    def fundamental(self) -> np.ndarray:
        return self.polyline[: self.fundamental_len]

    def doubled(self) -> "InvariantArc":
        """Same arc viewed with the period word repeated twice."""
        L = self.fundamental_len
        fund = self.polyline[: 2 * L - 1]
        if len(fund) < 2 * L - 1:
            raise ValueError("arc too short to double")
        return replace(self, period_word=self.period_word + self.period_word,
                       fundamental_count=2 * self.fundamental_count, fundamental_len=2 * L - 1,
                       period_map=self.period_map.then(self.period_map))

    def to_dict(self) -> dict:
        return {
            "anchor": [self.anchor.real, self.anchor.imag],
            "period_word": format_word(self.period_word),
            "fundamental_count": self.fundamental_count,
            "vertices": len(self.polyline),
            "y": [self.y.real, self.y.imag],
            "cell_size": self.cell_size,
        }


def tile_arc(fund: np.ndarray, period: Similarity, eps: float) -> np.ndarray:
    """Fundamental piece plus its images under period^k down to eps*|y - z0|, then z0."""
    z0 = period.fixed_point()
    fund = np.asarray(fund, dtype=complex)
    y = fund[0]
    scale = abs(y - z0)
    parts = [fund]
    cur = fund
    while abs(cur[-1] - z0) > eps * scale:
        cur = period(cur)
        parts.append(cur[1:])
        if len(parts) > 10_000:
            raise ArcError("arc tiling does not converge")
    parts.append(np.array([z0]))
    return np.concatenate(parts)


def spiral_arc(period: Similarity, y: complex = 1.0, windings: int = 0, eps: float = 1e-4,
               samples: int = 64) -> InvariantArc:
    """A logarithmic spiral arc invariant under a rotating similarity.

    The fundamental piece z0 + (y - z0) * exp(t*(log r + i*(theta + 2*pi*windings)))
    for t in [0, 1] runs from y to period(y).
    """
    if period.reflect:
        period = period.then(period)
    z0 = period.fixed_point()
    theta = normalize_angle(period.angle) + 2.0 * math.pi * windings
    t = np.linspace(0.0, 1.0, samples + 1)
    fund = z0 + (complex(y) - z0) * np.exp(t * complex(math.log(period.ratio), theta))
    fund[-1] = period(complex(y))
    poly = tile_arc(fund, period, eps)
    return InvariantArc(z0, poly, (1,), 1, len(fund), period, eps=eps, notes=("synthetic spiral",))


def _loop_erase(poly: np.ndarray, tol: float) -> np.ndarray:
    """Drop loops: a vertex close to an earlier kept vertex cuts back to it."""
    out = []
    for z in poly:
        if len(out) > 1:
            arr = np.array(out[:-1])
            near = np.flatnonzero(np.abs(arr - z) <= tol)
            if len(near):
                del out[near[0] + 1:]
                continue
        out.append(z)
    return np.array(out)


@dataclass
class _Local:
    """Cover of K near a fixed point, split into components away from it."""

    word: Word
    period: Similarity
    anchor: complex
    boundary: list  # points of dK_i
    D: list  # S_i^{-1} of the boundary points
    delta: float
    h: float
    labels: np.ndarray  # label grid (0 = empty)
    origin: np.ndarray  # integer cell coordinates of labels[0, 0]
    active: list  # labels of the components holding points of D

    def cell(self, z: complex) -> tuple[int, int] | None:
        """Grid index of the nearest occupied cell within two cells of z."""
        ix = int(math.floor(z.real / self.h)) - self.origin[0]
        iy = int(math.floor(z.imag / self.h)) - self.origin[1]
        best, bd = None, math.inf
        for dx in range(-2, 3):
            for dy in range(-2, 3):
                x, y = ix + dx, iy + dy
                if 0 <= x < self.labels.shape[0] and 0 <= y < self.labels.shape[1] and self.labels[x, y]:
                    c = complex((x + self.origin[0] + 0.5) * self.h, (y + self.origin[1] + 0.5) * self.h)
                    if abs(c - z) < bd:
                        best, bd = (x, y), abs(c - z)
        return best

    def center(self, c) -> complex:
        return complex((c[0] + self.origin[0] + 0.5) * self.h, (c[1] + self.origin[1] + 0.5) * self.h)

    def label_of(self, z: complex) -> int:
        c = self.cell(z)
        return 0 if c is None else int(self.labels[c])

    def seeds(self) -> list[complex]:
        """One point of D per component."""
        out = []
        for lab in self.active:
            out.append(next(y for y in self.D if self.label_of(y) == lab))
        return out


def _local_cover(system: SimSystem, word: Sequence[int], tol: float = 1e-9,
                 resolution: int = 256) -> _Local:
    word = tuple(word)
    S = compose(system, word)
    if S.reflect:
        word = word + word
        S = compose(system, word)
    z0 = S.fixed_point()
    bnd = [c.center for c in merge_clusters(boundary_points(system, word, tol=tol))]
    bnd = [b for b in bnd if abs(b - z0) > 1e-7]
    if not bnd:
        raise ArcError(f"piece {format_word(word)} has no boundary points away from its fixed point")
    inv = S.inverse()
    D = [inv(b) for b in bnd]
    diam = system_diameter(system)
    delta = 0.25 * min(abs(b - z0) for b in bnd)
    h = min(diam / resolution, delta / 4.0)
    disk = bounding_disk(system, "centroid")
    cov = cover(system, eps=2.0 * h, cell_size=h, disk=disk)
    cells = cov.cells
    ctr = (cells[:, 0] + 0.5) * h + 1j * (cells[:, 1] + 0.5) * h
    cells = cells[np.abs(ctr - z0) > delta]
    lo = cells.min(axis=0)
    grid = np.zeros(tuple(cells.max(axis=0) - lo + 1), dtype=bool)
    grid[tuple((cells - lo).T)] = True
    labels, n = ndimage.label(grid, structure=np.ones((3, 3), dtype=int))
    loc = _Local(word, S, z0, bnd, D, delta, h, labels, lo, [])
    # every component of K minus z0 holds a point of D, far from the removed
    # ball; cover fragments cut off by the ball hold none
    loc.active = sorted({loc.label_of(y) for y in D} - {0})
    return loc


def _bfs_path(loc: _Local, start: complex, targets: dict) -> tuple[list, int]:
    """Shortest 8-connected cell path from start to the nearest target cell.

    ``targets`` maps target cells to boundary-point indices.  Returns the
    path of cells and the index reached.
    """
    s = loc.cell(start)
    if s is None:
        raise ArcError("start point not on the cover")
    lab = loc.labels[s]
    parent = {s: None}
    queue = deque([s])
    shape = loc.labels.shape
    while queue:
        c = queue.popleft()
        if c in targets and c != s:
            path = [c]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return path[::-1], targets[c]
        x, y = c
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                nb = (x + dx, y + dy)
                if (dx or dy) and 0 <= nb[0] < shape[0] and 0 <= nb[1] < shape[1] \
                        and nb not in parent and loc.labels[nb] == lab:
                    parent[nb] = c
                    queue.append(nb)
    raise ArcError("no boundary point reachable in this component")


def invariant_arc(system: SimSystem, i: Sequence[int], component_seed: complex, eps: float = 1e-4,
                  resolution: int = 256, local: _Local | None = None) -> InvariantArc:
    """Invariant arc at fix(S_i) inside the component of K minus fix(S_i) holding the seed.

    D = S_i^{-1}(dK_i).  From y in D a shortest cell path runs toward the
    fixed point until it first reaches a boundary point b of K_i; then
    phi(y) = S_i^{-1}(b).  Following phi from a point of D in the seed's
    component until it cycles (phi^n(y) = y) gives a path from y to S_i^n(y)
    out of n mapped pieces; its images under S_i^{kn} tile the arc.
    """
    loc = _local_cover(system, i, resolution=resolution) if local is None else local
    S = loc.period
    lab = loc.label_of(complex(component_seed))
    if lab == 0 or lab not in loc.active:
        raise ArcError("seed is not in a component reaching the fixed point")
    targets = {}
    for k, b in enumerate(loc.boundary):
        c = loc.cell(b)
        if c is not None:
            targets.setdefault(c, k)
    starts = [k for k, y in enumerate(loc.D) if loc.label_of(y) == lab]
    if not starts:
        raise ArcError("no point of D in the component")
    starts.sort(key=lambda k: (abs(loc.D[k] - component_seed), k))
    seen = {}
    pieces = []
    k = starts[0]
    step = 0
    while k not in seen:
        seen[k] = step
        y = loc.D[k]
        cells, hit = _bfs_path(loc, y, targets)
        b = loc.boundary[hit]
        poly = [y] + [loc.center(c) for c in cells[1:-1]] + [b]
        pieces.append(np.array(poly))
        k = hit
        step += 1
        if step > len(loc.D) + 1:
            raise ArcError("no recurrent point found")
    a = seen[k]
    n = step - a
    period = S
    for _ in range(n - 1):
        period = period.then(S)
    # gamma' = P_a + S(P_{a+1}) + ... + S^{n-1}(P_{a+n-1})
    parts = []
    power = None
    for j in range(n):
        p = pieces[a + j]
        img = p if power is None else power(p)
        parts.append(img if not parts else img[1:])
        power = S if power is None else power.then(S)
    fund = np.concatenate(parts)
    fund = _loop_erase(fund, 1e-12 * max(1.0, abs(fund[0])))
    fund[-1] = period(fund[0])
    poly = tile_arc(fund, period, eps)
    notes = ()
    if a > 0:
        notes = (f"started {a} steps before the cycle",)
    return InvariantArc(loc.anchor, poly, loc.word, n, len(fund), period, loc.h, eps, notes)


# ---------------------------------------------------------------------------
# slope parameters


@dataclass(frozen=True)
class SlopeEstimate:
    lam: float
    winding: int
    delta_arg: float
    log_lip: float
    residual: float
    fundamental_count: int = 1
    notes: tuple = ()

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "winding": self.winding,
            "delta_arg": self.delta_arg,
            "log_lip": self.log_lip,
            "residual": self.residual,
            "fundamental_count": self.fundamental_count,
            "notes": list(self.notes),
        }


def _strip_values(poly: np.ndarray, z0: complex, lam: float) -> np.ndarray:
    """f = cumArg - lam*log|z - z0| at the vertices."""
    return cumulative_arg(poly, z0) - lam * np.log(np.abs(poly - z0))


def strip_range(poly, z0: complex, lam: float) -> tuple[float, float]:
    """Exact min and max of f = cumArg - lam*log|z - z0| over a polyline.

    Within a segment z0 + w + t*d the derivative of f vanishes where
    Im((1 - i*lam) d conj(w + t d)) = 0, which is linear in t.
    """
    poly = np.asarray(poly, dtype=complex)
    f = _strip_values(poly, z0, lam)
    lo, hi = float(f.min()), float(f.max())
    if lam == 0 or len(poly) < 2:
        return lo, hi
    w = poly[:-1] - z0
    d = poly[1:] - poly[:-1]
    dd = np.abs(d) ** 2
    ok = dd > 0
    t = np.zeros_like(dd)
    with np.errstate(over="ignore", invalid="ignore"):  # tiny lam: t = +-inf falls outside (0, 1)
        t[ok] = np.imag((1 - 1j * lam) * d[ok] * np.conj(w[ok])) / (lam * dd[ok])
    inner = ok & (t > 0) & (t < 1)
    if inner.any():
        u = w[inner] + t[inner] * d[inner]
        val = f[:-1][inner] + np.angle(u / w[inner]) - lam * (np.log(np.abs(u)) - np.log(np.abs(w[inner])))
        lo, hi = min(lo, float(val.min())), max(hi, float(val.max()))
    return lo, hi


def point_on(poly: np.ndarray, s: float) -> tuple[int, float, complex]:
    """Point at fractional vertex position s (segment index plus offset)."""
    k = min(int(math.floor(s)), len(poly) - 2)
    t = s - k
    return k, t, poly[k] + t * (poly[k + 1] - poly[k])


def subarc_deviation(poly, z0: complex, lam: float, s1: float, s2: float) -> float:
    """|dArg - lam * dlog| between two positions of the polyline."""
    poly = np.asarray(poly, dtype=complex)
    f = _strip_values(poly, z0, lam)

    def val(s):
        k, t, z = point_on(poly, s)
        w = poly[k] - z0
        return f[k] + np.angle((z - z0) / w) - lam * (math.log(abs(z - z0)) - math.log(abs(w)))

    return abs(val(s2) - val(s1))


def slope_parameter(arc: InvariantArc) -> SlopeEstimate:
    """Slope parameter lambda = dArg / log Lip(S^n) over the fundamental piece."""
    z0 = arc.anchor
    fund = arc.fundamental
    delta = arg_increment(fund, z0)
    log_lip = math.log(arc.period_map.ratio)
    lam = delta / log_lip
    theta = normalize_angle(arc.period_map.angle)
    winding = int(round((delta - theta) / (2.0 * math.pi)))
    body = arc.polyline[:-1]  # the anchor itself is excluded
    lo, hi = strip_range(body, z0, lam)
    notes = []
    if abs(delta - theta - 2.0 * math.pi * winding) > 1e-6:
        notes.append("argument increment disagrees with the period rotation")
    return SlopeEstimate(lam, winding, delta, log_lip, hi - lo, arc.fundamental_count, tuple(notes))


# ---------------------------------------------------------------------------
# matching at contact points


@dataclass
class ParameterMatch:
    status: str  # "matched", "mismatched" or "inconclusive"
    lam: float | None
    table: list = field(default_factory=list)
    note: str = ""

    def to_dict(self) -> dict:
        return {"status": self.status, "lambda": self.lam, "table": list(self.table), "note": self.note}


def parameter_match(system: SimSystem, p: IntersectionCluster, tol: float = 1e-3, eps: float = 1e-4,
                    resolution: int = 256) -> ParameterMatch:
    """Slope parameters of invariant arcs in every component at the pulled-back fixed points.

    For each address j(i) of p, p' = S_j^{-1}(p) is fix(S_i); arcs are built
    in each component of K minus p'.  All slopes must agree within tol.
    """
    pair = p.address_pair
    if pair is None:
        pair = detect_address_pair(system, p)
    if pair is None:
        return ParameterMatch("inconclusive", None, note="no preperiodic address found")
    table = []
    for addr in pair:
        try:
            loc = _local_cover(system, addr.period, resolution=resolution)
        except ArcError as exc:
            table.append({"address": str(addr), "error": str(exc)})
            continue
        for seed in loc.seeds():
            row = {"address": str(addr), "anchor": [loc.anchor.real, loc.anchor.imag],
                   "seed": [round(seed.real, 12), round(seed.imag, 12)]}
            try:
                arc = invariant_arc(system, addr.period, seed, eps=eps, local=loc)
                est = slope_parameter(arc)
                row.update(est.to_dict())
                row["period_word"] = format_word(arc.period_word)
            except (ArcError, ArithmeticError, ValueError) as exc:
                row["error"] = str(exc)
            table.append(row)
    lams = [r["lambda"] for r in table if "lambda" in r]
    if not lams or len(lams) < len(table):
        return ParameterMatch("inconclusive", None, table, note="some arcs could not be built")
    if not all(math.isfinite(r["residual"]) for r in table):
        return ParameterMatch("inconclusive", None, table, note="unbounded residual")
    if max(lams) - min(lams) <= tol:
        return ParameterMatch("matched", float(np.median(lams)), table)
    return ParameterMatch("mismatched", None, table, note="slope parameters differ at a certified point")
