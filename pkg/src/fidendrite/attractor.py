"""Certified grid covers of the attractor and of its pieces.

Covers are built by expanding the multiindex tree below a target word until
every leaf piece has diameter at most ``eps`` (bounded through the invariant
disk), then rasterizing the leaf disks onto a square grid anchored at the
origin.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import _kernels
from .ifs_core import SimSystem, Similarity, Word, compose, fixed_point

DEFAULT_LEAF_BUDGET = 20_000_000
BUDGET_ENV = "FIDENDRITE_BUDGET"

# relative inflation applied to every disk radius before a geometric test
DISK_SLACK = 1e-9


class ResourceError(RuntimeError):
    """A computation needed more leaves/pairs than the configured budget.

    ``reached`` carries the finest scale (eps or tol) attained before stopping.
    """

    def __init__(self, message: str, reached: float | None = None):
        super().__init__(message)
        self.reached = reached


def leaf_budget(default: int = DEFAULT_LEAF_BUDGET) -> int:
    value = os.environ.get(BUDGET_ENV)
    return int(float(value)) if value else default


@dataclass(frozen=True)
class BoundingDisk:
    center: complex
    radius: float

    def contains(self, z, slack: float = 1e-12) -> bool:
        return abs(complex(z) - self.center) <= self.radius * (1 + slack) + slack

    def image(self, s: Similarity) -> "BoundingDisk":
        return BoundingDisk(s(self.center), s.ratio * self.radius)


def bounding_disk(system: SimSystem, center: complex | str | None = None) -> BoundingDisk:
    """A disk B with S_i(B) contained in B for every map.

    By default the center is the fixed point of the first map.  Passing
    ``center="centroid"`` uses the mean of all fixed points, which usually
    gives a much tighter disk; any explicit complex center is accepted too.
    """
    if center is None:
        c = fixed_point(system.maps[0])
    elif center == "centroid":
        c = complex(np.mean(system.fixed_points()))
    else:
        c = complex(center)
    R = max(abs(s(c) - c) for s in system.maps) / (1.0 - system.r_max)
    R = max(R, np.finfo(float).eps * max(1.0, abs(c)))
    disk = BoundingDisk(c, R)
    for s in system.maps:
        img = disk.image(s)
        # |S_i(c) - c| + r_i R <= R by construction
        assert abs(img.center - c) + img.radius <= R * (1 + 1e-12) + 1e-15, "bounding disk not invariant"
    return disk


def system_diameter(system: SimSystem) -> float:
    """Diameter of the fixed-point set: a lower bound for diam K, exact for most examples."""
    pts = np.array(system.fixed_points())
    if len(pts) < 2:
        return 0.0
    return float(np.max(np.abs(pts[:, None] - pts[None, :])))


@dataclass
class LeafSet:
    """Leaves of a multiindex-tree expansion, as arrays."""

    linear: np.ndarray
    translation: np.ndarray
    reflect: np.ndarray
    ratio: np.ndarray
    words: np.ndarray  # (N, depth) uint8, zero padded
    lengths: np.ndarray

    def __len__(self):
        return len(self.ratio)

    def apply(self, z: complex) -> np.ndarray:
        w = np.where(self.reflect, np.conj(z), z)
        return self.linear * w + self.translation

    def word(self, k: int) -> Word:
        return tuple(int(x) for x in self.words[k, : self.lengths[k]])


def _child_arrays(a, t, f, r, system: SimSystem):
    la, lt, lf, lr = system.arrays()
    m = len(la)
    ca = np.where(f[:, None], np.conj(la)[None, :], la[None, :])
    ct = np.where(f[:, None], np.conj(lt)[None, :], lt[None, :])
    na = (a[:, None] * ca).ravel()
    nt = (a[:, None] * ct + t[:, None]).ravel()
    nf = (f[:, None] != lf[None, :]).ravel()
    nr = (r[:, None] * lr[None, :]).ravel()
    return na, nt, nf, nr, m


def expand_tree(
    system: SimSystem,
    target: Sequence[int] = (),
    stop_ratio: float | None = None,
    max_depth: int | None = None,
    budget: int | None = None,
    keep_words: bool = True,
    all_levels: bool = False,
) -> LeafSet:
    """Expand the tree below ``target``.

    A node becomes a leaf once its ratio (relative to the root map, i.e. the
    absolute ratio of S_word) is <= ``stop_ratio`` or its word length below
    ``target`` reaches ``max_depth``.  With ``all_levels`` every visited node
    (except the root) is returned, not only leaves.
    """
    if stop_ratio is None and max_depth is None:
        raise ValueError("need stop_ratio or max_depth")
    budget = leaf_budget() if budget is None else budget
    root = compose(system, target)
    a = np.array([root.linear])
    t = np.array([root.translation])
    f = np.array([root.reflect])
    r = np.array([root.ratio])
    words = np.zeros((1, 0), dtype=np.uint8)
    out = []
    depth = 0
    total = 0
    while len(r):
        leaf = np.zeros(len(r), dtype=bool)
        if stop_ratio is not None:
            leaf |= r <= stop_ratio * (1.0 + 1e-12)
        if max_depth is not None and depth >= max_depth:
            leaf[:] = True
        if all_levels and depth > 0:
            out.append((a, t, f, r, words))
        elif leaf.any():
            out.append((a[leaf], t[leaf], f[leaf], r[leaf], words[leaf]))
            total += int(leaf.sum())
        act = ~leaf
        if not act.any():
            break
        a, t, f, r, words = a[act], t[act], f[act], r[act], words[act]
        if total + len(r) * system.m > budget:
            raise ResourceError(
                f"tree expansion needs more than {budget} leaves",
                reached=float(r.max()),
            )
        a, t, f, r, m = _child_arrays(a, t, f, r, system)
        if keep_words:
            words = np.repeat(words, m, axis=0)
            letters = np.tile(np.arange(1, m + 1, dtype=np.uint8), len(words) // m)
            words = np.concatenate([words, letters[:, None]], axis=1)
        else:
            words = np.zeros((len(r), 0), dtype=np.uint8)
        if all_levels:
            total += len(r)
        depth += 1
    if not out:
        return LeafSet(*(np.empty(0, dtype=d) for d in (complex, complex, bool, float)),
                       np.zeros((0, 0), dtype=np.uint8), np.zeros(0, dtype=np.int64))
    width = max(w.shape[1] for *_, w in out)
    padded = [np.pad(w, ((0, 0), (0, width - w.shape[1]))) for *_, w in out]
    lengths = np.concatenate([np.full(len(w), w.shape[1], dtype=np.int64) for *_, w in out])
    return LeafSet(
        np.concatenate([o[0] for o in out]),
        np.concatenate([o[1] for o in out]),
        np.concatenate([o[2] for o in out]),
        np.concatenate([o[3] for o in out]),
        np.concatenate(padded) if padded else np.zeros((0, 0), np.uint8),
        lengths,
    )


@dataclass(frozen=True, eq=False)
class CellCover:
    cell_size: float
    cells: np.ndarray  # (N, 2) int64, lexicographically sorted, unique
    error_bound: float
    leaf_count: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.cells) == 0:
            raise ValueError("a cover needs at least one cell")

    def __len__(self):
        return len(self.cells)

    @cached_property
    def cell_set(self) -> frozenset:
        return frozenset(map(tuple, self.cells.tolist()))

    @cached_property
    def centers(self) -> np.ndarray:
        h = self.cell_size
        return (self.cells[:, 0] + 0.5) * h + 1j * (self.cells[:, 1] + 0.5) * h

    @cached_property
    def _tree(self) -> cKDTree:
        c = self.centers
        return cKDTree(np.column_stack([c.real, c.imag]))

    def cell_of(self, z: complex) -> tuple[int, int]:
        h = self.cell_size
        return (math.floor(z.real / h), math.floor(z.imag / h))

    def distance_to(self, z) -> np.ndarray:
        """Distance from points to the nearest cell center."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        d, _ = self._tree.query(np.column_stack([z.real, z.imag]))
        return d

    def near(self, z, radius: float) -> bool:
        """True when z lies within ``radius`` of the cell union (conservative)."""
        return bool(self.distance_to(z)[0] <= radius + self.cell_size / math.sqrt(2))

    def bbox(self) -> tuple[int, int, int, int]:
        lo = self.cells.min(axis=0)
        hi = self.cells.max(axis=0)
        return int(lo[0]), int(lo[1]), int(hi[0]), int(hi[1])

    def bitmap(self) -> np.ndarray:
        """Boolean raster, row 0 = top (largest y)."""
        x0, y0, x1, y1 = self.bbox()
        img = np.zeros((y1 - y0 + 1, x1 - x0 + 1), dtype=bool)
        img[y1 - self.cells[:, 1], self.cells[:, 0] - x0] = True
        return img

    def to_pbm(self) -> bytes:
        """Binary PBM (P4): row-major from the top row, bit 1 = occupied cell."""
        img = self.bitmap()
        h, w = img.shape
        return f"P4\n{w} {h}\n".encode("ascii") + np.packbits(img, axis=1).tobytes()

    def to_svg(self, scale: float | None = None, fill: str = "#222") -> str:
        from .render import cover_svg

        return cover_svg(self, scale=scale, fill=fill)


def read_pbm(data: bytes) -> np.ndarray:
    """Inverse of :meth:`CellCover.to_pbm` (P4 only)."""
    parts = data.split(b"\n", 2)
    if parts[0] != b"P4":
        raise ValueError("not a binary PBM")
    w, h = (int(x) for x in parts[1].split())
    bits = np.unpackbits(np.frombuffer(parts[2], dtype=np.uint8).reshape(h, -1), axis=1)
    return bits[:, :w].astype(bool)


def cells_from_disks(centers: np.ndarray, radii: np.ndarray, h: float) -> np.ndarray:
    raw = _kernels.rasterize_disks(centers.real, centers.imag, radii, h, DISK_SLACK)
    return np.unique(raw, axis=0)


def cover(
    system: SimSystem,
    target: Sequence[int] = (),
    eps: float = 0.01,
    cell_size: float | None = None,
    budget: int | None = None,
    disk: BoundingDisk | None = None,
) -> CellCover:
    """Certified cover of K_target with leaf pieces of diameter <= eps.

    The grid step defaults to eps/2, which keeps the error bound below 2*eps.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    disk = bounding_disk(system) if disk is None else disk
    R = disk.radius
    h = eps / 2.0 if cell_size is None else float(cell_size)
    leaves = expand_tree(system, target, stop_ratio=eps / (2.0 * R), budget=budget, keep_words=False)
    centers = leaves.apply(disk.center)
    radii = leaves.ratio * R
    cells = cells_from_disks(centers, radii, h)
    err = h * math.sqrt(2.0) + 2.0 * float(radii.max())
    return CellCover(h, cells, err, leaf_count=len(leaves), meta={"target": tuple(target), "eps": eps})


def leaf_count(system: SimSystem, target: Sequence[int] = (), eps: float = 0.01, disk: BoundingDisk | None = None) -> int:
    disk = bounding_disk(system) if disk is None else disk
    return len(expand_tree(system, target, stop_ratio=eps / (2.0 * disk.radius), keep_words=False))


def hausdorff_upper(a: CellCover, b: CellCover) -> float:
    """Upper bound on the Hausdorff distance between the sets the covers certify."""
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty cover")
    pa = np.column_stack([a.centers.real, a.centers.imag])
    pb = np.column_stack([b.centers.real, b.centers.imag])
    dab = cKDTree(pb).query(pa)[0].max()
    dba = cKDTree(pa).query(pb)[0].max()
    grid = max(dab, dba)
    if not math.isclose(a.cell_size, b.cell_size, rel_tol=1e-12):
        grid += max(a.cell_size, b.cell_size) / math.sqrt(2.0)
    return float(grid + a.error_bound + b.error_bound)


def image_cells(c: CellCover, s: Similarity, h: float | None = None) -> np.ndarray:
    """Rasterize the image under ``s`` of the disks circumscribing each cell."""
    h = c.cell_size if h is None else h
    centers = s(c.centers)
    radii = np.full(len(centers), s.ratio * c.cell_size / math.sqrt(2.0))
    return cells_from_disks(centers, radii, h)


def hutchinson_image(system: SimSystem, c: CellCover) -> np.ndarray:
    return np.unique(np.concatenate([image_cells(c, s) for s in system.maps]), axis=0)


def dilate_cells(cells: np.ndarray, k: int) -> set:
    out = set()
    rng = range(-k, k + 1)
    for x, y in cells.tolist():
        for dx in rng:
            for dy in rng:
                out.add((x + dx, y + dy))
    return out
