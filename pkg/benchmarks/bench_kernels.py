"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Times one pair-expansion round and one disk rasterization on the same
inputs for every available backend, checks the outputs agree, and prints a
table.  End-to-end timings run fi_report and a cover with each backend
forced through the dispatch module.
"""

import argparse
import time

import numpy as np

from fidendrite import _kernels, attractor, intersection
from fidendrite.attractor import bounding_disk, cover
from fidendrite.cli import load_spec
from fidendrite.intersection import fi_report


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def _pairs(n, seed=0):
    rng = np.random.default_rng(seed)

    def side():
        r = rng.choice([0.5 ** k for k in range(3, 10)], n)
        a = r * np.exp(1j * rng.uniform(-np.pi, np.pi, n))
        t = 0.5 * (rng.normal(size=n) + 1j * rng.normal(size=n))
        return (a.real.copy(), a.imag.copy(), t.real.copy(), t.imag.copy(), rng.random(n) < 0.2, r)

    return side(), side()


def _sysmaps(system):
    la, lt, lf, lr = system.arrays()
    return (la.real.copy(), la.imag.copy(), lt.real.copy(), lt.imag.copy(), lf.copy(), lr.copy())


class _forced:
    """Route the package's kernel calls through one backend."""

    def __init__(self, backend):
        self.backend = backend

    def __enter__(self):
        self.saved = []
        for mod in (_kernels, attractor, intersection):
            for name in ("expand_pairs", "rasterize_disks"):
                if hasattr(mod, name):
                    self.saved.append((mod, name, getattr(mod, name)))
                    setattr(mod, name, getattr(self.backend, name))

    def __exit__(self, *exc):
        for mod, name, fn in self.saved:
            setattr(mod, name, fn)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--pairs", type=int, default=200_000)
    ap.add_argument("--disks", type=int, default=200_000)
    args = ap.parse_args(argv)

    gasket = load_spec("gasket").to_system()
    disk = bounding_disk(gasket, "centroid")
    U, V = _pairs(args.pairs)
    sysmaps = _sysmaps(gasket)
    rng = np.random.default_rng(1)
    cx, cy = rng.uniform(0, 1, args.disks), rng.uniform(0, 1, args.disks)
    rad = rng.uniform(0, 2e-3, args.disks)

    rows = []
    outputs = {}
    for b in _kernels.backends():
        t_pairs, out_p = _best(lambda: b.expand_pairs(U, V, sysmaps, disk.center, disk.radius,
                                                     1e-3, 1e-9, 1e-13), args.repeat)
        t_rast, out_r = _best(lambda: b.rasterize_disks(cx, cy, rad, 1e-3, 1e-9), args.repeat)
        with _forced(b):
            t_fi, _ = _best(lambda: fi_report(gasket), max(1, args.repeat // 2))
            t_cov, _ = _best(lambda: cover(gasket, eps=1e-3), max(1, args.repeat // 2))
        outputs[b.BACKEND] = (out_p, np.unique(out_r, axis=0))
        rows.append((b.BACKEND, t_pairs, t_rast, t_fi, t_cov))

    ref = outputs["python"]
    for name, (p, r) in outputs.items():
        same = all(np.array_equal(x, y) for x, y in zip(p[:4], ref[0][:4])) and np.array_equal(r, ref[1])
        print(f"{name}: outputs {'match' if same else 'DIFFER FROM'} the fallback")

    print(f"\n{'backend':<8}" + "".join(f"{h:>14}" for h in ("expand_pairs", "rasterize", "fi_report", "cover")))
    for name, *ts in rows:
        print(f"{name:<8}" + "".join(f"{t * 1e3:>12.1f}ms" for t in ts))
    if len(rows) > 1:
        base = rows[0][1:]
        for name, *ts in rows[1:]:
            print(f"speedup ({name}): " + ", ".join(f"{b / t:.1f}x" for b, t in zip(base, ts)))
    else:
        print("compiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
