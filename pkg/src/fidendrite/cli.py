"""Command line interface and system spec files.

A spec is a JSON object::

    {"name": "gasket", "angle_unit": "degrees",
     "maps": [{"r": 0.5, "theta": 0, "reflect": false, "t": [0.0, 0.0]}, ...],
     "open_set": [[x0, y0, x1, y1], ...],             (optional)
     "assertions": {"osc_asserted": true},            (optional)
     "tolerances": {"fi_tol": 1e-7}}                  (optional)

Exit codes: 0 success or positive verdict, 10 negative verdict with a
witness, 20 inconclusive, 30 resource budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .attractor import ResourceError, cover
from .graph import Outcome, build_graph, dendrite_verdict, format_cycle, is_tree, to_dot
from .ifs_core import SimSystem, Similarity, compose, format_word, normalize_angle, parse_word
from .intersection import Verdict, check_open_set, fi_report
from .order import InconclusiveError, order_report, zerner_bounds, zerner_constant
from .render import scene_svg
from .slope import ArcError, _local_cover, invariant_arc, parameter_match, slope_parameter

EXIT_OK = 0
EXIT_NEGATIVE = 10
EXIT_AMBIGUOUS = 20
EXIT_RESOURCE = 30

ANGLE_UNITS = ("degrees", "radians")
ASSERTION_KEYS = ("osc_asserted", "wsp_asserted")
DEFAULT_TOLERANCES = {
    "fi_tol": 1e-7,
    "render_eps": 2e-3,
    "arc_eps": 1e-4,
    "slope_tol": 1e-3,
    "zerner_depth": 5,
    "max_level": 3,
}


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class MapSpec:
    r: float
    theta: float
    reflect: bool
    t: complex


@dataclass(frozen=True)
class SystemSpec:
    maps: tuple[MapSpec, ...]
    angle_unit: str = "degrees"
    name: str = ""
    open_set: tuple[tuple[float, float, float, float], ...] | None = None
    assertions: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    def tolerance(self, key: str):
        return self.tolerances.get(key, DEFAULT_TOLERANCES[key])

    def to_system(self) -> SimSystem:
        conv = math.radians if self.angle_unit == "degrees" else float
        return SimSystem(tuple(Similarity(m.r, conv(m.theta), m.reflect, m.t) for m in self.maps))

    def to_dict(self) -> dict:
        out = {"name": self.name, "angle_unit": self.angle_unit,
               "maps": [{"r": m.r, "theta": m.theta, "reflect": m.reflect, "t": [m.t.real, m.t.imag]}
                        for m in self.maps]}
        if self.open_set is not None:
            out["open_set"] = [list(r) for r in self.open_set]
        if self.assertions:
            out["assertions"] = dict(sorted(self.assertions.items()))
        if self.tolerances:
            out["tolerances"] = dict(sorted(self.tolerances.items()))
        return out


def _normalize_theta(theta: float, unit: str) -> float:
    if unit == "radians":
        return normalize_angle(theta)
    x = math.fmod(theta, 360.0)
    if x <= -180.0:
        x += 360.0
    elif x > 180.0:
        x -= 360.0
    return x + 0.0


def _number(v, what: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SpecError(f"{what} must be a number")
    if not math.isfinite(v):
        raise SpecError(f"{what} must be finite")
    return float(v)


def spec_from_dict(data: dict) -> SystemSpec:
    if not isinstance(data, dict):
        raise SpecError("spec must be a JSON object")
    known = {"name", "angle_unit", "maps", "open_set", "assertions", "tolerances"}
    extra = set(data) - known
    if extra:
        raise SpecError(f"unknown fields: {sorted(extra)}")
    unit = data.get("angle_unit")
    if unit not in ANGLE_UNITS:
        raise SpecError("angle_unit must be 'degrees' or 'radians'")
    raw = data.get("maps")
    if not isinstance(raw, list) or len(raw) < 2:
        raise SpecError("a system needs at least 2 maps")
    maps = []
    for k, m in enumerate(raw, start=1):
        if not isinstance(m, dict):
            raise SpecError(f"map {k}: must be an object")
        r = _number(m.get("r"), f"map {k}: r")
        if not r > 0:
            raise SpecError(f"map {k}: ratio must be > 0")
        if not r < 1:
            raise SpecError(f"map {k}: ratio must be < 1")
        theta = _normalize_theta(_number(m.get("theta", 0.0), f"map {k}: theta"), unit)
        reflect = m.get("reflect", False)
        if not isinstance(reflect, bool):
            raise SpecError(f"map {k}: reflect must be true or false")
        t = m.get("t", [0.0, 0.0])
        if not (isinstance(t, list) and len(t) == 2):
            raise SpecError(f"map {k}: t must be [re, im]")
        maps.append(MapSpec(r, theta, reflect, complex(_number(t[0], f"map {k}: t"), _number(t[1], f"map {k}: t"))))
    open_set = data.get("open_set")
    if open_set is not None:
        if not isinstance(open_set, list) or not all(isinstance(x, list) and len(x) == 4 for x in open_set):
            raise SpecError("open_set must be a list of [x0, y0, x1, y1] rectangles")
        open_set = tuple(tuple(_number(v, "open_set") for v in rect) for rect in open_set)
    assertions = data.get("assertions", {}) or {}
    if set(assertions) - set(ASSERTION_KEYS) or not all(isinstance(v, bool) for v in assertions.values()):
        raise SpecError(f"assertions: only boolean {list(ASSERTION_KEYS)} are allowed")
    tolerances = data.get("tolerances", {}) or {}
    if set(tolerances) - set(DEFAULT_TOLERANCES):
        raise SpecError(f"tolerances: unknown keys {sorted(set(tolerances) - set(DEFAULT_TOLERANCES))}")
    for key, v in tolerances.items():
        _number(v, f"tolerances.{key}")
    name = data.get("name", "")
    if not isinstance(name, str):
        raise SpecError("name must be a string")
    return SystemSpec(tuple(maps), unit, name, open_set, dict(assertions), dict(tolerances))


def parse_spec(text: str) -> SystemSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON: {exc}") from None
    return spec_from_dict(data)


def serialize_spec(spec: SystemSpec) -> str:
    return json.dumps(spec.to_dict(), indent=2) + "\n"


def bundled_specs() -> list[str]:
    root = resources.files("fidendrite") / "data"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_spec(ref: str) -> SystemSpec:
    """Read a spec from a path, or by bundled name (e.g. ``gasket``)."""
    path = Path(ref)
    if path.is_file():
        return parse_spec(path.read_text())
    if ref in bundled_specs():
        return parse_spec((resources.files("fidendrite") / "data" / f"{ref}.json").read_text())
    raise SpecError(f"no such spec file or bundled spec: {ref}")


# ---------------------------------------------------------------------------
# commands


def _clean(obj):
    """Turn -0.0 into 0.0 so equal results print identically."""
    if isinstance(obj, float):
        return obj + 0.0
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _dump(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _emit(text: str, path: str | None):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _fi_exit(v: Verdict) -> int:
    return {Verdict.FI_CERTIFIED: EXIT_OK, Verdict.NOT_FI: EXIT_NEGATIVE}.get(v, EXIT_AMBIGUOUS)


def cmd_fi(spec: SystemSpec, args) -> int:
    rep = fi_report(spec.to_system(), tol=args.tol or spec.tolerance("fi_tol"))
    _emit(_dump(rep.to_dict()), args.json)
    return _fi_exit(rep.verdict)


def cmd_graph(spec: SystemSpec, args) -> int:
    system = spec.to_system()
    fi = fi_report(system, tol=spec.tolerance("fi_tol"))
    if fi.verdict is Verdict.NOT_FI:
        _emit(_dump({"error": "system is not FI", "fi": fi.to_dict()}), args.json)
        return EXIT_NEGATIVE
    g = build_graph(system, args.level, fi)
    res = is_tree(g)
    if args.dot:
        Path(args.dot).write_text(to_dot(g, highlight=res.cycle))
    out = dict(g.summary(), tree=res.status.value, cycle=format_cycle(res.cycle) if res.cycle else None)
    _emit(_dump(out), args.json)
    return EXIT_OK


def cmd_dendrite(spec: SystemSpec, args) -> int:
    system = spec.to_system()
    v = dendrite_verdict(system, max_level=args.max_level or spec.tolerance("max_level"),
                         tol=spec.tolerance("fi_tol"))
    if args.dot and v.graphs:
        Path(args.dot).write_text(to_dot(v.graphs[0], highlight=v.witness))
    _emit(_dump(v.to_dict()), args.json)
    if v.outcome is Outcome.DENDRITE:
        return EXIT_OK
    if v.outcome is Outcome.NOT_DENDRITE:
        return EXIT_NEGATIVE
    return EXIT_RESOURCE if v.note.startswith("resource") else EXIT_AMBIGUOUS


def _parse_point(text: str) -> complex:
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise SpecError(f"point must be 'x,y', got {text!r}") from None
    return complex(x, y)


def cmd_order(spec: SystemSpec, args) -> int:
    system = spec.to_system()
    fi = fi_report(system, tol=spec.tolerance("fi_tol"))
    if fi.verdict is Verdict.NOT_FI:
        _emit(_dump({"error": "system is not FI"}), args.json)
        return EXIT_AMBIGUOUS
    target = parse_word(args.piece) if args.piece else _parse_point(args.point)
    rep = order_report(system, target, fi, tol=spec.tolerance("fi_tol"), depth=args.depth)
    _emit(_dump(rep.to_dict()), args.json)
    return EXIT_OK


def cmd_zerner(spec: SystemSpec, args) -> int:
    est = zerner_constant(spec.to_system(), args.a, args.depth)
    _emit(_dump(est.to_dict()), args.json)
    return EXIT_OK


def _period_arcs(system: SimSystem, word, eps: float):
    loc = _local_cover(system, word)
    rows, arcs = [], []
    for seed in loc.seeds():
        arc = invariant_arc(system, word, seed, eps=eps, local=loc)
        est = slope_parameter(arc)
        arcs.append(arc)
        rows.append(dict(est.to_dict(), arc=arc.to_dict()))
    return rows, arcs


def cmd_slope(spec: SystemSpec, args) -> int:
    system = spec.to_system()
    eps = spec.tolerance("arc_eps")
    if args.period:
        rows, _ = _period_arcs(system, parse_word(args.period), eps)
        lams = [r["lambda"] for r in rows]
        agree = max(lams) - min(lams) <= spec.tolerance("slope_tol")
        _emit(_dump({"period": args.period, "arcs": rows, "agree": agree}), args.json)
        return EXIT_OK if agree else EXIT_NEGATIVE
    fi = fi_report(system, tol=spec.tolerance("fi_tol"))
    crit = fi.critical_points()
    if not 0 <= args.cluster < len(crit):
        raise SpecError(f"cluster index must be in 0..{len(crit) - 1}")
    pm = parameter_match(system, crit[args.cluster], tol=spec.tolerance("slope_tol"), eps=eps)
    _emit(_dump(pm.to_dict()), args.json)
    return {"matched": EXIT_OK, "mismatched": EXIT_NEGATIVE}.get(pm.status, EXIT_AMBIGUOUS)


def cmd_render(spec: SystemSpec, args) -> int:
    system = spec.to_system()
    cov = cover(system, eps=args.eps or spec.tolerance("render_eps"))
    clusters, arcs = [], []
    if args.clusters or args.period:
        fi = fi_report(system, tol=spec.tolerance("fi_tol"))
        clusters = [(c.center, c.radius) for c in fi.critical_points()]
    if args.period:
        _, found = _period_arcs(system, parse_word(args.period), spec.tolerance("arc_eps"))
        arcs = [a.polyline for a in found]
    if args.svg:
        Path(args.svg).write_text(scene_svg(cov, arcs, clusters))
    if args.pbm:
        Path(args.pbm).write_bytes(cov.to_pbm())
    _emit(_dump({"cells": len(cov), "cell_size": cov.cell_size, "error_bound": cov.error_bound,
                 "leaves": cov.leaf_count}), args.json)
    return EXIT_OK


def full_report(spec: SystemSpec) -> dict:
    """Every analysis in one deterministic dictionary."""
    system = spec.to_system()
    tol = spec.tolerance("fi_tol")
    out = {"spec": spec.to_dict()}
    if spec.open_set is not None:
        out["open_set_check"] = check_open_set(system, spec.open_set)
    fi = fi_report(system, tol=tol)
    out["fi"] = fi.to_dict()
    if fi.verdict is Verdict.NOT_FI:
        out["dendrite"] = {"outcome": Outcome.INCONCLUSIVE.value, "note": "system is not FI"}
        return out
    v = dendrite_verdict(system, max_level=spec.tolerance("max_level"), tol=tol)
    out["dendrite"] = v.to_dict()
    out["dendrite"].pop("fi", None)
    depth = int(spec.tolerance("zerner_depth"))
    dendrite = v.outcome is Outcome.DENDRITE
    bounds = zerner_bounds(system, max(fi.s, 1), depth, dendrite)
    out["zerner"] = bounds
    points = []
    for k, cl in enumerate(fi.critical_points()):
        row = {"index": k, "center": [cl.center.real, cl.center.imag], "radius": cl.radius,
               "addresses": None if cl.address_pair is None else [str(a) for a in cl.address_pair]}
        try:
            row["order"] = order_report(system, cl, fi, tol=tol, bounds=bounds).to_dict()
        except (InconclusiveError, ResourceError) as exc:
            row["order"] = {"error": str(exc)}
        try:
            row["slope"] = parameter_match(system, cl, tol=spec.tolerance("slope_tol"),
                                           eps=spec.tolerance("arc_eps")).to_dict()
        except (ArcError, ResourceError) as exc:
            row["slope"] = {"error": str(exc)}
        points.append(row)
    out["critical_points"] = points
    return out


def cmd_report(spec: SystemSpec, args) -> int:
    _emit(_dump(full_report(spec)), args.json)
    return EXIT_OK


def cmd_spec(spec: SystemSpec, args) -> int:
    _emit(serialize_spec(spec), args.json)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fidendrite", description="Topology of self-similar sets with finite intersections.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("spec", help="spec file or bundled name (" + ", ".join(bundled_specs()) + ")")
        sp.add_argument("--json", metavar="PATH", help="write the JSON result here instead of stdout")
        sp.set_defaults(func=func)
        return sp

    sp = add("fi", cmd_fi, "finite intersection check")
    sp.add_argument("--tol", type=float, default=None)
    sp = add("graph", cmd_graph, "intersection graph at a level")
    sp.add_argument("--level", type=int, default=1)
    sp.add_argument("--dot", metavar="PATH")
    sp = add("dendrite", cmd_dendrite, "dendrite verdict")
    sp.add_argument("--max-level", type=int, default=None)
    sp.add_argument("--dot", metavar="PATH", help="level-1 graph with the witness cycle highlighted")
    sp = add("order", cmd_order, "address counts, components and order at a point or piece")
    grp = sp.add_mutually_exclusive_group(required=True)
    grp.add_argument("--point", metavar="X,Y")
    grp.add_argument("--piece", metavar="WORD")
    sp.add_argument("--depth", type=int, default=5, help="word depth for the Zerner estimates")
    sp = add("zerner", cmd_zerner, "lower estimate of the Zerner constant M_a")
    sp.add_argument("--a", type=float, default=1.0)
    sp.add_argument("--depth", type=int, default=6)
    sp = add("slope", cmd_slope, "slope parameters of invariant arcs")
    grp = sp.add_mutually_exclusive_group(required=True)
    grp.add_argument("--cluster", type=int, metavar="ID", help="index into the critical points")
    grp.add_argument("--period", metavar="WORD")
    sp = add("render", cmd_render, "SVG / PBM rendering of a cover")
    sp.add_argument("--svg", metavar="PATH")
    sp.add_argument("--pbm", metavar="PATH")
    sp.add_argument("--eps", type=float, default=None)
    sp.add_argument("--clusters", action="store_true", help="draw the critical points")
    sp.add_argument("--period", metavar="WORD", help="draw invariant arcs at fix(S_WORD)")
    add("report", cmd_report, "full analysis as JSON")
    add("spec", cmd_spec, "print the normalized spec")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = load_spec(args.spec)
        return args.func(spec, args)
    except SpecError as exc:
        print(f"fidendrite: {exc}", file=sys.stderr)
        return 2
    except ResourceError as exc:
        print(f"fidendrite: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (InconclusiveError, ArcError) as exc:
        print(f"fidendrite: inconclusive: {exc}", file=sys.stderr)
        return EXIT_AMBIGUOUS


if __name__ == "__main__":
    sys.exit(main())
