"""JSON documents for surfaces, packing layouts and run records.

Floats are written with 17 significant digits so a load/save round trip
reproduces every coordinate exactly.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import DocumentError
from .surface import (GENERATOR_TYPES, AdmissibleSurface, Cone, DiskDomain, LinearParabola,
                      PolygonDomain, RadialParabola, Region)

SCHEMA_VERSION = 1
REGION_KINDS = ("radial-parabola", "linear-parabola", "cone", "flat", "max-of")


# ---------------------------------------------------------------------------
# Writer
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return "null"
        if x == int(x) and abs(x) < 1e15:
            return f"{x:.1f}"
        return f"{x:.17g}"
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in x.items()) + "}"
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    raise DocumentError(f"cannot serialize {type(x).__name__}")


def dumps(obj) -> str:
    return _fmt(obj) + "\n"


def write(obj, path) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def read(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Surfaces
# ---------------------------------------------------------------------------


def _pts(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def generator_to_dict(g) -> dict:
    if isinstance(g, RadialParabola):
        return {"kind": g.kind, "focus": list(g.focus), "r0": g.r0, "scale": g.scale}
    if isinstance(g, LinearParabola):
        return {"kind": g.kind, "point": list(g.point), "normal": list(g.normal),
                "offset": g.offset, "r0": g.r0, "scale": g.scale}
    if isinstance(g, Cone):
        return {"kind": g.kind, "apex": list(g.apex), "slope": g.slope, "radius": g.radius}
    raise DocumentError(f"unknown generator {type(g).__name__}")


def generator_from_dict(d):
    kind = d.get("kind")
    if kind not in GENERATOR_TYPES:
        raise DocumentError(f"unknown generator kind {kind!r}")
    try:
        if kind == "radial-parabola":
            return RadialParabola(tuple(d["focus"]), d["r0"], d.get("scale", 1.0))
        if kind == "linear-parabola":
            return LinearParabola(tuple(d["point"]), tuple(d["normal"]), d["offset"], d["r0"], d.get("scale", 1.0))
        return Cone(tuple(d["apex"]), d["slope"], d["radius"])
    except KeyError as exc:
        raise DocumentError(f"{kind} generator is missing {exc}") from exc


def region_to_dict(r: Region) -> dict:
    out = {"kind": r.kind, "label": r.label,
           "support": None if r.support is None else [_pts(p) for p in r.support]}
    if r.is_flat:
        out["level"] = r.level
    else:
        out["generators"] = [generator_to_dict(g) for g in r.generators]
    return out


def region_from_dict(d) -> Region:
    kind = d.get("kind")
    if kind not in REGION_KINDS:
        raise DocumentError(f"unknown region kind {kind!r}")
    support = d.get("support")
    support = None if support is None else tuple(np.asarray(p, dtype=float) for p in support)
    if kind == "flat":
        return Region((), float(d["level"]), support, d.get("label", ""))
    gens = tuple(generator_from_dict(g) for g in d.get("generators", ()))
    if not gens:
        raise DocumentError(f"{kind} region has no generators")
    r = Region(gens, 0.0, support, d.get("label", ""))
    if r.kind != kind:
        raise DocumentError(f"region tagged {kind!r} but its generators make it {r.kind!r}")
    return r


def domain_to_dict(dom) -> dict:
    if isinstance(dom, PolygonDomain):
        return {"kind": "polygon", "pieces": [_pts(p) for p in dom.pieces]}
    if isinstance(dom, DiskDomain):
        if dom.kind == "reuleaux":
            return {"kind": "reuleaux", "vertices": _pts(dom.centers), "radius": dom.radius}
        return {"kind": "disk", "center": _pts(dom.centers[0]), "radius": dom.radius}
    raise DocumentError(f"unknown domain {type(dom).__name__}")


def domain_from_dict(d):
    kind = d.get("kind")
    if kind == "polygon":
        return PolygonDomain([np.asarray(p, dtype=float) for p in d["pieces"]])
    if kind == "reuleaux":
        return DiskDomain(d["vertices"], d["radius"])
    if kind == "disk":
        return DiskDomain([d["center"]], d["radius"])
    raise DocumentError(f"unknown domain kind {kind!r}")


def surface_to_dict(s: AdmissibleSurface) -> dict:
    return {"schema": SCHEMA_VERSION, "type": "surface", "domain": domain_to_dict(s.domain),
            "c": s.c, "regions": [region_to_dict(r) for r in s.regions], "metadata": dict(s.meta)}


def surface_from_dict(d) -> AdmissibleSurface:
    if not isinstance(d, dict) or d.get("type") != "surface":
        raise DocumentError("not a surface document")
    if d.get("schema") != SCHEMA_VERSION:
        raise DocumentError(f"unsupported schema {d.get('schema')!r}")
    try:
        return AdmissibleSurface(domain_from_dict(d["domain"]), [region_from_dict(r) for r in d["regions"]],
                                 float(d["c"]), dict(d.get("metadata") or {}))
    except KeyError as exc:
        raise DocumentError(f"surface document is missing {exc}") from exc


def save_surface(s: AdmissibleSurface, path) -> None:
    write(surface_to_dict(s), path)


def load_surface(path) -> AdmissibleSurface:
    return surface_from_dict(read(path))


# ---------------------------------------------------------------------------
# Layouts and run records
# ---------------------------------------------------------------------------


def layout_to_dict(layout) -> dict:
    return {"schema": SCHEMA_VERSION, "type": "packing-layout", "target": _pts(layout.target),
            "delta_pack": layout.delta_pack, "half_width": layout.half_width,
            "source_center": list(layout.source_center), "rounds": layout.rounds, "j0": layout.j0,
            "target_area": layout.target_area, "uncovered_area": layout.uncovered_area,
            "uncovered_fraction": layout.uncovered_fraction, "history": list(layout.history),
            "pitches": list(layout.pitches),
            "copies": [{"k": c.k, "shift": list(c.shift), "round": c.round} for c in layout.copies]}


def run_record(command: str, parameters: dict, results: dict, wall_time: float) -> dict:
    return {"schema": SCHEMA_VERSION, "type": "run-record", "command": command,
            "parameters": parameters, "results": results, "wall_time": wall_time}
