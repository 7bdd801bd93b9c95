"""Command-line front end.

Exit codes: 0 ok, 1 single-impact violation, 2 usage, 3 I/O or parse
failure, 4 work budget exceeded (partial output is still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .constructions import (baseline_ua, baseline_ub, besicovitch, cone_fixture, flat_fixture,
                            regular_polygon, transfer)
from .document import (DocumentError, dumps, layout_to_dict, load_surface, read, run_record,
                       save_surface, surface_to_dict, write)
from .errors import InvalidGeometry, InvalidParameter, NewtonSicError, ResourceLimit
from .geometry import build_family
from .resistance import bound_curve, resistance, resistance_bound
from .sic import sic_report
from .surface import AdmissibleSurface, Region, assemble

EXIT_OK, EXIT_SIC, EXIT_USAGE, EXIT_IO, EXIT_BUDGET = 0, 1, 2, 3, 4
DEFAULT_GEOMETRY_BUDGET = 16


class UsageError(Exception):
    pass


def _out(msg: str = "") -> None:
    print(msg, flush=True)


# ---------------------------------------------------------------------------
# construct
# ---------------------------------------------------------------------------


def cmd_construct(args) -> tuple[int, dict]:
    name = args.name
    results: dict = {}
    if name == "ua":
        surf = baseline_ua()
    elif name == "ub":
        surf = baseline_ub()
    elif name == "flat":
        surf = flat_fixture(-abs(args.c) if args.c else -0.25)
    elif name == "cone":
        surf = cone_fixture(args.slope)
    else:
        if args.n is None or args.n < 1:
            raise UsageError("besicovitch needs --n >= 1")
        fam, surf = besicovitch(args.n, a=args.base_length, d=args.d)
        if args.c is not None:
            if args.c < surf.c:
                raise UsageError(f"--c {args.c} is below the admissible depth {surf.c:.17g}")
            regions = [Region(level=-args.c, support=r.support, label=r.label) if r.is_flat else r
                       for r in surf.regions]
            surf = AdmissibleSurface(surf.domain, regions, args.c, dict(surf.meta, c=args.c))
        results = {"n": fam.n, "a": fam.a, "d": fam.d, "small_area": fam.small_area.value,
                   "small_area_error": fam.small_area.error, "trap_area": fam.trap_area,
                   "kappa_min": fam.kappa_min, "c": surf.c, "triangles": len(fam.triangles)}
        _out(f"n = {fam.n}  a = {fam.a:g}  d = {fam.d:.6g}  triangles = {len(fam.triangles)}")
        _out(f"|small triangles union| = {fam.small_area.value:.10g} (+/- {fam.small_area.error:.2g})")
        _out(f"|trapezoids|            = {fam.trap_area:.10g}")
        _out(f"kappa_min               = {fam.kappa_min:.10g}")
        _out(f"c_n                     = {surf.c:.10g}")
    doc = surface_to_dict(surf)
    if args.out:
        write(doc, args.out)
        _out(f"wrote {args.out}: {len(surf.regions)} regions, domain {doc['domain']['kind']}")
    else:
        sys.stdout.write(dumps(doc))
    return EXIT_OK, results


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def cmd_eval(args) -> tuple[int, dict]:
    surf = load_surface(args.surface)
    methods = ["deterministic-quadrature", "monte-carlo"] if args.method == "both" else \
        [{"quad": "deterministic-quadrature", "mc": "monte-carlo"}[args.method]]
    results = {}
    rows = []
    for m in methods:
        est = resistance(surf, m, target_error=args.target_error, seed=args.seed, samples=args.samples)
        results[m] = est.as_dict()
        flag = "" if est.converged else "  (not converged)"
        _out(f"R[{m}] = {est.value:.6f} +/- {est.error:.2g}{flag}")
        rows.append([args.surface, m, f"{est.value:.17g}", f"{est.error:.17g}", est.cells,
                     "" if est.seed is None else est.seed, int(est.converged)])
    if args.csv:
        path = Path(args.csv)
        new = not path.exists()
        with open(path, "a", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            if new:
                wr.writerow(["surface", "method", "R", "error", "cells_or_samples", "seed", "converged"])
            wr.writerows(rows)
    return EXIT_OK, results


# ---------------------------------------------------------------------------
# check-sic
# ---------------------------------------------------------------------------


def cmd_check_sic(args) -> tuple[int, dict]:
    surf = load_surface(args.surface)
    rep = sic_report(surf, args.samples, args.tolerance, args.mode, args.sampler, args.seed)
    _out(f"samples {rep.samples}  regular {rep.regular}  skipped {rep.skipped}")
    _out(f"violations {rep.violations} (analytic {rep.violations_analytic}, raytrace {rep.violations_raytrace})")
    _out(f"tangent {rep.tangent}  disagreements {rep.disagreements}")
    _out(f"worst residual {rep.worst_residual:.3e}  worst clearance {rep.worst_clearance:.3e}  tol {rep.tolerance:g}")
    _out("CERTIFIED" if rep.certified else "REJECTED")
    return (EXIT_OK if rep.certified else EXIT_SIC), rep.as_dict()


# ---------------------------------------------------------------------------
# converge
# ---------------------------------------------------------------------------

CONVERGE_COLUMNS = ["n", "trap_area", "small_area", "kappa_min", "bound", "R", "R_error"]


def _bound_ns(lo: int, hi: int, points: int | None) -> list[int]:
    if points is None and hi - lo <= 10_000:
        return list(range(lo, hi + 1))
    k = points or 60
    ns = np.unique(np.round(np.geomspace(lo, hi, k)).astype(np.int64))
    return [int(v) for v in ns]


def _write_rows(path, rows):
    if not path:
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.DictWriter(fh, CONVERGE_COLUMNS, extrasaction="ignore")
        wr.writeheader()
        for r in rows:
            wr.writerow({k: ("" if r.get(k) is None else (f"{r[k]:.17g}" if isinstance(r[k], float) else r[k]))
                         for k in CONVERGE_COLUMNS})


def cmd_converge(args) -> tuple[int, dict]:
    if not 1 <= args.n_min <= args.n_max:
        raise UsageError("need 1 <= n-min <= n-max")
    rows = []
    code = EXIT_OK
    if args.mode == "bound":
        for n, b in bound_curve(_bound_ns(args.n_min, args.n_max, args.points), args.base_length):
            rows.append({"n": n, "bound": b})
    else:
        budget = args.budget
        for n in range(args.n_min, args.n_max + 1):
            if n > budget:
                _out(f"n = {n} exceeds the geometry budget {budget}; stopping")
                code = EXIT_BUDGET
                break
            try:
                fam = build_family(n, a=args.base_length, d=args.d)
                row = {"n": n, "trap_area": fam.trap_area, "small_area": fam.small_area.value,
                       "kappa_min": fam.kappa_min,
                       "bound": resistance_bound(fam.trap_area, fam.small_area.value, fam.kappa_min)}
                if not args.no_resistance:
                    est = resistance(assemble(fam), target_error=args.target_error)
                    row["R"], row["R_error"] = est.value, est.error
            except ResourceLimit as exc:
                _out(f"n = {n}: {exc}; stopping")
                code = EXIT_BUDGET
                break
            rows.append(row)
            _write_rows(args.csv, rows)
    for r in rows:
        _out("  ".join(f"{k}={r[k]:.10g}" if isinstance(r[k], float) else f"{k}={r[k]}"
                       for k in CONVERGE_COLUMNS if k in r))
    _write_rows(args.csv, rows)
    if args.figure and rows:
        from .plots import plot_convergence
        plot_convergence(rows, args.figure)
        _out(f"figure {args.figure}")
    return code, {"rows": rows}


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def cmd_export(args) -> tuple[int, dict]:
    surf = load_surface(args.surface)
    from .export import export_csv, export_obj, export_svg
    if args.format == "obj":
        nv, nf = export_obj(surf, args.out, args.resolution)
        info = {"vertices": nv, "faces": nf}
    elif args.format == "svg":
        info = {"paths": export_svg(surf, args.out)}
    elif args.format == "csv":
        info = {"rows": export_csv(surf, args.out, args.resolution)}
    else:
        from .plots import plot_layout
        plot_layout(surf, args.out, surf.meta.get("construction"))
        info = {"figure": args.out}
    _out(f"wrote {args.out} " + " ".join(f"{k}={v}" for k, v in info.items()))
    return EXIT_OK, info


# ---------------------------------------------------------------------------
# pack
# ---------------------------------------------------------------------------


def load_target(target: str) -> np.ndarray:
    """``disk:K[:R]`` for a regular K-gon, or a JSON file holding a polygon."""
    if target.startswith("disk:"):
        parts = target.split(":")[1:]
        try:
            k = int(parts[0])
            r = float(parts[1]) if len(parts) > 1 else 1.0
        except (ValueError, IndexError) as exc:
            raise UsageError(f"bad target {target!r}") from exc
        return regular_polygon(k, r)
    d = read(target)
    if isinstance(d, list):
        return np.asarray(d, dtype=float)
    if isinstance(d, dict) and "polygon" in d:
        return np.asarray(d["polygon"], dtype=float)
    if isinstance(d, dict) and d.get("type") == "surface":
        dom = d["domain"]
        if dom.get("kind") == "polygon" and len(dom["pieces"]) == 1:
            return np.asarray(dom["pieces"][0], dtype=float)
    raise DocumentError(f"{target}: expected a polygon")


def cmd_pack(args) -> tuple[int, dict]:
    src = load_surface(args.source)
    target = load_target(args.target)
    try:
        new, layout = transfer(src, target, args.epsilon)
    except ResourceLimit as exc:
        if exc.partial is not None and args.out:
            write(layout_to_dict(exc.partial), args.out)
        raise
    r_src = resistance(src, target_error=args.target_error)
    r_new = resistance(new, target_error=args.target_error)
    _out(f"copies {len(layout.copies)}  rounds {layout.rounds}  j0 {layout.j0}  delta_pack {layout.delta_pack:.6g}")
    _out(f"uncovered fraction {layout.uncovered_fraction:.6g} (epsilon {args.epsilon:g})")
    _out(f"R(u)  = {r_src.value:.6f} +/- {r_src.error:.2g}")
    _out(f"R(u~) = {r_new.value:.6f} +/- {r_new.error:.2g}")
    if args.out:
        write(layout_to_dict(layout), args.out)
        _out(f"wrote {args.out}")
    if args.surface_out:
        save_surface(new, args.surface_out)
        _out(f"wrote {args.surface_out}")
    if args.figure:
        from .plots import plot_packing
        plot_packing(layout, args.figure)
        _out(f"figure {args.figure}")
    return EXIT_OK, {"layout": layout.summary(), "R_source": r_src.as_dict(), "R_transfer": r_new.as_dict()}


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="newton-sic", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--record", help="write a JSON run record to this path")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--record", default=argparse.SUPPRESS, help="write a JSON run record to this path")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("construct", parents=[common], help="build a catalog surface and write its JSON document")
    c.add_argument("name", choices=["ua", "ub", "besicovitch", "flat", "cone"])
    c.add_argument("--n", type=int)
    c.add_argument("--base-length", "-a", type=float, default=1.0, help="separating segment length a")
    c.add_argument("--d", type=float, default=None, help="trapezoid height (default sqrt(n))")
    c.add_argument("--c", type=float, default=None, help="flat depth override")
    c.add_argument("--slope", type=float, default=1.2, help="cone slope")
    c.add_argument("--out", "-o")
    c.set_defaults(func=cmd_construct)

    e = sub.add_parser("eval", parents=[common], help="resistance of a surface document")
    e.add_argument("surface")
    e.add_argument("--method", choices=["quad", "mc", "both"], default="quad")
    e.add_argument("--target-error", type=float, default=1e-3)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--samples", type=int, default=1_000_000, help="monte-carlo sample count")
    e.add_argument("--csv", help="append result rows to this CSV file")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("check-sic", parents=[common], help="certify the single impact condition")
    s.add_argument("surface")
    s.add_argument("--samples", type=int, default=10_000)
    s.add_argument("--tolerance", type=float, default=1e-9)
    s.add_argument("--mode", choices=["analytic", "raytrace", "both"], default="both")
    s.add_argument("--sampler", choices=["halton", "random", "grid"], default="halton")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_check_sic)

    v = sub.add_parser("converge", parents=[common], help="table of family measurements or the asymptotic bound")
    v.add_argument("--n-min", type=int, default=1)
    v.add_argument("--n-max", type=int, default=8)
    v.add_argument("--mode", choices=["measured", "bound"], default="measured")
    v.add_argument("--base-length", "-a", type=float, default=1.0)
    v.add_argument("--d", type=float, default=None)
    v.add_argument("--budget", type=int, default=DEFAULT_GEOMETRY_BUDGET, help="largest n built in measured mode")
    v.add_argument("--points", type=int, default=None, help="log-spaced n values in bound mode")
    v.add_argument("--target-error", type=float, default=1e-3)
    v.add_argument("--no-resistance", action="store_true", help="skip quadrature in measured mode")
    v.add_argument("--csv")
    v.add_argument("--figure", help="write a convergence plot (png/pdf/svg)")
    v.set_defaults(func=cmd_converge)

    x = sub.add_parser("export", parents=[common], help="OBJ mesh, SVG layout, CSV grid or PNG figure")
    x.add_argument("surface")
    x.add_argument("--format", choices=["obj", "svg", "csv", "png"], required=True)
    x.add_argument("--resolution", type=float, default=0.02)
    x.add_argument("--out", "-o", required=True)
    x.set_defaults(func=cmd_export)

    k = sub.add_parser("pack", parents=[common], help="transfer a surface into a target polygon")
    k.add_argument("--source", required=True)
    k.add_argument("--target", required=True, help="disk:K[:R] or a JSON polygon file")
    k.add_argument("--epsilon", type=float, default=0.05)
    k.add_argument("--target-error", type=float, default=1e-3)
    k.add_argument("--out", help="layout JSON")
    k.add_argument("--surface-out", help="transferred surface JSON")
    k.add_argument("--figure")
    k.set_defaults(func=cmd_pack)
    return p


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    results: dict = {}
    try:
        code, results = args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    except ResourceLimit as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        code = EXIT_BUDGET
    except (InvalidParameter, InvalidGeometry) as exc:
        print(f"invalid parameter: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    except (OSError, DocumentError, json.JSONDecodeError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        code = EXIT_IO
    except NewtonSicError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    if args.record:
        params = {k: v for k, v in vars(args).items() if k not in ("func", "record")}
        try:
            write(_jsonable(run_record(args.command, params, dict(results, exit_code=code),
                                       time.perf_counter() - t0)), args.record)
        except OSError as exc:
            print(f"i/o error: {exc}", file=sys.stderr)
            code = code or EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())
