from __future__ import annotations

import csv
import json
import re

import numpy as np
import pytest

from newton_sic.cli import main
from newton_sic.document import load_surface
from newton_sic.resistance import resistance


@pytest.fixture
def docs(tmp_path):
    out = {}
    for name, extra in (("ua", []), ("ub", []), ("flat", []), ("cone", []), ("b3", ["--n", "3"])):
        path = tmp_path / f"{name}.json"
        kind = "besicovitch" if name.startswith("b") else name
        assert main(["construct", kind, *extra, "--out", str(path)]) == 0
        out[name] = path
    return out


def test_construct_besicovitch_prints_measurements(tmp_path, capsys):
    path = tmp_path / "b6.json"
    assert main(["construct", "besicovitch", "--n", "6", "--base-length", "1", "--out", str(path)]) == 0
    text = capsys.readouterr().out
    assert "|small triangles union|" in text and "|trapezoids|" in text and "kappa_min" in text
    doc = json.loads(path.read_text())
    kinds = [r["kind"] for r in doc["regions"]]
    assert kinds.count("radial-parabola") == 64 and kinds.count("flat") == 1


def test_construct_usage_errors(tmp_path):
    assert main(["construct", "besicovitch", "--n", "0"]) == 2
    assert main(["construct", "besicovitch", "--n", "2", "--c", "1e-6"]) == 2
    with pytest.raises(SystemExit) as info:
        main(["construct", "torus"])
    assert info.value.code == 2


def test_construct_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["construct", "besicovitch", "--n", "4", "--out", str(a)])
    main(["construct", "besicovitch", "--n", "4", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_eval_commands(docs, tmp_path, capsys):
    rows = tmp_path / "r.csv"
    assert main(["eval", str(docs["ua"]), "--csv", str(rows)]) == 0
    assert main(["eval", str(docs["flat"]), "--csv", str(rows)]) == 0
    out = capsys.readouterr().out
    values = [float(v) for v in re.findall(r"= ([0-9.]+) \+/-", out)]
    assert abs(values[0] - 0.593) <= 0.002
    assert values[1] == 1.0
    with open(rows, newline="") as fh:
        table = list(csv.DictReader(fh))
    assert len(table) == 2 and table[1]["R"] == "1"


def test_eval_matches_library(docs, capsys):
    assert main(["eval", str(docs["b3"]), "--method", "both", "--samples", "100000", "--record",
                 str(docs["b3"].with_suffix(".rec.json"))]) == 0
    rec = json.loads(docs["b3"].with_suffix(".rec.json").read_text())
    lib = resistance(load_surface(docs["b3"]))
    assert rec["results"]["deterministic-quadrature"]["value"] == lib.value
    assert rec["results"]["exit_code"] == 0


def test_eval_io_errors(tmp_path):
    assert main(["eval", str(tmp_path / "missing.json")]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{oops", encoding="utf-8")
    assert main(["eval", str(bad)]) == 3


def test_check_sic_exit_codes(docs):
    assert main(["check-sic", str(docs["ua"]), "--samples", "2000"]) == 0
    assert main(["check-sic", str(docs["cone"]), "--samples", "500"]) == 1
    assert main(["check-sic", str(docs["b3"]), "--samples", "2000", "--mode", "raytrace"]) == 0


def test_converge_bound_mode(tmp_path):
    path = tmp_path / "bound.csv"
    assert main(["converge", "--mode", "bound", "--n-min", "100", "--n-max", "1000000", "--points", "20",
                 "--csv", str(path)]) == 0
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    bounds = [float(r["bound"]) for r in rows]
    assert int(rows[-1]["n"]) == 10 ** 6 and bounds[-1] <= 0.51
    assert all(x > y for x, y in zip(bounds, bounds[1:]))


def test_converge_measured_mode(tmp_path):
    path = tmp_path / "m.csv"
    assert main(["converge", "--n-min", "2", "--n-max", "6", "--csv", str(path)]) == 0
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    bounds = [float(r["bound"]) for r in rows]
    R = [float(r["R"]) for r in rows]
    assert all(x > y for x, y in zip(bounds, bounds[1:]))
    assert all(r > 0.5 for r in R)


def test_converge_budget_exit(tmp_path):
    path = tmp_path / "m.csv"
    assert main(["converge", "--n-min", "1", "--n-max", "3", "--budget", "2", "--no-resistance",
                 "--csv", str(path)]) == 4
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["n"]) for r in rows] == [1, 2]


def test_export_svg_topology(docs, tmp_path):
    out = tmp_path / "b3.svg"
    assert main(["export", str(docs["b3"]), "--format", "svg", "--out", str(out)]) == 0
    text = out.read_text()
    paths = re.findall(r'<path [^>]*data-kind="([^"]+)"[^>]*d="([^"]+)"', text)
    assert len(paths) == 9
    flat = [d for kind, d in paths if kind == "flat"]
    assert len(flat) == 1 and flat[0].count("M ") == 8
    assert "viewBox=" in text


def test_export_obj_boundary(docs, tmp_path):
    out = tmp_path / "ub.obj"
    res = 0.02
    assert main(["export", str(docs["ub"]), "--format", "obj", "--resolution", str(res), "--out", str(out)]) == 0
    V, F = [], []
    for line in out.read_text().splitlines():
        if line.startswith("v "):
            V.append([float(t) for t in line.split()[1:]])
        elif line.startswith("f "):
            F.append([int(t) - 1 for t in line.split()[1:]])
    V, F = np.array(V), np.array(F)
    s = load_surface(docs["ub"])
    assert np.max(np.abs(V[:, 2] - s.values(V[:, :2]))) < res ** 2
    edges = {}
    for f in F:
        for a, b in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
            key = (min(a, b), max(a, b))
            edges[key] = edges.get(key, 0) + 1
    border = {v for e, k in edges.items() if k == 1 for v in e}
    assert border
    for v in border:
        assert abs(V[v, 2]) < 1e-9
        assert s.domain.boundary_distance(V[v:v + 1, :2])[0] < 1e-9


def test_export_csv_round_trip(docs, tmp_path):
    out = tmp_path / "ua.csv"
    h = 0.01
    assert main(["export", str(docs["ua"]), "--format", "csv", "--resolution", str(h), "--out", str(out)]) == 0
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    n = int(round(np.sqrt(len(data))))
    assert n * n == len(data)
    order = np.lexsort((data[:, 0], data[:, 1]))
    U = data[order, 2].reshape(n, n)
    gy, gx = np.gradient(U, h)
    riemann = float(np.mean(1.0 / (1.0 + gx ** 2 + gy ** 2)))
    ref = resistance(load_surface(docs["ua"]))
    assert abs(riemann - ref.value) < ref.error + 10 * h


def test_export_flat_constant_height(docs, tmp_path):
    out = tmp_path / "flat.csv"
    assert main(["export", str(docs["flat"]), "--format", "csv", "--out", str(out)]) == 0
    z = np.loadtxt(out, delimiter=",", skiprows=1)[:, 2]
    inner = z[z != 0]
    assert np.all(inner == inner[0])


def test_export_unwritable(docs, tmp_path):
    assert main(["export", str(docs["ua"]), "--format", "svg", "--out", str(tmp_path / "no" / "x.svg")]) == 3


def test_pack_into_itself(docs, tmp_path, capsys):
    target = tmp_path / "sq.json"
    target.write_text(json.dumps([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]]))
    lay = tmp_path / "lay.json"
    assert main(["pack", "--source", str(docs["ua"]), "--target", str(target), "--epsilon", "0.5",
                 "--out", str(lay)]) == 0
    assert len(json.loads(lay.read_text())["copies"]) == 1


def test_pack_into_disk(docs, tmp_path, capsys):
    lay, surf = tmp_path / "lay.json", tmp_path / "t.json"
    assert main(["pack", "--source", str(docs["ua"]), "--target", "disk:64", "--epsilon", "0.05",
                 "--out", str(lay), "--surface-out", str(surf), "--record", str(tmp_path / "rec.json")]) == 0
    rec = json.loads((tmp_path / "rec.json").read_text())["results"]
    assert rec["layout"]["uncovered_fraction"] < 0.05
    src, new = rec["R_source"], rec["R_transfer"]
    assert new["value"] < src["value"] + 0.05 + src["error"] + new["error"]
    assert load_surface(surf).domain.area == pytest.approx(np.pi, rel=0.01)
    assert main(["pack", "--source", str(docs["ub"]), "--target", "disk:64"]) == 2
