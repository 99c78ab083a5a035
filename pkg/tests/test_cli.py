import csv

import numpy as np
import pytest

from sampledt.cli import main
from sampledt.seqdt import triangulate_seq
from sampledt.tristore import canonicalize, load_triangulation_csv
from sampledt.workload import load_points, save_points


@pytest.fixture
def pts(tmp_path):
    f = tmp_path / "p.pts"
    assert main(["generate", "--dist", "bubbles", "--n", "3000", "--seed",
                 "1", "--dim", "2", "--out", str(f)]) == 0
    return f


def test_generate_csv_to_stdout(capsys):
    assert main(["generate", "--dist", "uniform", "--n", "5", "--seed",
                 "0", "--dim", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "x,y,z" and len(lines) == 6


def test_generate_params_and_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for f in (a, b):
        assert main(["generate", "--dist", "bubbles", "--n", "100",
                     "--seed", "3", "--out", str(f), "m=4",
                     "sigma=0.01"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert load_points(a).shape == (100, 3)


def test_triangulate_writes_outputs(tmp_path, pts):
    tris, rep = tmp_path / "t.csv", tmp_path / "r.csv"
    code = main(["triangulate", "--in", str(pts), "--k", "4",
                 "--base-case", "500", "--policy", "exact=1",
                 "--out", str(tris), "--report", str(rep), "--validate"])
    assert code == 0
    header = tris.read_text().splitlines()[0]
    meta, rows = load_triangulation_csv(tris)
    assert header == f"# dim=2 n_points=3000 n_simplices={rows.shape[0]}"
    np.testing.assert_array_equal(
        rows, canonicalize(triangulate_seq(load_points(pts))))
    with open(rep) as fh:
        r = list(csv.DictReader(fh))[0]
    assert r["validity"] == "ok" and int(r["merges"]) == 1
    assert main(["validate", "--points", str(pts), "--tris",
                 str(tris)]) == 0


def test_triangulate_maps_duplicates_to_first_row(tmp_path):
    P = np.random.default_rng(0).random((50, 2))
    P = np.vstack([P, P[:5]])
    f, tris = tmp_path / "d.csv", tmp_path / "t.csv"
    save_points(P, f)
    assert main(["triangulate", "--in", str(f), "--out", str(tris)]) == 0
    meta, rows = load_triangulation_csv(tris)
    assert meta["n_points"] == 55 and rows.max() < 50
    assert main(["validate", "--points", str(f), "--tris", str(tris)]) == 0


def test_validate_detects_non_delaunay(tmp_path):
    P = np.array([(0., 0), (1, 0), (0, 1), (1.1, 1.1)])
    save_points(P, tmp_path / "q.csv")
    tris = tmp_path / "bad.csv"
    # the wrong diagonal of a convex quadrilateral
    tris.write_text("# dim=2 n_points=4 n_simplices=2\n0,1,3\n0,2,3\n")
    assert main(["validate", "--points", str(tmp_path / "q.csv"),
                 "--tris", str(tris)]) == 1
    tris.write_text("# dim=2 n_points=4 n_simplices=2\n0,1,2\n1,2,3\n")
    assert main(["validate", "--points", str(tmp_path / "q.csv"),
                 "--tris", str(tris), "--method", "brute"]) == 0


def test_bench_grid(tmp_path):
    g = tmp_path / "grid.toml"
    g.write_text('[grid]\ndist = "uniform"\ndim = 2\nn = 2000\n'
                 'k = [2, 4]\nseed = [1, 2, 3]\nbase_case_threshold = 500\n')
    out = tmp_path / "res.csv"
    assert main(["bench", "--grid", str(g), "--out", str(out)]) == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6 and {r["validity"] for r in rows} == {"ok"}


def test_bench_reports_failed_runs(tmp_path):
    g = tmp_path / "grid.toml"
    g.write_text('n = 2000\ndim = 2\nk = 3\nstrategy = "bisect"\n'
                 'base_case_threshold = 500\n')
    assert main(["bench", "--grid", str(g), "--out",
                 str(tmp_path / "o.csv")]) == 1


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["generate", "--dist", "spiral", "--n", "5", "--seed", "0"],
    ["generate", "--dist", "uniform", "--n", "0", "--seed", "0"],
    ["generate", "--dist", "uniform", "--n", "5", "--seed", "0", "m"],
    ["triangulate", "--in", "x.pts", "--policy", "cells"],
    ["triangulate", "--in", "x.pts", "--sample", "cube"],
    ["triangulate", "--in", "/nonexistent/x.pts"],
    ["validate", "--points", "a.pts"],
])
def test_usage_errors(argv):
    assert main(argv) == 2


def test_runtime_errors(tmp_path):
    bad = tmp_path / "bad.pts"
    bad.write_bytes(b"NOPE" + bytes(20))
    assert main(["triangulate", "--in", str(bad)]) == 3
    few = tmp_path / "few.csv"
    few.write_text("x,y\n0,0\n1,0\n")
    assert main(["triangulate", "--in", str(few)]) == 3
    g = tmp_path / "g.toml"
    g.write_text("colour = 1\n")
    assert main(["bench", "--grid", str(g), "--out",
                 str(tmp_path / "o.csv")]) == 3


def test_help_exits_zero():
    assert main(["--help"]) == 0
