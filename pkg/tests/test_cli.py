import csv
import json

import numpy as np
import pytest

from masspart import cli, io
from masspart import measure as M
from masspart import transversal as tv
from masspart import yao
from masspart import geometry as geo
from masspart.errors import NoConvergence


@pytest.fixture
def measure2(tmp_path):
    path = tmp_path / "m2.json"
    io.save_measure(M.uniform_box(1500, 2, seed=3), path)
    return path


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_int_list_ranges():
    assert cli._int_list("1..3,8") == [1, 2, 3, 8]


def test_partition_then_verify(tmp_path, measure2):
    part = tmp_path / "p.json"
    assert run("partition", "--kind", "yao", "--input", measure2, "--out", part) == 0
    data = json.loads(part.read_text())
    assert data["kind"] == "yao" and len(data["cells"]) == 4
    assert data["manifest"]["flags"]["kind"] == "yao"
    rep = tmp_path / "r.json"
    code = run("verify", "--partition", part, "--measure", measure2, "--samples", 500,
               "--checks", "equipartition,coverage,avoidance,skeleton,frame-invariance", "--out", rep)
    out = json.loads(rep.read_text())
    assert code == 0 and out["pass"]
    assert [r["name"] for r in out["reports"]][:3] == ["equipartition", "coverage", "avoidance[hyperplane]"]


def test_outputs_do_not_depend_on_threads(tmp_path, measure2):
    blobs = []
    for th in (1, 4):
        d = tmp_path / f"t{th}"
        d.mkdir()
        assert run("partition", "--kind", "multicenter", "--t", 2, "--input", measure2,
                   "--out", d / "p.json", "--svg", d / "p.svg", "--threads", th) == 0
        # same input path both times: inputs are recorded, output paths are not
        assert run("verify", "--partition", tmp_path / "t1" / "p.json", "--measure", measure2,
                   "--samples", 600,
                   "--out", d / "v.json", "--threads", th, "--manifest", d / "run.json") == 0
        blobs.append([(d / f).read_bytes() for f in ("p.json", "p.svg", "v.json")])
        side = json.loads((d / "run.json").read_text())
        assert side["threads"] == th and "wall_clock_seconds" in side
    assert blobs[0] == blobs[1]


def test_unsupported_check_is_input_error(tmp_path, measure2):
    part = tmp_path / "p.json"
    run("partition", "--kind", "multicenter", "--t", 2, "--input", measure2, "--out", part)
    assert run("verify", "--partition", part, "--measure", measure2, "--checks", "skeleton") == 4
    assert run("verify", "--partition", part, "--measure", measure2, "--checks", "bogus") == 4


def test_complexity_default_checks(tmp_path, measure2):
    part, rep = tmp_path / "c.json", tmp_path / "r.json"
    run("partition", "--kind", "multicenter2d", "--n", 6, "--input", measure2, "--out", part)
    assert run("verify", "--partition", part, "--measure", measure2, "--samples", 400,
               "--out", rep) == 0
    names = [r["name"] for r in json.loads(rep.read_text())["reports"]]
    assert names == ["equipartition", "coverage", "avoidance[line]", "containment"]
    assert run("verify", "--partition", part, "--measure", measure2, "--checks", "avoidance") == 4


def test_failed_audit_exits_2(tmp_path, measure2):
    cells = [geo.Region([[1.0, 0.0]], [0.2]), geo.Region([[-1.0, 0.0]], [-0.2])]
    p = yao.Partition(cells, geo.OrthoFrame(np.eye(2)), [np.array([0.2, 0.5])], kind="halves")
    io.save_partition(p, tmp_path / "bad.json")
    assert run("verify", "--partition", tmp_path / "bad.json", "--measure", measure2,
               "--checks", "equipartition", "--out", tmp_path / "r.json") == 2
    assert json.loads((tmp_path / "r.json").read_text())["pass"] is False


def test_bad_partition_file_exits_4(tmp_path, measure2):
    f = tmp_path / "p.json"
    f.write_text('{"dim": 2}')
    assert run("verify", "--partition", f, "--measure", measure2) == 4
    assert run("verify", "--partition", tmp_path / "missing.json", "--measure", measure2) == 4


def test_dimension_mismatch_exits_4(tmp_path, measure2):
    m3 = tmp_path / "m3.json"
    io.save_measure(M.uniform_box(200, 3, seed=1), m3)
    part = tmp_path / "p.json"
    run("partition", "--kind", "yao", "--input", measure2, "--out", part)
    assert run("verify", "--partition", part, "--measure", m3) == 4


def test_argument_errors_exit_4(capsys):
    with pytest.raises(SystemExit) as e:
        run("partition", "--kind", "nonsense")
    assert e.value.code == 4
    assert run("partition", "--kind", "multicenter", "--points", 200) == 4  # --t missing
    assert run("partition", "--kind", "yao", "--points", 200, "--threads", 0) == 4


def test_solver_failure_exits_3(tmp_path, measure2, monkeypatch):
    def boom(*a, **k):
        raise NoConvergence("no zero", 0.5)

    monkeypatch.setattr(tv, "transversal_flag", boom)
    assert run("transversal", "--kind", "flag", "--lambda", 0,
               "--measures", measure2, measure2) == 3


def test_transversal_ctt(tmp_path, measure2):
    other = tmp_path / "o.json"
    io.save_measure(M.gaussian(1500, 2, seed=9, mean=[3, 1]), other)
    out = tmp_path / "t.json"
    assert run("transversal", "--kind", "ctt", "--measures", measure2, other,
               "--samples", 1000, "--out", out) == 0
    res = json.loads(out.read_text())
    assert res["pass"] and res["k"] == 1 and all(v >= 0 for v in res["slack"].values())


def test_separated_overlap_exits_4(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    io.save_measure(M.gaussian(300, 3, seed=1), a)
    io.save_measure(M.gaussian(300, 3, seed=2), b)
    assert run("transversal", "--kind", "separated", "--measures", a, b) == 4


def test_bench_complexity(tmp_path):
    out = tmp_path / "b.csv"
    fig = tmp_path / "b.png"
    assert run("bench", "--suite", "complexity", "--dims", 2, "--ns", "2..5",
               "--points", 1500, "--samples", 300, "--out", out, "--figure", fig) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# manifest: ")
    rows = list(csv.DictReader(lines[1:]))
    assert len(rows) == 3 * 4
    assert all(r["pass"] == "True" for r in rows)
    assert fig.stat().st_size > 0


def test_bench_avoidance(tmp_path):
    out = tmp_path / "a.csv"
    assert run("bench", "--suite", "avoidance", "--dims", 2, "--ts", "1,2",
               "--points", 1500, "--samples", 300, "--out", out) == 0
    rows = list(csv.DictReader(out.read_text().splitlines()[1:]))
    assert [int(r["min_avoided"]) >= int(r["t"]) for r in rows] == [True, True]


def test_export_svg(tmp_path, measure2):
    part = tmp_path / "p.json"
    run("partition", "--kind", "bhj2d", "--n", 5, "--input", measure2, "--out", part)
    svg = tmp_path / "p.svg"
    assert run("export", "--partition", part, "--measure", measure2, "--svg", svg) == 0
    text = svg.read_text()
    assert text.startswith("<?xml") and "<dc:date>" not in text
