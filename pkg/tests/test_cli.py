import json

import pytest

from haulmap.cli import (EXIT_BAD_ARGS, EXIT_INVARIANT, EXIT_NO_CONVERGENCE, EXIT_OK, EXIT_PARSE,
                         main)
from haulmap.graph import dumps, to_geojson
from haulmap.synth import four_way_with_clutter


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def bench_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("bench")
    assert run("synth", "bench", "-o", d / "points.csv") == EXIT_OK
    assert run("pipeline", d / "points.csv", "-o", d / "out") == EXIT_OK
    return d


def test_pipeline_outputs(bench_run):
    out = bench_run / "out"
    assert sorted(p.name for p in out.iterdir()) == \
        ["graph.geojson", "manifest.json", "marked.geojson", "trips.csv"]
    manifest = json.loads((out / "manifest.json").read_text())
    counts = manifest["counts"]
    assert counts["trips"] <= counts["candidate_runs"]
    assert counts["areas"] >= 1 and counts["rounds"] >= 1
    assert set(manifest["timings"]) == {"load", "segment", "infer", "mark"}
    assert manifest["config"]["seed_radius"] == 30.0


def test_pipeline_rerun_is_byte_identical(bench_run, tmp_path):
    assert run("pipeline", bench_run / "points.csv", "-o", tmp_path) == EXIT_OK
    for name in ("trips.csv", "graph.geojson", "marked.geojson"):
        assert (tmp_path / name).read_bytes() == (bench_run / "out" / name).read_bytes()
    a = json.loads((tmp_path / "manifest.json").read_text())
    b = json.loads((bench_run / "out" / "manifest.json").read_text())
    for m in (a, b):
        m.pop("timings")
        m.pop("inputs")
    assert a == b


def test_stagewise_commands_match_pipeline(bench_run, tmp_path):
    pts = bench_run / "points.csv"
    assert run("segment", pts, "-o", tmp_path / "trips.csv") == EXIT_OK
    assert run("infer", tmp_path / "trips.csv", "-o", tmp_path / "graph.geojson") == EXIT_OK
    assert run("mark", tmp_path / "graph.geojson", "-o", tmp_path / "marked.geojson") == EXIT_OK
    for name in ("trips.csv", "graph.geojson", "marked.geojson"):
        assert (tmp_path / name).read_bytes() == (bench_run / "out" / name).read_bytes()
    assert (tmp_path / "trips.csv.manifest.json").exists()


def test_eval_prints_metrics(bench_run, capsys):
    capsys.readouterr()
    assert run("eval", bench_run / "out" / "graph.geojson", "bench", "--tolerance", 10) == EXIT_OK
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["coverage_fraction"] >= 0.9


def test_empty_csv_warns(tmp_path):
    src = tmp_path / "empty.csv"
    src.write_text("truck_id,timestamp,x,y\n")
    assert run("segment", src, "-o", tmp_path / "trips.csv") == EXIT_OK
    manifest = json.loads((tmp_path / "trips.csv.manifest.json").read_text())
    assert manifest["counts"]["trips"] == 0
    assert any("no trips" in w for w in manifest["warnings"])
    assert (tmp_path / "trips.csv").read_text().startswith("truck_id")


def test_round_cap_exit_code(tmp_path):
    g, _ = four_way_with_clutter()
    src = tmp_path / "graph.geojson"
    src.write_text(dumps(to_geojson(g)))
    assert run("mark", src, "-o", tmp_path / "m.geojson", "--round-cap", 1) == EXIT_NO_CONVERGENCE
    assert not (tmp_path / "m.geojson").exists()
    assert run("mark", src, "-o", tmp_path / "m.geojson") == EXIT_OK


def test_four_way_scenario_needs_two_rounds(tmp_path):
    assert run("synth", "four_way", "-o", tmp_path / "p.csv") == EXIT_OK
    assert run("pipeline", tmp_path / "p.csv", "-o", tmp_path / "out", "--round-cap", 1) \
        == EXIT_NO_CONVERGENCE


def test_marked_round_trip(bench_run):
    from haulmap.areas import marked_from_geojson, marked_to_geojson
    text = (bench_run / "out" / "marked.geojson").read_text()
    assert dumps(marked_to_geojson(marked_from_geojson(json.loads(text)))) == text


def test_trips_round_trip(bench_run, tmp_path):
    from haulmap.trace import read_trips, write_trips
    text = (bench_run / "out" / "trips.csv").read_text()
    with open(tmp_path / "again.csv", "w", newline="") as fh:
        write_trips(read_trips(bench_run / "out" / "trips.csv"), fh)
    assert (tmp_path / "again.csv").read_text() == text


class TestErrors:
    def test_bad_args(self):
        assert run("segment") == EXIT_BAD_ARGS
        assert run("frobnicate") == EXIT_BAD_ARGS

    def test_bad_config(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("area_dilate = 5\n")
        src = tmp_path / "p.csv"
        src.write_text("truck_id,timestamp,x,y\n")
        assert run("segment", src, "-o", tmp_path / "t.csv", "--config", cfg) == EXIT_BAD_ARGS
        assert run("segment", src, "-o", tmp_path / "t.csv", "--seed-radius", -3) == EXIT_BAD_ARGS

    def test_parse_errors(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("truck_id,timestamp,x,y\nA,zz,0,0\n")
        assert run("segment", bad, "-o", tmp_path / "t.csv") == EXIT_PARSE
        assert run("segment", tmp_path / "missing.csv", "-o", tmp_path / "t.csv") == EXIT_PARSE
        junk = tmp_path / "g.geojson"
        junk.write_text("{not json")
        assert run("mark", junk, "-o", tmp_path / "m.geojson") == EXIT_PARSE
        scen = tmp_path / "s.cfg"
        scen.write_text("lane.a = 0 0, 1\n")
        assert run("synth", scen, "-o", tmp_path / "p.csv") == EXIT_PARSE

    def test_invariant_violation(self, tmp_path):
        src = tmp_path / "g.geojson"
        src.write_text(json.dumps({"type": "FeatureCollection", "features": [
            {"type": "Feature", "geometry": {"type": "LineString", "coordinates": [[0, 0], [0, 0]]},
             "properties": {"kind": "edge", "id": 0, "from": 1, "to": 1, "support": 1}},
            {"type": "Feature", "geometry": {"type": "Point", "coordinates": [0, 0]},
             "properties": {"kind": "vertex", "id": 1}}]}))
        assert run("mark", src, "-o", tmp_path / "m.geojson") in (EXIT_PARSE, EXIT_INVARIANT)


def test_scenario_file_synth(tmp_path):
    scen = tmp_path / "s.cfg"
    scen.write_text("lane.a = 0 0, 300 0\ntrip.1 = a @ 8\ntrip.2 = a @ 9\nnoise_sigma = 0\n")
    assert run("synth", scen, "-o", tmp_path / "p.csv") == EXIT_OK
    rows = (tmp_path / "p.csv").read_text().splitlines()
    assert rows[0].split(",")[:4] == ["truck_id", "timestamp", "x", "y"]
    assert len(rows) == 1 + 7 + 6


def test_latlon_flag(tmp_path):
    src = tmp_path / "ll.csv"
    rows = ["truck_id,timestamp,x,y"] + [f"A,{6 * i},{150 + i * 1e-4:.6f},-30.0" for i in range(20)]
    src.write_text("\n".join(rows) + "\n")
    assert run("segment", src, "-o", tmp_path / "t.csv", "--latlon") == EXIT_OK
    manifest = json.loads((tmp_path / "t.csv.manifest.json").read_text())
    assert manifest["counts"]["trips"] == 1
