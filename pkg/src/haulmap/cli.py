"""Command-line front end: segment, infer, mark, pipeline, synth, eval."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
import time
from contextlib import contextmanager
from pathlib import Path

from . import areas as areas_mod
from . import graph as graph_mod
from . import synth
from .config import ConfigError, PipelineConfig
from .inference import build_edges, cluster_points, prune_low_support, sparsify
from .trace import (SegmentStats, TraceParseError, load_points, read_trips, segment_all,
                    write_points_csv, write_trips)

logger = logging.getLogger("haulmap")

EXIT_OK = 0
EXIT_BAD_ARGS = 2
EXIT_PARSE = 3
EXIT_INVARIANT = 4
EXIT_NO_CONVERGENCE = 5


class ParseFailure(Exception):
    pass


class Manifest:
    """Run record written next to the outputs; ``timings`` holds wall-clock seconds."""

    def __init__(self, command: str, cfg: PipelineConfig | None):
        self.data = {"command": command, "config": cfg.as_dict() if cfg else None,
                     "inputs": {}, "outputs": {}, "counts": {}, "warnings": [], "timings": {}}

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        yield
        self.data["timings"][name] = round(time.perf_counter() - t0, 6)

    def count(self, **kw):
        self.data["counts"].update(kw)

    def warn(self, message: str):
        self.data["warnings"].append(message)
        logger.warning(message)

    def write(self, path: Path):
        write_atomic(path, json.dumps(self.data, indent=2, sort_keys=True) + "\n")


def write_atomic(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseFailure(f"{path}: {exc}") from None


def _load_graph(path) -> graph_mod.RoadGraph:
    try:
        return graph_mod.graph_from_geojson(_load_json(path))
    except (graph_mod.GraphError, KeyError, TypeError, ValueError) as exc:
        raise ParseFailure(f"{path}: {exc}") from None


def _load_scenario(spec: str) -> synth.Scenario:
    if spec in synth.LIBRARY and not Path(spec).exists():
        return synth.library_scenario(spec)
    try:
        return synth.load_scenario(spec)
    except (OSError, ConfigError, KeyError, ValueError) as exc:
        raise ParseFailure(f"{spec}: {exc}") from None


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.default()
    if getattr(args, "config", None):
        cfg = PipelineConfig.from_file(args.config, base=cfg)
    overrides = {}
    for flag in ("seed_radius", "marker_radius", "round_cap"):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[flag] = value
    return cfg.replace(**overrides) if overrides else cfg


def _csv_text(writer, items) -> str:
    import io
    buf = io.StringIO()
    writer(items, buf)
    return buf.getvalue()


# -- stages ----------------------------------------------------------------

def _segment(args, cfg, manifest):
    with manifest.stage("load"):
        try:
            traces = load_points(args.input, latlon=args.latlon)
        except OSError as exc:
            raise ParseFailure(str(exc)) from None
    dups = sum(t.duplicates_dropped for t in traces)
    if dups:
        manifest.warn(f"dropped {dups} duplicate timestamps")
    stats = SegmentStats()
    with manifest.stage("segment"):
        trips = segment_all(traces, cfg, stats)
    if not trips:
        manifest.warn("no trips extracted")
    manifest.count(traces=len(traces), points=sum(len(t.points) for t in traces),
                   candidate_runs=stats.candidate_runs, trips=len(trips),
                   trip_points=sum(len(t) for t in trips))
    return trips


def _infer(trips, cfg, manifest):
    with manifest.stage("infer"):
        clusters, assignment = cluster_points(trips, cfg)
        graph = build_edges(trips, clusters, assignment)
        graph = prune_low_support(sparsify(graph, cfg), cfg)
        graph.drop_isolated()
    manifest.count(clusters=len(clusters), vertices=len(graph.vertices), edges=len(graph.edges))
    return graph


def _mark(graph, cfg, manifest):
    with manifest.stage("mark"):
        marked = areas_mod.mark_areas(graph, cfg)
    manifest.count(areas=len(marked.areas), rounds=marked.rounds,
                   marked_vertices=len(marked.graph.vertices), marked_edges=len(marked.graph.edges))
    return marked


# -- commands --------------------------------------------------------------

def cmd_segment(args) -> int:
    cfg = _config(args)
    manifest = Manifest("segment", cfg)
    manifest.data["inputs"]["points"] = str(args.input)
    trips = _segment(args, cfg, manifest)
    write_atomic(args.output, _csv_text(write_trips, trips))
    manifest.data["outputs"]["trips"] = str(args.output)
    manifest.write(Path(str(args.output) + ".manifest.json"))
    return EXIT_OK


def cmd_infer(args) -> int:
    cfg = _config(args)
    manifest = Manifest("infer", cfg)
    manifest.data["inputs"]["trips"] = str(args.input)
    try:
        trips = read_trips(args.input)
    except OSError as exc:
        raise ParseFailure(str(exc)) from None
    manifest.count(trips=len(trips))
    graph = _infer(trips, cfg, manifest)
    write_atomic(args.output, graph_mod.dumps(graph_mod.to_geojson(graph)))
    manifest.data["outputs"]["graph"] = str(args.output)
    manifest.write(Path(str(args.output) + ".manifest.json"))
    return EXIT_OK


def cmd_mark(args) -> int:
    cfg = _config(args)
    manifest = Manifest("mark", cfg)
    manifest.data["inputs"]["graph"] = str(args.input)
    graph = _load_graph(args.input)
    manifest.count(vertices=len(graph.vertices), edges=len(graph.edges))
    marked = _mark(graph, cfg, manifest)
    write_atomic(args.output, graph_mod.dumps(areas_mod.marked_to_geojson(marked)))
    manifest.data["outputs"]["marked"] = str(args.output)
    manifest.write(Path(str(args.output) + ".manifest.json"))
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = _config(args)
    out = Path(args.outdir)
    manifest = Manifest("pipeline", cfg)
    manifest.data["inputs"]["points"] = str(args.input)
    trips = _segment(args, cfg, manifest)
    write_atomic(out / "trips.csv", _csv_text(write_trips, trips))
    graph = _infer(trips, cfg, manifest)
    write_atomic(out / "graph.geojson", graph_mod.dumps(graph_mod.to_geojson(graph)))
    marked = _mark(graph, cfg, manifest)
    write_atomic(out / "marked.geojson", graph_mod.dumps(areas_mod.marked_to_geojson(marked)))
    manifest.data["outputs"] = {"trips": "trips.csv", "graph": "graph.geojson",
                                "marked": "marked.geojson"}
    manifest.write(out / "manifest.json")
    return EXIT_OK


def cmd_synth(args) -> int:
    scenario = _load_scenario(args.scenario)
    traces = synth.generate_trips(scenario)
    write_atomic(args.output, _csv_text(write_points_csv, traces))
    manifest = Manifest("synth", None)
    manifest.data["inputs"]["scenario"] = args.scenario
    manifest.data["outputs"]["points"] = str(args.output)
    manifest.count(traces=len(traces), points=sum(len(t.points) for t in traces))
    manifest.write(Path(str(args.output) + ".manifest.json"))
    return EXIT_OK


def cmd_eval(args) -> int:
    graph = _load_graph(args.graph)
    scenario = _load_scenario(args.scenario)
    metrics = synth.evaluate(graph, scenario, args.tolerance)
    print(json.dumps(metrics.as_dict(), sort_keys=True))
    return EXIT_OK


# -- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="haulmap", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", help="key = value parameter file")
        p.add_argument("--seed-radius", dest="seed_radius", type=float)
        p.add_argument("--marker-radius", dest="marker_radius", type=float)
        p.add_argument("--round-cap", dest="round_cap", type=int)
        return p

    p = with_config(sub.add_parser("segment", help="split GPS logs into trips"))
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--latlon", action="store_true", help="x,y columns are lon,lat degrees")
    p.set_defaults(func=cmd_segment)

    p = with_config(sub.add_parser("infer", help="cluster trips into a road graph"))
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_infer)

    p = with_config(sub.add_parser("mark", help="mark free-drive areas and intersections"))
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_mark)

    p = with_config(sub.add_parser("pipeline", help="segment, infer and mark in one go"))
    p.add_argument("input")
    p.add_argument("-o", "--outdir", required=True)
    p.add_argument("--latlon", action="store_true")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("synth", help="write GPS logs for a scenario")
    p.add_argument("scenario", help=f"scenario file or one of {sorted(synth.LIBRARY)}")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="score a graph against a scenario's lanes")
    p.add_argument("graph")
    p.add_argument("scenario")
    p.add_argument("--tolerance", type=float, default=10.0)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_BAD_ARGS if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"haulmap: config error: {exc}", file=sys.stderr)
        return EXIT_BAD_ARGS
    except (ParseFailure, TraceParseError) as exc:
        print(f"haulmap: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except areas_mod.MarkingDidNotConverge as exc:
        print(f"haulmap: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (areas_mod.AreaError, graph_mod.GraphError, ValueError) as exc:
        print(f"haulmap: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
