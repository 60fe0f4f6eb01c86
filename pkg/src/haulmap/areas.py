"""Free-drive area and intersection marking on an inferred road graph.

Every split and merge (and every dead end) gets a circular-sector marker.
The markers are merged into areas, then the graph and the areas are
refined in rounds until the area-growing steps stop changing anything:

1. inside each area keep only shortest entry-to-exit connections;
2. absorb edges between two vertices of one area that leave its polygon;
3. absorb paths that leave an area and come back without touching another;
4. bridge areas that are close and joined by several same-direction paths;
5-7. merge overlapping areas, fill holes, close each area morphologically.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import shapely
import shapely.geometry
from shapely.geometry import LineString, Point, Polygon

from . import geometry as geo
from .config import PipelineConfig
from .graph import RoadGraph, shortest_path
from .inference import angle_diff


class AreaError(RuntimeError):
    pass


class AreaOverlapError(AreaError):
    """A vertex sits inside more than one area."""


class MarkingDidNotConverge(AreaError):
    def __init__(self, rounds: int, graph: RoadGraph, polygons: list[Polygon]):
        self.rounds = rounds
        self.graph = graph
        self.polygons = polygons
        super().__init__(f"area marking still changing after {rounds} round(s)")


@dataclass(frozen=True)
class Marker:
    vertex: int
    edge: int
    rule: str  # "split", "merge" or "dead_end"
    polygon: Polygon


@dataclass
class Area:
    polygon: Polygon
    entry_nodes: frozenset[int] = frozenset()
    exit_nodes: frozenset[int] = frozenset()


@dataclass
class Classification:
    membership: dict[int, int]
    entries: list[set[int]]
    exits: list[set[int]]
    # edge id -> (source area or None, target area or None), for edges that change area
    crossings: dict[int, tuple[int | None, int | None]]

    def area_of(self, vid: int) -> int | None:
        return self.membership.get(vid)


@dataclass
class MarkedMap:
    graph: RoadGraph
    areas: list[Area]
    rounds: int = 0
    history: list[dict] = field(default_factory=list)


# -- markers ---------------------------------------------------------------

def place_markers(graph: RoadGraph, cfg: PipelineConfig) -> list[Marker]:
    """Sector markers at splits, merges and dead ends."""
    markers = []

    def sector(vid, direction):
        return geo.make_sector(graph.position(vid), direction, cfg.marker_radius,
                               cfg.marker_angle, cfg.arc_segments)

    for vid in sorted(graph.vertices):
        n_in, n_out = graph.degrees(vid)
        if n_out >= 2:
            for eid in graph.out_edges(vid):
                markers.append(Marker(vid, eid, "split", sector(vid, graph.edges[eid].start_heading())))
        if n_in >= 2:
            for eid in graph.in_edges(vid):
                markers.append(Marker(vid, eid, "merge", sector(vid, graph.edges[eid].end_heading() + math.pi)))
        if n_in + n_out == 1:
            if n_out:
                eid = graph.out_edges(vid)[0]
                direction = graph.edges[eid].start_heading() + math.pi
            else:
                eid = graph.in_edges(vid)[0]
                direction = graph.edges[eid].end_heading()
            markers.append(Marker(vid, eid, "dead_end", sector(vid, direction)))
    return markers


def _merge_overlapping(polys: list[Polygon], fill: bool) -> list[Polygon]:
    """Union polygons whose interiors overlap; leave the rest alone."""
    polys = list(polys)
    while True:
        merged = False
        for i in range(len(polys)):
            for j in range(i + 1, len(polys)):
                if polys[i].intersection(polys[j]).area > geo.SLIVER_AREA:
                    parts = geo.union([polys[i], polys[j]]).geoms
                    joined = [geo.fill_holes(p) if fill else p for p in parts]
                    polys = [p for k, p in enumerate(polys) if k not in (i, j)] + joined
                    merged = True
                    break
            if merged:
                break
        if not merged:
            return _sorted(polys)


def _sorted(polys) -> list[Polygon]:
    return sorted(polys, key=lambda p: (round(p.centroid.x, 6), round(p.centroid.y, 6), p.area))


def initial_areas(markers: Sequence[Marker | Polygon], cfg: PipelineConfig) -> list[Polygon]:
    """Union the markers, then close each component on its own."""
    shapes = [m.polygon if isinstance(m, Marker) else m for m in markers]
    if not shapes:
        return []
    out = []
    for comp in geo.union(shapes).geoms:
        out.extend(geo.close(comp, cfg.area_dilate, cfg.area_erode, cfg.arc_segments).geoms)
    return _merge_overlapping(out, fill=False)


# -- classification --------------------------------------------------------

def _membership(graph: RoadGraph, polygons: Sequence[Polygon], strict: bool = True) -> dict[int, int]:
    vids = sorted(graph.vertices)
    if not vids or not polygons:
        return {}
    pts = shapely.points(np.array([graph.position(v) for v in vids]))
    member: dict[int, int] = {}
    for idx, poly in enumerate(polygons):
        shapely.prepare(poly)
        inside = shapely.covers(poly, pts)
        for v, hit in zip(vids, inside):
            if not hit:
                continue
            if v in member:
                if strict:
                    raise AreaOverlapError(f"vertex {v} lies in areas {member[v]} and {idx}")
                continue
            member[v] = idx
    return member


def classify_nodes(graph: RoadGraph, polygons: Sequence[Polygon]) -> Classification:
    """Entry/exit sets per area plus area annotations on crossing edges."""
    member = _membership(graph, polygons)
    entries = [set() for _ in polygons]
    exits = [set() for _ in polygons]
    crossings = {}
    for eid in sorted(graph.edges):
        e = graph.edges[eid]
        a, b = member.get(e.source), member.get(e.target)
        if a == b:
            continue
        crossings[eid] = (a, b)
        if b is not None:
            entries[b].add(e.target)
        if a is not None:
            exits[a].add(e.source)
    return Classification(member, entries, exits, crossings)


def _covered_edges(graph: RoadGraph, polygon: Polygon, eids=None) -> set[int]:
    ids = sorted(graph.edges if eids is None else eids)
    if not ids:
        return set()
    lines = [LineString(graph.edges[e].polyline) for e in ids]
    shapely.prepare(polygon)
    hit = shapely.covers(polygon, lines)
    return {e for e, h in zip(ids, hit) if h}


# -- internal path pruning -------------------------------------------------

def is_opposite_lane(graph: RoadGraph, entry: int, exit_: int, member: dict[int, int],
                     cfg: PipelineConfig) -> bool:
    """True when the exit is the other direction of the road the entry arrives on."""
    (ex, ey), (xx, xy) = graph.position(entry), graph.position(exit_)
    if math.hypot(ex - xx, ey - xy) >= cfg.opposite_lane_distance:
        return False
    area = member.get(entry)
    arriving = [graph.edges[e].end_heading() for e in graph.in_edges(entry)
                if member.get(graph.edges[e].source) != area]
    leaving = [graph.edges[e].start_heading() for e in graph.out_edges(exit_)
               if member.get(graph.edges[e].target) != area]
    return any(angle_diff(h_in, h_out + math.pi) <= cfg.opposite_lane_angle
               for h_in in arriving for h_out in leaving)


def connection_pairs(graph: RoadGraph, area: Area, member: dict[int, int],
                     cfg: PipelineConfig) -> list[tuple[int, int]]:
    """(entry, exit) pairs that should stay connected, opposite lanes skipped."""
    pairs = []
    for a in sorted(area.entry_nodes):
        for b in sorted(area.exit_nodes):
            if a != b and not is_opposite_lane(graph, a, b, member, cfg):
                pairs.append((a, b))
    return pairs


def prune_internal_paths(graph: RoadGraph, area: Area, cfg: PipelineConfig,
                         member: dict[int, int] | None = None) -> list[int]:
    """Remove in-area edges that are on no chosen entry-to-exit shortest path.

    Edits ``graph`` in place and returns the removed edge ids. Candidates
    are the edges whose whole polyline lies in the area polygon.
    """
    if member is None:
        member = {v: 0 for v in _membership(graph, [area.polygon])}
    candidates = _covered_edges(graph, area.polygon)
    if not candidates:
        return []
    keep: set[int] = set()
    for a, b in connection_pairs(graph, area, member, cfg):
        path = shortest_path(graph, a, b, lambda e: e.id in candidates)
        if path:
            keep.update(path)
    removed = sorted(candidates - keep)
    touched = set()
    for eid in removed:
        e = graph.remove_edge(eid)
        touched.update((e.source, e.target))
    graph.drop_isolated(touched)
    return removed


# -- area growth -----------------------------------------------------------

def _corridor(graph: RoadGraph, eids, cfg: PipelineConfig):
    return [geo.buffer_polyline(graph.edges[e].polyline, cfg.path_buffer, cfg.arc_segments)
            for e in sorted(eids)]


def _grow(polygon, extra: list[Polygon]):
    """Union ``extra`` into the area geometry."""
    merged = geo.union([polygon, *extra])
    return merged.geoms[0] if len(merged.geoms) == 1 else merged


def uncovered_internal_edges(graph: RoadGraph, polygon: Polygon, members: set[int]) -> list[int]:
    inner = [e for e in sorted(graph.edges)
             if graph.edges[e].source in members and graph.edges[e].target in members]
    covered = _covered_edges(graph, polygon, inner)
    return [e for e in inner if e not in covered]


def absorb_internal_edges(graph: RoadGraph, polygon: Polygon, members: set[int],
                          cfg: PipelineConfig) -> tuple[Polygon, bool]:
    """Buffer edges joining two vertices of the area but leaving its polygon."""
    loose = uncovered_internal_edges(graph, polygon, members)
    if not loose:
        return polygon, False
    return _grow(polygon, _corridor(graph, loose, cfg)), True


def _forward(graph: RoadGraph, starts, allowed) -> set[int]:
    seen = set()
    queue = deque(starts)
    while queue:
        v = queue.popleft()
        for w in graph.successors(v):
            if w not in seen and allowed(w):
                seen.add(w)
                queue.append(w)
    return seen


def _backward(graph: RoadGraph, ends, allowed) -> set[int]:
    seen = set()
    queue = deque(ends)
    while queue:
        v = queue.popleft()
        for w in graph.predecessors(v):
            if w not in seen and allowed(w):
                seen.add(w)
                queue.append(w)
    return seen


def direct_path_edges(graph: RoadGraph, member: dict[int, int], src: int, dst: int) -> set[int]:
    """Edges on some path from area ``src`` to area ``dst`` whose inner vertices are in no area.

    With ``src == dst`` this finds return paths, which need at least one
    outside vertex.
    """
    outside = lambda v: v not in member
    src_nodes = [v for v, a in member.items() if a == src]
    dst_nodes = [v for v, a in member.items() if a == dst]
    fwd = _forward(graph, src_nodes, outside)
    bwd = _backward(graph, dst_nodes, outside)
    edges = set()
    for eid, e in graph.edges.items():
        s, t = e.source, e.target
        s_ok = member.get(s) == src or s in fwd
        t_ok = member.get(t) == dst or t in bwd
        if not (s_ok and t_ok):
            continue
        if (s in member and member[s] != src) or (t in member and member[t] != dst):
            continue
        if src == dst and s in member and t in member:
            continue
        edges.add(eid)
    return edges


def count_edge_disjoint(graph: RoadGraph, edges: set[int], sources: set[int],
                        sinks: set[int], limit: int = 2) -> int:
    """Edge-disjoint source-to-sink paths over ``edges``, counted up to ``limit``."""
    cap: dict[tuple, int] = {}
    adj: dict = {}

    def link(u, v, c):
        cap[(u, v)] = cap.get((u, v), 0) + c
        cap.setdefault((v, u), 0)
        adj.setdefault(u, set()).add(v)
        adj.setdefault(v, set()).add(u)

    src, snk = ("S",), ("T",)
    for eid in edges:
        e = graph.edges[eid]
        link(e.source, e.target, 1)
    for v in sources:
        link(src, v, limit)
    for v in sinks:
        link(v, snk, limit)
    flow = 0
    while flow < limit:
        parent = {src: None}
        queue = deque([src])
        while queue and snk not in parent:
            u = queue.popleft()
            for w in sorted(adj.get(u, ()), key=repr):
                if w not in parent and cap[(u, w)] > 0:
                    parent[w] = u
                    queue.append(w)
        if snk not in parent:
            break
        v = snk
        while parent[v] is not None:
            u = parent[v]
            cap[(u, v)] -= 1
            cap[(v, u)] += 1
            v = u
        flow += 1
    return flow


def absorb_return_paths(graph: RoadGraph, polygons: list[Polygon], member: dict[int, int],
                        cfg: PipelineConfig) -> tuple[list[Polygon], bool]:
    """Absorb paths leaving an area and re-entering it via outside vertices only."""
    out, changed = list(polygons), False
    for idx in range(len(polygons)):
        edges = direct_path_edges(graph, member, idx, idx)
        if edges:
            out[idx] = _grow(out[idx], _corridor(graph, edges, cfg))
            changed = True
    return out, changed


def merge_close_areas(graph: RoadGraph, polygons: list[Polygon], member: dict[int, int],
                      cfg: PipelineConfig) -> tuple[list[Polygon], bool]:
    """Bridge near areas joined by two or more same-direction direct paths."""
    out, changed = list(polygons), False
    for p in range(len(polygons)):
        for q in range(len(polygons)):
            if p == q or geo.distance(polygons[p], polygons[q]) >= cfg.area_merge_distance:
                continue
            edges = direct_path_edges(graph, member, p, q)
            if not edges:
                continue
            sources = {v for v, a in member.items() if a == p}
            sinks = {v for v, a in member.items() if a == q}
            if count_edge_disjoint(graph, edges, sources, sinks) < 2:
                continue
            out[p] = _grow(out[p], _corridor(graph, edges, cfg))
            changed = True
    return out, changed


# -- normalization ---------------------------------------------------------

def normalize_areas(polygons: Sequence, cfg: PipelineConfig) -> list[Polygon]:
    """Merge overlaps, fill holes, then close each area by ``area_erode``."""
    merged = [geo.fill_holes(p) for p in geo.union(polygons).geoms]
    closed = []
    for poly in merged:
        for part in geo.close(poly, cfg.area_erode, cfg.area_erode, cfg.arc_segments).geoms:
            closed.append(geo.fill_holes(part))
    return _merge_overlapping(closed, fill=True)


# -- driver ----------------------------------------------------------------

def _areas_from(polygons: list[Polygon], cls: Classification) -> list[Area]:
    return [Area(p, frozenset(cls.entries[i]), frozenset(cls.exits[i])) for i, p in enumerate(polygons)]


def mark_areas(graph: RoadGraph, cfg: PipelineConfig) -> MarkedMap:
    """Place markers, build areas and refine them until no area grows.

    The input graph is not modified. Raises MarkingDidNotConverge after
    ``cfg.round_cap`` rounds that all still changed something.
    """
    g = graph.copy()
    polygons = initial_areas(place_markers(g, cfg), cfg)
    history = []
    if not polygons:
        return MarkedMap(g, [], 0, history)

    for rnd in range(1, cfg.round_cap + 1):
        cls = classify_nodes(g, polygons)
        areas = _areas_from(polygons, cls)
        removed = []
        for area in areas:
            removed += prune_internal_paths(g, area, cfg, cls.membership)
        member = {v: a for v, a in cls.membership.items() if v in g.vertices}

        grown = list(polygons)
        grew_internal = False
        for idx, poly in enumerate(polygons):
            members = {v for v, a in member.items() if a == idx}
            new, ch = absorb_internal_edges(g, poly, members, cfg)
            if ch:
                grown[idx] = new
                grew_internal = True
        returned, grew_returns = absorb_return_paths(g, polygons, member, cfg)
        bridged, grew_bridges = merge_close_areas(g, polygons, member, cfg)
        polygons = normalize_areas([*grown, *returned, *bridged], cfg)
        history.append({"round": rnd, "removed_edges": len(removed), "internal": grew_internal,
                        "returns": grew_returns, "bridges": grew_bridges, "areas": len(polygons)})
        if not (grew_internal or grew_returns or grew_bridges):
            cls = classify_nodes(g, polygons)
            areas = _areas_from(polygons, cls)
            for area in areas:
                prune_internal_paths(g, area, cfg, cls.membership)
            cls = classify_nodes(g, polygons)
            return MarkedMap(g, _areas_from(polygons, cls), rnd, history)
    raise MarkingDidNotConverge(cfg.round_cap, g, polygons)


# -- checks ----------------------------------------------------------------

def intersection_vertices(graph: RoadGraph) -> list[int]:
    return [v for v in sorted(graph.vertices) if any(d > 1 for d in graph.degrees(v))]


def uncovered_intersections(marked: MarkedMap) -> list[int]:
    """Intersection vertices that are not strictly interior to any area."""
    bad = []
    for v in intersection_vertices(marked.graph):
        pt = Point(marked.graph.position(v))
        if not any(a.polygon.contains(pt) for a in marked.areas):
            bad.append(v)
    return bad


def check_marked_map(marked: MarkedMap) -> None:
    """Raise AreaError if the MarkedMap invariants do not hold."""
    polys = [a.polygon for a in marked.areas]
    for i in range(len(polys)):
        if polys[i].interiors:
            raise AreaError(f"area {i} has holes")
        for j in range(i + 1, len(polys)):
            if polys[i].intersection(polys[j]).area > geo.SLIVER_AREA:
                raise AreaError(f"areas {i} and {j} overlap")
    bad = uncovered_intersections(marked)
    if bad:
        raise AreaError(f"intersection vertices outside every area: {bad}")
    cls = classify_nodes(marked.graph, polys)
    for i, area in enumerate(marked.areas):
        if set(area.entry_nodes) != cls.entries[i] or set(area.exit_nodes) != cls.exits[i]:
            raise AreaError(f"area {i} entry/exit sets are stale")


def edges_inside(graph: RoadGraph, polygon: Polygon) -> set[int]:
    return _covered_edges(graph, polygon)


def line_of(graph: RoadGraph, eid: int) -> LineString:
    return LineString(graph.edges[eid].polyline)


# -- GeoJSON ---------------------------------------------------------------

def marked_to_geojson(marked: MarkedMap) -> dict:
    from .graph import graph_features

    feats = graph_features(marked.graph)
    for i, area in enumerate(marked.areas):
        feats.append({
            "type": "Feature",
            "geometry": shapely.geometry.mapping(area.polygon),
            "properties": {"kind": "area", "id": i, "entry_nodes": sorted(area.entry_nodes),
                           "exit_nodes": sorted(area.exit_nodes),
                           "rounds_to_converge": marked.rounds},
        })
    return {"type": "FeatureCollection", "features": _listify(feats)}


def _listify(obj):
    if isinstance(obj, dict):
        return {k: _listify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_listify(v) for v in obj]
    return obj


def marked_from_geojson(data: dict) -> MarkedMap:
    from .graph import graph_from_geojson

    graph = graph_from_geojson(data)
    areas, rounds = [], 0
    area_feats = [f for f in data.get("features", [])
                  if (f.get("properties") or {}).get("kind") == "area"]
    for feat in sorted(area_feats, key=lambda f: f["properties"]["id"]):
        props = feat["properties"]
        poly = shapely.geometry.shape(feat["geometry"])
        areas.append(Area(poly, frozenset(props.get("entry_nodes", [])),
                          frozenset(props.get("exit_nodes", []))))
        rounds = int(props.get("rounds_to_converge", 0))
    return MarkedMap(graph, areas, rounds)
