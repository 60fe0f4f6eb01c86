"""Directed geometric road graph with polyline edges."""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable

Point = tuple[float, float]


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class Vertex:
    id: int
    position: Point


@dataclass
class Edge:
    id: int
    source: int
    target: int
    polyline: list[Point]
    support: int = 1

    @property
    def length(self) -> float:
        return edge_length(self)

    def start_heading(self) -> float:
        (x0, y0), (x1, y1) = self.polyline[0], self.polyline[1]
        return math.atan2(y1 - y0, x1 - x0)

    def end_heading(self) -> float:
        (x0, y0), (x1, y1) = self.polyline[-2], self.polyline[-1]
        return math.atan2(y1 - y0, x1 - x0)


def edge_length(edge: Edge) -> float:
    pts = edge.polyline
    return sum(math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(pts, pts[1:]))


class RoadGraph:
    """Vertices and directed edges; at most one edge per ordered vertex pair.

    Adding an edge for an existing (source, target) pair adds to its
    support and keeps the original polyline.
    """

    def __init__(self):
        self.vertices: dict[int, Vertex] = {}
        self.edges: dict[int, Edge] = {}
        self._out: dict[int, dict[int, int]] = {}
        self._in: dict[int, dict[int, int]] = {}
        self._next_vertex = 0
        self._next_edge = 0

    # -- mutation ----------------------------------------------------------

    def add_vertex(self, position: Point, vid: int | None = None) -> int:
        x, y = float(position[0]), float(position[1])
        if not (math.isfinite(x) and math.isfinite(y)):
            raise GraphError(f"non-finite vertex position {position!r}")
        if vid is None:
            vid = self._next_vertex
        if vid in self.vertices:
            raise GraphError(f"duplicate vertex id {vid}")
        self.vertices[vid] = Vertex(vid, (x, y))
        self._out[vid] = {}
        self._in[vid] = {}
        self._next_vertex = max(self._next_vertex, vid + 1)
        return vid

    def add_edge(self, source: int, target: int, polyline: Iterable[Point] | None = None,
                 support: int = 1, eid: int | None = None) -> int:
        if source == target:
            raise GraphError(f"self-loop at vertex {source}")
        for v in (source, target):
            if v not in self.vertices:
                raise GraphError(f"unknown vertex {v}")
        if support < 1:
            raise GraphError("edge support must be >= 1")
        existing = self._out[source].get(target)
        if existing is not None:
            self.edges[existing].support += support
            return existing

        a, b = self.vertices[source].position, self.vertices[target].position
        if polyline is None:
            pts = [a, b]
        else:
            pts = [(float(x), float(y)) for x, y in polyline]
            if len(pts) < 2:
                raise GraphError("edge polyline needs at least two points")
            pts[0], pts[-1] = a, b
        if eid is None:
            eid = self._next_edge
        if eid in self.edges:
            raise GraphError(f"duplicate edge id {eid}")
        edge = Edge(eid, source, target, pts, support)
        if edge_length(edge) <= 0:
            raise GraphError(f"zero-length edge {source}->{target}")
        self.edges[eid] = edge
        self._out[source][target] = eid
        self._in[target][source] = eid
        self._next_edge = max(self._next_edge, eid + 1)
        return eid

    def remove_edge(self, eid: int) -> Edge:
        edge = self.edges.pop(eid)
        del self._out[edge.source][edge.target]
        del self._in[edge.target][edge.source]
        return edge

    def remove_vertex(self, vid: int) -> None:
        for eid in list(self.out_edges(vid)) + list(self.in_edges(vid)):
            if eid in self.edges:
                self.remove_edge(eid)
        del self.vertices[vid]
        del self._out[vid]
        del self._in[vid]

    def drop_isolated(self, candidates: Iterable[int] | None = None) -> list[int]:
        pool = self.vertices if candidates is None else candidates
        dropped = [v for v in sorted(pool) if v in self.vertices and not self._out[v] and not self._in[v]]
        for v in dropped:
            self.remove_vertex(v)
        return dropped

    # -- queries -----------------------------------------------------------

    def edge_between(self, source: int, target: int) -> int | None:
        return self._out.get(source, {}).get(target)

    def out_edges(self, vid: int) -> list[int]:
        return sorted(self._out[vid].values())

    def in_edges(self, vid: int) -> list[int]:
        return sorted(self._in[vid].values())

    def successors(self, vid: int) -> list[int]:
        return sorted(self._out[vid])

    def predecessors(self, vid: int) -> list[int]:
        return sorted(self._in[vid])

    def degrees(self, vid: int) -> tuple[int, int]:
        """(in_degree, out_degree) of a vertex."""
        if vid not in self.vertices:
            raise GraphError(f"unknown vertex {vid}")
        return len(self._in[vid]), len(self._out[vid])

    def position(self, vid: int) -> Point:
        return self.vertices[vid].position

    def total_length(self) -> float:
        return graph_total_length(self)

    def copy(self) -> RoadGraph:
        g = RoadGraph()
        for vid in sorted(self.vertices):
            g.add_vertex(self.vertices[vid].position, vid)
        for eid in sorted(self.edges):
            e = self.edges[eid]
            g.add_edge(e.source, e.target, list(e.polyline), e.support, eid)
        g._next_vertex = self._next_vertex
        g._next_edge = self._next_edge
        return g

    def check(self) -> None:
        """Raise GraphError if any structural invariant is broken."""
        pairs = set()
        for eid, e in self.edges.items():
            if e.source not in self.vertices or e.target not in self.vertices:
                raise GraphError(f"edge {eid} references a missing vertex")
            if (e.source, e.target) in pairs:
                raise GraphError(f"parallel edge {e.source}->{e.target}")
            pairs.add((e.source, e.target))
            if e.polyline[0] != self.position(e.source) or e.polyline[-1] != self.position(e.target):
                raise GraphError(f"edge {eid} polyline does not meet its vertices")
            if e.support < 1 or edge_length(e) <= 0:
                raise GraphError(f"edge {eid} has bad support or length")
            if self._out[e.source].get(e.target) != eid or self._in[e.target].get(e.source) != eid:
                raise GraphError(f"adjacency out of sync for edge {eid}")
        n_adj = sum(len(d) for d in self._out.values())
        if n_adj != len(self.edges) or sum(len(d) for d in self._in.values()) != len(self.edges):
            raise GraphError("adjacency holds stale entries")

    def __len__(self) -> int:
        return len(self.vertices)


def graph_total_length(graph: RoadGraph, edge_ids: Iterable[int] | None = None) -> float:
    ids = graph.edges if edge_ids is None else edge_ids
    return sum(edge_length(graph.edges[e]) for e in ids)


def shortest_path(graph: RoadGraph, src: int, dst: int,
                  edge_filter: Callable[[Edge], bool] | None = None) -> list[int] | None:
    """Minimum-length path as a list of edge ids, or None if unreachable.

    Equal-length paths are broken by the lexicographically smallest edge-id
    sequence. ``src == dst`` gives the empty path.
    """
    for v in (src, dst):
        if v not in graph.vertices:
            raise GraphError(f"unknown vertex {v}")
    if src == dst:
        return []
    best: dict[int, tuple[float, tuple[int, ...]]] = {src: (0.0, ())}
    heap: list[tuple[float, tuple[int, ...], int]] = [(0.0, (), src)]
    done = set()
    while heap:
        dist, path, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        if v == dst:
            return list(path)
        for eid in graph.out_edges(v):
            edge = graph.edges[eid]
            if edge.target in done or (edge_filter is not None and not edge_filter(edge)):
                continue
            key = (dist + edge_length(edge), path + (eid,))
            if edge.target not in best or key < best[edge.target]:
                best[edge.target] = key
                heapq.heappush(heap, (key[0], key[1], edge.target))
    return None


def path_length(graph: RoadGraph, path: Iterable[int]) -> float:
    return sum(edge_length(graph.edges[e]) for e in path)


def reachable(graph: RoadGraph, src: int) -> set[int]:
    seen = {src}
    stack = [src]
    while stack:
        v = stack.pop()
        for w in graph.successors(v):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


# -- GeoJSON ---------------------------------------------------------------

def graph_features(graph: RoadGraph, include_vertices: bool = True) -> list[dict]:
    feats = []
    for eid in sorted(graph.edges):
        e = graph.edges[eid]
        feats.append({
            "type": "Feature",
            "geometry": {"type": "LineString", "coordinates": [list(p) for p in e.polyline]},
            "properties": {"kind": "edge", "id": e.id, "from": e.source, "to": e.target,
                           "support": e.support},
        })
    if include_vertices:
        for vid in sorted(graph.vertices):
            feats.append({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": list(graph.vertices[vid].position)},
                "properties": {"kind": "vertex", "id": vid},
            })
    return feats


def to_geojson(graph: RoadGraph, include_vertices: bool = True) -> dict:
    return {"type": "FeatureCollection", "features": graph_features(graph, include_vertices)}


def dumps(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def graph_from_geojson(data: dict) -> RoadGraph:
    """Rebuild a graph from exported features.

    Vertex Point features are optional; without them vertices are taken
    from edge endpoints under the edges' ``from``/``to`` ids.
    """
    if data.get("type") != "FeatureCollection":
        raise GraphError("expected a GeoJSON FeatureCollection")
    graph = RoadGraph()
    edges = []
    for feat in data.get("features", []):
        props = feat.get("properties") or {}
        geom = feat.get("geometry") or {}
        if geom.get("type") == "Point" and props.get("kind", "vertex") == "vertex":
            graph.add_vertex(tuple(geom["coordinates"][:2]), int(props["id"]))
        elif geom.get("type") == "LineString":
            edges.append((props, geom["coordinates"]))
    for props, coords in sorted(edges, key=lambda item: int(item[0]["id"])):
        try:
            src, dst = int(props["from"]), int(props["to"])
        except KeyError:
            raise GraphError(f"edge feature lacks from/to: {props!r}") from None
        pts = [tuple(c[:2]) for c in coords]
        for vid, pos in ((src, pts[0]), (dst, pts[-1])):
            if vid not in graph.vertices:
                graph.add_vertex(pos, vid)
        graph.add_edge(src, dst, pts, int(props.get("support", 1)), int(props["id"]))
    return graph
