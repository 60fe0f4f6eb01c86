"""Heading-aware incremental clustering of trip points into a road graph."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .config import PipelineConfig
from .graph import RoadGraph
from .trace import Trip

TWO_PI = 2 * math.pi


def angle_diff(a: float, b: float) -> float:
    """Absolute circular difference in [0, pi]."""
    d = (a - b) % TWO_PI
    return min(d, TWO_PI - d)


@dataclass
class Cluster:
    id: int
    x: float
    y: float
    count: int = 1
    # unit-vector sums for the circular mean heading
    hx: float = 0.0
    hy: float = 0.0

    @property
    def centroid(self) -> tuple[float, float]:
        return (self.x, self.y)

    @property
    def mean_heading(self) -> float:
        return math.atan2(self.hy, self.hx) % TWO_PI

    def add(self, x: float, y: float, heading: float) -> None:
        self.count += 1
        self.x += (x - self.x) / self.count
        self.y += (y - self.y) / self.count
        self.hx += math.cos(heading)
        self.hy += math.sin(heading)


class _Grid:
    """Uniform-cell bucket index over cluster centroids."""

    def __init__(self, cell: float):
        self.cell = cell
        self.buckets: dict[tuple[int, int], set[int]] = {}

    def key(self, x: float, y: float) -> tuple[int, int]:
        return (math.floor(x / self.cell), math.floor(y / self.cell))

    def insert(self, cid: int, key) -> None:
        self.buckets.setdefault(key, set()).add(cid)

    def move(self, cid: int, old, new) -> None:
        if old != new:
            self.buckets[old].discard(cid)
            self.insert(cid, new)

    def near(self, x: float, y: float):
        cx, cy = self.key(x, y)
        for i in (cx - 1, cx, cx + 1):
            for j in (cy - 1, cy, cy + 1):
                yield from self.buckets.get((i, j), ())


def cluster_points(trips: Sequence[Trip], cfg: PipelineConfig
                   ) -> tuple[list[Cluster], list[list[int]]]:
    """Assign every trip point to a cluster, seeding new ones as needed.

    A point joins the nearest cluster within ``seed_radius`` whose mean
    heading is within ``heading_tolerance``; otherwise it seeds a cluster.
    Returns the clusters and, per trip, the cluster id of each point.
    """
    clusters: list[Cluster] = []
    grid = _Grid(cfg.seed_radius)
    keys: list[tuple[int, int]] = []
    assignment: list[list[int]] = []
    r2 = cfg.seed_radius ** 2
    for trip in trips:
        labels = []
        for p in trip.points:
            best, best_d2 = None, math.inf
            for cid in grid.near(p.x, p.y):
                c = clusters[cid]
                d2 = (c.x - p.x) ** 2 + (c.y - p.y) ** 2
                if d2 > r2 or angle_diff(c.mean_heading, p.heading) >= cfg.heading_tolerance:
                    continue
                if d2 < best_d2 or (d2 == best_d2 and cid < best):
                    best, best_d2 = cid, d2
            if best is None:
                best = len(clusters)
                clusters.append(Cluster(best, p.x, p.y, 1, math.cos(p.heading), math.sin(p.heading)))
                keys.append(grid.key(p.x, p.y))
                grid.insert(best, keys[best])
            else:
                c = clusters[best]
                c.add(p.x, p.y, p.heading)
                new_key = grid.key(c.x, c.y)
                grid.move(best, keys[best], new_key)
                keys[best] = new_key
            labels.append(best)
        assignment.append(labels)
    return clusters, assignment


def build_edges(trips: Sequence[Trip], clusters: Sequence[Cluster],
                assignment: Sequence[Sequence[int]]) -> RoadGraph:
    """Link consecutive distinct clusters of each trip with straight edges."""
    graph = RoadGraph()
    for c in clusters:
        graph.add_vertex(c.centroid, c.id)
    for labels in assignment:
        prev = None
        for cid in labels:
            if prev is not None and cid != prev:
                graph.add_edge(prev, cid)
            prev = cid
    return graph


def _point_segment_distance(p, a, b) -> float:
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    seg2 = dx * dx + dy * dy
    t = 0.0 if seg2 == 0 else max(0.0, min(1.0, ((p[0] - ax) * dx + (p[1] - ay) * dy) / seg2))
    return math.hypot(p[0] - ax - t * dx, p[1] - ay - t * dy)


def sparsify(graph: RoadGraph, cfg: PipelineConfig) -> RoadGraph:
    """Remove two-hop shortcuts a->c where a->b->c runs close to a-c.

    The removed edge's support is folded into both hops. Repeats in
    ascending edge-id order until nothing more can be removed.
    """
    g = graph.copy()
    changed = True
    while changed:
        changed = False
        for eid in sorted(g.edges):
            if eid not in g.edges:
                continue
            e = g.edges[eid]
            a, c = e.source, e.target
            pa, pc = g.position(a), g.position(c)
            for b in g.successors(a):
                if b == c:
                    continue
                second = g.edge_between(b, c)
                if second is None:
                    continue
                if _point_segment_distance(g.position(b), pa, pc) > cfg.sparsify_corridor:
                    continue
                first = g.edge_between(a, b)
                g.remove_edge(eid)
                g.edges[first].support += e.support
                g.edges[second].support += e.support
                changed = True
                break
    return g


def prune_low_support(graph: RoadGraph, cfg: PipelineConfig) -> RoadGraph:
    g = graph.copy()
    touched = set()
    for eid in sorted(g.edges):
        e = g.edges[eid]
        if e.support < cfg.min_edge_support:
            touched.update((e.source, e.target))
            g.remove_edge(eid)
    g.drop_isolated(touched)
    return g


def infer_graph(trips: Sequence[Trip], cfg: PipelineConfig) -> RoadGraph:
    """Cluster, link, sparsify and prune in one call."""
    clusters, assignment = cluster_points(trips, cfg)
    graph = build_edges(trips, clusters, assignment)
    graph = prune_low_support(sparsify(graph, cfg), cfg)
    graph.drop_isolated()
    return graph
