import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from haulmap.graph import (GraphError, RoadGraph, dumps, edge_length, graph_from_geojson,
                           graph_total_length, path_length, shortest_path, to_geojson)

from conftest import all_simple_paths, build_graph


class TestEdges:
    def test_insert(self):
        g = build_graph({1: (0, 0), 2: (10, 0)}, [])
        eid = g.add_edge(1, 2)
        assert g.edges[eid].support == 1

    def test_parallel_accumulates(self):
        g = build_graph({1: (0, 0), 2: (10, 0)}, [])
        a = g.add_edge(1, 2)
        b = g.add_edge(1, 2, [(0, 0), (5, 5), (10, 0)])
        assert a == b and len(g.edges) == 1
        assert g.edges[a].support == 2
        assert g.edges[a].polyline == [(0.0, 0.0), (10.0, 0.0)]

    def test_self_loop_rejected(self):
        g = build_graph({1: (0, 0)}, [])
        with pytest.raises(GraphError):
            g.add_edge(1, 1)

    def test_unknown_vertex(self):
        g = build_graph({1: (0, 0)}, [])
        with pytest.raises(GraphError):
            g.add_edge(1, 9)

    def test_polyline_endpoints_snap_to_vertices(self):
        g = build_graph({1: (0, 0), 2: (10, 0)}, [])
        eid = g.add_edge(1, 2, [(0.1, 0), (5, 3), (9.9, 0)])
        assert g.edges[eid].polyline[0] == (0.0, 0.0)
        assert g.edges[eid].polyline[-1] == (10.0, 0.0)
        g.check()


class TestDegrees:
    def test_isolated(self):
        assert build_graph({0: (0, 0)}, []).degrees(0) == (0, 0)

    def test_merge_centre(self, y_merge):
        assert y_merge.degrees(2) == (2, 1)

    def test_dead_end(self, chain):
        assert chain.degrees(2) == (1, 0)

    def test_unknown(self, chain):
        with pytest.raises(GraphError):
            chain.degrees(42)


class TestLengths:
    def test_345(self):
        g = build_graph({0: (0, 0), 1: (3, 4)}, [(0, 1)])
        assert edge_length(g.edges[0]) == 5.0

    def test_bent(self):
        g = build_graph({0: (0, 0), 1: (1, 1)}, [(0, 1, [(0, 0), (1, 0), (1, 1)])])
        assert edge_length(g.edges[0]) == 2.0

    def test_empty_total(self):
        assert graph_total_length(RoadGraph()) == 0.0


class TestShortestPath:
    def test_same_vertex(self, chain):
        assert shortest_path(chain, 1, 1) == []

    def test_prefers_shorter_route(self):
        # two routes 0 -> 3: via 1 is 50 m, via 2 is 80 m
        g = build_graph({0: (0, 0), 1: (25, 0), 2: (0, 40), 3: (50, 0)},
                        [(0, 2, [(0, 0), (0, 40)]), (2, 3, [(0, 40), (50, 0)]), (0, 1), (1, 3)])
        path = shortest_path(g, 0, 3)
        assert path_length(g, path) == pytest.approx(50.0)
        lengths = [path_length(g, p) for p in all_simple_paths(g, 0, 3)]
        assert sorted(lengths) == pytest.approx([50.0, 40.0 + math.hypot(50, 40)])

    def test_filter_blocks(self, chain):
        assert shortest_path(chain, 0, 2, lambda e: e.id != 1) is None

    def test_tie_break_lexicographic(self):
        # two equal 20 m routes: edges (0,1)->(1,3) ids 2,3 vs (0,2)->(2,3) ids 0,1
        g = build_graph({0: (0, 0), 1: (10, 5), 2: (10, -5), 3: (20, 0)},
                        [(0, 2), (2, 3), (0, 1), (1, 3)])
        assert shortest_path(g, 0, 3) == [0, 1]

    def test_unknown_vertex(self, chain):
        with pytest.raises(GraphError):
            shortest_path(chain, 0, 99)


@st.composite
def small_graphs(draw):
    n = draw(st.integers(2, 8))
    coords = draw(st.lists(st.tuples(st.integers(0, 40), st.integers(0, 40)),
                           min_size=n, max_size=n, unique=True))
    g = RoadGraph()
    for i, c in enumerate(coords):
        g.add_vertex(c, i)
    pairs = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=20))
    for a, b in pairs:
        if a != b:
            g.add_edge(a, b)
    return g


@settings(max_examples=150, deadline=None)
@given(small_graphs(), st.data())
def test_shortest_path_matches_enumeration(g, data):
    src = data.draw(st.sampled_from(sorted(g.vertices)))
    dst = data.draw(st.sampled_from(sorted(g.vertices)))
    found = shortest_path(g, src, dst)
    candidates = list(all_simple_paths(g, src, dst))
    if not candidates:
        assert found is None
        return
    best = min(path_length(g, p) for p in candidates)
    assert path_length(g, found) == pytest.approx(best)
    assert found in candidates


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["add", "remove", "drop"]),
                          st.integers(0, 6), st.integers(0, 6)), max_size=40))
def test_invariants_under_random_mutation(ops):
    g = RoadGraph()
    for i in range(7):
        g.add_vertex((i * 10.0, (i % 3) * 7.0), i)
    for op, a, b in ops:
        if op == "add" and a != b and a in g.vertices and b in g.vertices:
            g.add_edge(a, b)
        elif op == "remove":
            eid = g.edge_between(a, b)
            if eid is not None:
                g.remove_edge(eid)
        elif op == "drop" and a in g.vertices and a != b:
            g.remove_vertex(a)
        g.check()


def test_geojson_round_trip_is_byte_identical(four_way_graph):
    four_way_graph.add_edge(4, 1, [(0, 0), (5, 30), (0, 60)])
    text = dumps(to_geojson(four_way_graph))
    again = dumps(to_geojson(graph_from_geojson(json.loads(text))))
    assert again == text


def test_geojson_without_vertex_features(chain):
    data = to_geojson(chain, include_vertices=False)
    g = graph_from_geojson(data)
    assert sorted(g.vertices) == [0, 1, 2]
    assert g.position(1) == (100.0, 0.0)


def test_geojson_feature_properties(chain):
    feats = to_geojson(chain)["features"]
    edge = feats[0]
    assert edge["geometry"]["type"] == "LineString"
    assert set(edge["properties"]) >= {"id", "from", "to", "support"}
