import math

import pytest

from haulmap import PipelineConfig, RoadGraph
from haulmap.trace import GpsPoint, RawTrace, derive_kinematics


@pytest.fixture
def cfg():
    return PipelineConfig.default()


def straight_trace(n, step=12.0, dt=6.0, truck="A", t0=0.0, heading=0.0):
    pts = [GpsPoint(truck, t0 + i * dt, i * step * math.cos(heading), i * step * math.sin(heading))
           for i in range(n)]
    return derive_kinematics(RawTrace(truck, pts))


def build_graph(positions, edges):
    """positions: {vid: (x, y)}; edges: [(u, v)] or [(u, v, polyline)]."""
    g = RoadGraph()
    for vid, pos in positions.items():
        g.add_vertex(pos, vid)
    for item in edges:
        if len(item) == 2:
            g.add_edge(*item)
        else:
            g.add_edge(item[0], item[1], item[2])
    return g


def all_simple_paths(graph, src, dst, allowed=None):
    """Brute-force DFS over simple paths; yields edge-id lists."""
    if src == dst:
        yield []
        return
    stack = [(src, [], {src})]
    while stack:
        v, path, seen = stack.pop()
        for eid in graph.out_edges(v):
            if allowed is not None and eid not in allowed:
                continue
            w = graph.edges[eid].target
            if w == dst:
                yield path + [eid]
            elif w not in seen:
                stack.append((w, path + [eid], seen | {w}))


def brute_reachable(graph, src, allowed=None):
    seen = {src}
    changed = True
    while changed:
        changed = False
        for eid, e in graph.edges.items():
            if allowed is not None and eid not in allowed:
                continue
            if e.source in seen and e.target not in seen:
                seen.add(e.target)
                changed = True
    return seen


@pytest.fixture
def y_split():
    # a -> v, v -> b, v -> c
    return build_graph({0: (-50, 0), 1: (0, 0), 2: (50, 30), 3: (50, -30)},
                       [(0, 1), (1, 2), (1, 3)])


@pytest.fixture
def y_merge():
    return build_graph({0: (-50, 30), 1: (-50, -30), 2: (0, 0), 3: (50, 0)},
                       [(0, 2), (1, 2), (2, 3)])


@pytest.fixture
def chain():
    return build_graph({0: (0, 0), 1: (100, 0), 2: (200, 0)}, [(0, 1), (1, 2)])


@pytest.fixture
def four_way_graph():
    # centre 4 with two arms in and two arms out
    return build_graph({0: (-60, 0), 1: (0, 60), 2: (60, 0), 3: (0, -60), 4: (0, 0)},
                       [(0, 4), (1, 4), (4, 2), (4, 3)])


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    def record(number, title, ok, detail=""):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
