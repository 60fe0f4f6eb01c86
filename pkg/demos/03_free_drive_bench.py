"""Area marking on a free-drive bench: random wander trips collapse to the access road."""

from haulmap import PipelineConfig
from haulmap.areas import edges_inside, mark_areas, place_markers
from haulmap.inference import infer_graph
from haulmap.synth import generate_trips, library_scenario
from haulmap.trace import segment_all

cfg = PipelineConfig.default()
scenario = library_scenario("bench")
graph = infer_graph(segment_all(generate_trips(scenario), cfg), cfg)
print(f"inferred graph: {len(graph.edges)} edges, {graph.total_length():.0f} m")

markers = place_markers(graph, cfg)
rules = {}
for m in markers:
    rules[m.rule] = rules.get(m.rule, 0) + 1
print("markers:", rules)

marked = mark_areas(graph, cfg)
print(f"converged after {marked.rounds} round(s) with {len(marked.areas)} area(s)")
for step in marked.history:
    print("  ", step)

for i, area in enumerate(marked.areas):
    inside_before = sum(graph.edges[e].length for e in edges_inside(graph, area.polygon))
    inside_after = sum(marked.graph.edges[e].length for e in edges_inside(marked.graph, area.polygon))
    print(f"area {i}: {area.polygon.area:8.0f} m2, entries {sorted(area.entry_nodes)}, "
          f"exits {sorted(area.exit_nodes)}, road inside {inside_before:.0f} -> {inside_after:.0f} m")
print(f"marked graph: {len(marked.graph.edges)} edges, {marked.graph.total_length():.0f} m")
