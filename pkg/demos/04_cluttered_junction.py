"""A 4-way junction with cross-lane clutter: marking keeps only entry-to-exit shortest paths."""

from shapely.geometry import Point

from haulmap import PipelineConfig
from haulmap.areas import classify_nodes, connection_pairs, mark_areas
from haulmap.synth import four_way_with_clutter

cfg = PipelineConfig.default()
graph, clutter = four_way_with_clutter()
print(f"{len(graph.edges)} edges, of which clutter: {clutter}")

marked = mark_areas(graph, cfg)
print(f"{marked.rounds} rounds; per round:")
for step in marked.history:
    print("  ", step)

(junction,) = [a for a in marked.areas if a.polygon.contains(Point(0, 0))]
cls = classify_nodes(marked.graph, [a.polygon for a in marked.areas])
pairs = connection_pairs(marked.graph, junction, cls.membership, cfg)
print(f"junction area: {len(junction.entry_nodes)} entries, {len(junction.exit_nodes)} exits, "
      f"{len(pairs)} movements kept (U-turn pairs skipped)")
print("clutter left:", sorted(set(clutter) & set(marked.graph.edges)) or "none")
