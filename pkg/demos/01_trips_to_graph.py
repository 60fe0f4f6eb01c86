"""From raw GPS fixes to a directed road graph on a two-lane straight road."""

from haulmap import PipelineConfig
from haulmap.inference import cluster_points, infer_graph
from haulmap.synth import evaluate, generate_trips, straight_road
from haulmap.trace import segment_all

cfg = PipelineConfig.default()

# 50 synthetic trucks, alternating direction, 1 m GPS noise, one fix every 6 s
scenario = straight_road(n_trips=50)
traces = generate_trips(scenario)
print(f"{len(traces)} traces, {sum(len(t.points) for t in traces)} fixes")

trips = segment_all(traces, cfg)
print(f"{len(trips)} trips after segmentation, first one is {trips[0].length():.0f} m long")

# heading keeps the two lanes apart even though they are only 15 m apart
clusters, _ = cluster_points(trips, cfg)
print(f"{len(clusters)} clusters")

graph = infer_graph(trips, cfg)
print(f"graph: {len(graph.vertices)} vertices, {len(graph.edges)} edges, "
      f"{graph.total_length():.0f} m of road")

m = evaluate(graph, scenario, tolerance=10.0)
print(f"coverage {m.coverage_fraction:.3f}  precision {m.precision_fraction:.3f}  "
      f"mean offset {m.mean_offset:.2f} m")
