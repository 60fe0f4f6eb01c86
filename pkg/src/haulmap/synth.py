"""Synthetic haul-road scenarios and graph-quality metrics.

A scenario is a set of directed lane polylines, trip plans that drive
chains of lanes at constant speed, and a GPS noise model. Lanes marked
``ground_truth=False`` (free-drive wander paths) are driven but not
scored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigError, parse_key_values, parse_quantity
from .graph import RoadGraph
from .trace import GpsPoint, RawTrace

LANE_SEPARATION = 15.0


@dataclass
class Lane:
    name: str
    points: np.ndarray
    ground_truth: bool = True

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[0] < 2 or self.points.shape[1] != 2:
            raise ValueError(f"lane {self.name!r} needs an (n>=2, 2) point array")
        if self.length <= 0:
            raise ValueError(f"lane {self.name!r} has zero length")

    @property
    def length(self) -> float:
        return float(np.sum(np.hypot(*np.diff(self.points, axis=0).T)))


@dataclass
class TripPlan:
    lanes: list[str]
    speed: float


@dataclass
class Scenario:
    name: str
    lanes: list[Lane]
    plans: list[TripPlan]
    noise_sigma: float = 1.0
    sample_period: float = 6.0
    rng_seed: int = 0
    # axis-aligned free-drive boxes (xmin, ymin, xmax, ymax)
    free_zones: list[tuple[float, float, float, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.sample_period <= 0:
            raise ValueError("sample_period must be > 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        names = {lane.name for lane in self.lanes}
        for plan in self.plans:
            missing = [n for n in plan.lanes if n not in names]
            if missing:
                raise ValueError(f"trip plan references unknown lanes {missing}")
            if plan.speed <= 0:
                raise ValueError("trip speed must be > 0")

    def lane(self, name: str) -> Lane:
        for lane in self.lanes:
            if lane.name == name:
                return lane
        raise KeyError(name)

    @property
    def truth(self) -> list[Lane]:
        return [lane for lane in self.lanes if lane.ground_truth]


# -- trip generation -------------------------------------------------------

def _chain(lanes: list[Lane]) -> np.ndarray:
    pts = [lanes[0].points]
    for lane in lanes[1:]:
        nxt = lane.points
        if np.allclose(pts[-1][-1], nxt[0]):
            nxt = nxt[1:]
        pts.append(nxt)
    return np.vstack(pts)


def sample_polyline(points: np.ndarray, step: float) -> np.ndarray:
    """Points every ``step`` metres of arc length, starting at the first vertex."""
    seg = np.hypot(*np.diff(points, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    n = int(math.floor(cum[-1] / step + 1e-9))
    s = np.arange(n + 1) * step
    x = np.interp(s, cum, points[:, 0])
    y = np.interp(s, cum, points[:, 1])
    return np.column_stack([x, y])


def generate_trips(scenario: Scenario, start_time: float = 0.0) -> list[RawTrace]:
    """One raw trace per trip plan, in plan order.

    Each plan is driven at constant speed from the first lane's start and
    sampled every ``sample_period`` seconds with isotropic Gaussian noise.
    Plans start an hour apart so traces never overlap in time.
    """
    rng = np.random.default_rng(scenario.rng_seed)
    traces = []
    width = max(3, len(str(len(scenario.plans))))
    for i, plan in enumerate(scenario.plans):
        path = _chain([scenario.lane(n) for n in plan.lanes])
        clean = sample_polyline(path, plan.speed * scenario.sample_period)
        noisy = clean + rng.normal(0.0, scenario.noise_sigma, clean.shape) if scenario.noise_sigma else clean
        truck = f"T{i:0{width}d}"
        t0 = start_time + 3600.0 * i
        pts = [GpsPoint(truck, t0 + k * scenario.sample_period, float(x), float(y))
               for k, (x, y) in enumerate(noisy)]
        traces.append(RawTrace(truck, pts))
    return traces


# -- metrics ---------------------------------------------------------------

def _segments(polylines) -> tuple[np.ndarray, np.ndarray]:
    a, b = [], []
    for pts in polylines:
        pts = np.asarray(pts, dtype=float)
        a.append(pts[:-1])
        b.append(pts[1:])
    if not a:
        return np.empty((0, 2)), np.empty((0, 2))
    return np.vstack(a), np.vstack(b)


def _nearest_distance(points: np.ndarray, seg_a: np.ndarray, seg_b: np.ndarray,
                      chunk: int = 2048) -> np.ndarray:
    if len(seg_a) == 0:
        return np.full(len(points), np.inf)
    d = seg_b - seg_a
    len2 = np.maximum(np.einsum("ij,ij->i", d, d), 1e-18)
    out = np.empty(len(points))
    for start in range(0, len(points), chunk):
        p = points[start:start + chunk, None, :]
        t = np.clip(np.einsum("pij,ij->pi", p - seg_a, d) / len2, 0.0, 1.0)
        proj = seg_a + t[..., None] * d
        out[start:start + chunk] = np.sqrt(((p - proj) ** 2).sum(axis=-1)).min(axis=1)
    return out


def _densify(polylines, step: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Sample points and the length each sample stands for."""
    pts, weights = [], []
    for line in polylines:
        line = np.asarray(line, dtype=float)
        for a, b in zip(line[:-1], line[1:]):
            seg = float(np.hypot(*(b - a)))
            if seg == 0:
                continue
            n = max(1, int(math.ceil(seg / step)))
            t = (np.arange(n) + 0.5) / n
            pts.append(a + t[:, None] * (b - a))
            weights.append(np.full(n, seg / n))
    if not pts:
        return np.empty((0, 2)), np.empty(0)
    return np.vstack(pts), np.concatenate(weights)


@dataclass
class Metrics:
    coverage_fraction: float
    precision_fraction: float
    mean_offset: float | None

    def as_dict(self) -> dict:
        return {"coverage_fraction": self.coverage_fraction,
                "precision_fraction": self.precision_fraction,
                "mean_offset": self.mean_offset}


def evaluate_polylines(inferred, truth, tolerance: float, step: float = 1.0) -> Metrics:
    truth_pts, truth_w = _densify(truth, step)
    inf_pts, inf_w = _densify(inferred, step)
    if len(inf_pts) == 0:
        return Metrics(0.0, 1.0, None)
    t_a, t_b = _segments(truth)
    i_a, i_b = _segments(inferred)
    to_inferred = _nearest_distance(truth_pts, i_a, i_b)
    to_truth = _nearest_distance(inf_pts, t_a, t_b)
    coverage = float(truth_w[to_inferred <= tolerance].sum() / truth_w.sum()) if len(truth_w) else 0.0
    precision = float(inf_w[to_truth <= tolerance].sum() / inf_w.sum())
    offset = float((to_truth * inf_w).sum() / inf_w.sum())
    return Metrics(coverage, precision, offset)


def evaluate(graph: RoadGraph, scenario: Scenario, tolerance: float, step: float = 1.0) -> Metrics:
    """Length-weighted coverage, precision and mean offset against lanes.

    Inferred edges inside a free-drive zone are left out of precision and
    offset, since those zones have no ground-truth roads.
    """
    lines = [e.polyline for _, e in sorted(graph.edges.items())]
    if scenario.free_zones:
        lines = [ln for ln in lines if not _inside_zones(ln, scenario.free_zones)]
        if not lines and graph.edges:
            return Metrics(0.0, 1.0, None)
    return evaluate_polylines(lines, [lane.points for lane in scenario.truth], tolerance, step)


def _inside_zones(line, zones) -> bool:
    pts = np.asarray(line, dtype=float)
    for xmin, ymin, xmax, ymax in zones:
        if np.all((pts[:, 0] >= xmin) & (pts[:, 0] <= xmax) & (pts[:, 1] >= ymin) & (pts[:, 1] <= ymax)):
            return True
    return False


def truth_graph(scenario: Scenario, merge_tolerance: float = 1e-6) -> RoadGraph:
    """Ground-truth lanes as a graph: one edge per lane, shared endpoints merged."""
    graph = RoadGraph()
    index: list[tuple[tuple[float, float], int]] = []

    def vertex(p) -> int:
        for q, vid in index:
            if math.hypot(q[0] - p[0], q[1] - p[1]) <= merge_tolerance:
                return vid
        vid = graph.add_vertex((float(p[0]), float(p[1])))
        index.append(((float(p[0]), float(p[1])), vid))
        return vid

    for lane in scenario.lanes:
        a, b = vertex(lane.points[0]), vertex(lane.points[-1])
        graph.add_edge(a, b, [tuple(p) for p in lane.points])
    return graph


# -- scenario library ------------------------------------------------------

def _line(*pts) -> np.ndarray:
    return np.array(pts, dtype=float)


def _arc(cx, cy, r, a0, a1, n=24) -> np.ndarray:
    t = np.linspace(a0, a1, n + 1)
    return np.column_stack([cx + r * np.cos(t), cy + r * np.sin(t)])


def _speeds(rng, n, lo=7.0, hi=10.0) -> list[float]:
    return [float(v) for v in rng.uniform(lo, hi, n)]


def straight_road(n_trips: int = 50, seed: int = 1, noise_sigma: float = 1.0,
                  length: float = 1000.0, separation: float = LANE_SEPARATION) -> Scenario:
    """Two opposite lanes of a straight road."""
    h = separation / 2
    lanes = [Lane("east", _line((0, -h), (length, -h))),
             Lane("west", _line((length, h), (0, h)))]
    rng = np.random.default_rng(seed + 1000)
    plans = [TripPlan(["east" if i % 2 == 0 else "west"], s)
             for i, s in enumerate(_speeds(rng, n_trips))]
    return Scenario("straight", lanes, plans, noise_sigma, rng_seed=seed)


def loop_road(n_trips: int = 40, seed: int = 2, noise_sigma: float = 1.0,
              radius: float = 250.0, spur: float = 400.0) -> Scenario:
    """Two-lane ring road reached by two-lane spurs from west and east."""
    h = LANE_SEPARATION / 2
    ro, ri = radius + h, radius - h
    # outer lane runs counter-clockwise, inner lane clockwise
    lanes = [
        Lane("ring_ccw_n", _arc(0, 0, ro, 0.0, math.pi)),
        Lane("ring_ccw_s", _arc(0, 0, ro, math.pi, 2 * math.pi)),
        Lane("ring_cw_n", _arc(0, 0, ri, math.pi, 0.0)),
        Lane("ring_cw_s", _arc(0, 0, ri, 2 * math.pi, math.pi)),
        Lane("west_in", _line((-ro - spur, -h), (-ro, -h))),
        Lane("west_out", _line((-ro, h), (-ro - spur, h))),
        Lane("east_in", _line((ro + spur, h), (ro, h))),
        Lane("east_out", _line((ro, -h), (ro + spur, -h))),
    ]
    routes = [
        ["west_in", "ring_ccw_s", "east_out"],
        ["east_in", "ring_ccw_n", "west_out"],
        ["west_in", "ring_cw_n", "east_out"],
        ["east_in", "ring_cw_s", "west_out"],
    ]
    rng = np.random.default_rng(seed + 1000)
    plans = [TripPlan(routes[i % len(routes)], s) for i, s in enumerate(_speeds(rng, n_trips))]
    return Scenario("loop", lanes, plans, noise_sigma, rng_seed=seed)


def y_merge(n_trips: int = 40, seed: int = 3, noise_sigma: float = 1.0) -> Scenario:
    """Two one-way branches merging into a trunk road."""
    lanes = [Lane("north_branch", _line((-500, 300), (0, 0))),
             Lane("south_branch", _line((-500, -300), (0, 0))),
             Lane("trunk", _line((0, 0), (600, 0)))]
    rng = np.random.default_rng(seed + 1000)
    plans = [TripPlan(["north_branch" if i % 2 == 0 else "south_branch", "trunk"], s)
             for i, s in enumerate(_speeds(rng, n_trips))]
    return Scenario("y_merge", lanes, plans, noise_sigma, rng_seed=seed)


def four_way(n_trips: int = 96, seed: int = 4, noise_sigma: float = 1.0,
             arm: float = 400.0) -> Scenario:
    """Crossing of two two-lane roads with straight, left and right movements."""
    h = LANE_SEPARATION / 2
    c = 2 * h  # half-size of the junction box
    lanes = []
    # arm k points along direction k*90deg; inbound lane approaches the centre
    for k, name in enumerate(("e", "n", "w", "s")):
        ux, uy = math.cos(k * math.pi / 2), math.sin(k * math.pi / 2)
        px, py = -uy, ux  # left normal of the outward direction
        far, near = arm + c, c
        lanes.append(Lane(f"{name}_in", _line((far * ux + h * px, far * uy + h * py),
                                               (near * ux + h * px, near * uy + h * py))))
        lanes.append(Lane(f"{name}_out", _line((near * ux - h * px, near * uy - h * py),
                                                (far * ux - h * px, far * uy - h * py))))
    names = ("e", "n", "w", "s")
    turns = []
    for k, src in enumerate(names):
        start = lanes[2 * k].points[-1]
        for off in (1, 2, 3):  # left turn, straight, right turn
            dst = names[(k + off) % 4]
            end = lanes[2 * names.index(dst) + 1].points[0]
            if off == 2:
                pts = _line(start, end)
            else:
                corner_k = (k + off) % 4
                ux, uy = math.cos(corner_k * math.pi / 2), math.sin(corner_k * math.pi / 2)
                mid = ((start[0] + end[0]) / 2 - 0.3 * c * ux, (start[1] + end[1]) / 2 - 0.3 * c * uy)
                pts = _line(start, mid, end)
            lanes.append(Lane(f"{src}_to_{dst}", pts))
            turns.append((f"{src}_in", f"{src}_to_{dst}", f"{dst}_out"))
    rng = np.random.default_rng(seed + 1000)
    plans = [TripPlan(list(turns[i % len(turns)]), s) for i, s in enumerate(_speeds(rng, n_trips))]
    return Scenario("four_way", lanes, plans, noise_sigma, rng_seed=seed)


def bench(n_wander: int = 20, n_haul: int = 10, seed: int = 5, noise_sigma: float = 1.0,
          size: float = 100.0, access: float = 600.0) -> Scenario:
    """Two-lane access road ending in a square free-drive bench.

    Wander trips drive in, meander between random waypoints on the bench
    and drive back out.
    """
    h = LANE_SEPARATION / 2
    x0 = access
    lanes = [Lane("access_in", _line((0, -h), (x0, -h))),
             Lane("access_out", _line((x0, h), (0, h)))]
    rng = np.random.default_rng(seed + 1000)
    plans = []
    for i in range(n_wander):
        k = int(rng.integers(3, 6))
        way = rng.uniform([x0 + 5, -size / 2 + 5], [x0 + size - 5, size / 2 - 5], size=(k, 2))
        pts = np.vstack([[x0, -h], way, [x0, h]])
        lanes.append(Lane(f"wander{i:02d}", pts, ground_truth=False))
        plans.append(TripPlan(["access_in", f"wander{i:02d}", "access_out"], float(rng.uniform(4.0, 6.0))))
    # plain haul trips that turn round at the bench edge
    lanes.append(Lane("turnaround", _line((x0, -h), (x0 + 10, 0), (x0, h)), ground_truth=False))
    for s in _speeds(rng, n_haul):
        plans.append(TripPlan(["access_in", "turnaround", "access_out"], s))
    zones = [(x0, -size / 2, x0 + size, size / 2)]
    return Scenario("bench", lanes, plans, noise_sigma, rng_seed=seed, free_zones=zones)


LIBRARY = {
    "straight": straight_road,
    "loop": loop_road,
    "y_merge": y_merge,
    "four_way": four_way,
    "bench": bench,
}


def library_scenario(name: str, **kwargs) -> Scenario:
    try:
        factory = LIBRARY[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; choose from {sorted(LIBRARY)}") from None
    return factory(**kwargs)


# -- scenario files --------------------------------------------------------

def scenario_from_text(text: str) -> Scenario:
    """Build a scenario from ``key = value`` lines.

    Either ``library = <name>`` (with optional ``seed``, ``noise_sigma``,
    ``trips``) or explicit ``lane.<name> = x y, x y, ...`` and
    ``trip.<n> = lane lane ... @ speed`` entries. ``sample_period`` applies
    to both forms.
    """
    values = parse_key_values(text)
    try:
        seed = int(values["seed"]) if "seed" in values else None
        values.pop("seed", None)
    except ValueError:
        raise ConfigError(f"seed must be an integer, got {values['seed']!r}") from None
    period = parse_quantity(values.pop("sample_period", "6"))
    sigma = parse_quantity(values.pop("noise_sigma", "1"))
    if "library" in values:
        name = values.pop("library")
        kwargs = {"noise_sigma": sigma}
        if seed is not None:
            kwargs["seed"] = seed
        if "trips" in values:
            key = "n_wander" if name == "bench" else "n_trips"
            kwargs[key] = int(values.pop("trips"))
        if values:
            raise ConfigError(f"unknown scenario keys {sorted(values)}")
        sc = library_scenario(name, **kwargs)
        sc.sample_period = period
        return sc

    lanes, plans = [], []
    name = values.pop("name", "custom")
    for key in list(values):
        if key.startswith("lane."):
            raw = values.pop(key)
            try:
                pts = [tuple(float(v) for v in pair.split()) for pair in raw.split(",")]
            except ValueError:
                raise ConfigError(f"bad lane coordinates for {key}") from None
            lanes.append(Lane(key[5:], pts))
    for key in sorted((k for k in values if k.startswith("trip.")), key=lambda k: int(k[5:])):
        raw = values.pop(key)
        if "@" not in raw:
            raise ConfigError(f"{key}: expected 'lane ... @ speed'")
        route, speed = raw.rsplit("@", 1)
        plans.append(TripPlan(route.split(), parse_quantity(speed)))
    if values:
        raise ConfigError(f"unknown scenario keys {sorted(values)}")
    if not lanes:
        raise ConfigError("scenario defines no lanes")
    try:
        return Scenario(name, lanes, plans, sigma, period, seed or 0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_scenario(path) -> Scenario:
    return scenario_from_text(Path(path).read_text())


def four_way_with_clutter(seed: int = 4) -> tuple[RoadGraph, list[int]]:
    """Ground-truth 4-way junction graph plus six cross-lane clutter edges.

    Four clutter edges jump from each arm's outbound lane back to its
    inbound lane; two cut diagonally between arms, one of them bowing out
    well past the junction. Returns the graph and the clutter edge ids.
    """
    sc = four_way(seed=seed)
    graph = truth_graph(sc)

    def vertex_at(p) -> int:
        for vid, v in graph.vertices.items():
            if math.hypot(v.position[0] - p[0], v.position[1] - p[1]) < 1e-6:
                return vid
        raise KeyError(p)

    inbound_end = {n: vertex_at(sc.lane(f"{n}_in").points[-1]) for n in "enws"}
    outbound_start = {n: vertex_at(sc.lane(f"{n}_out").points[0]) for n in "enws"}
    clutter = []
    for n in "enws":
        clutter.append(graph.add_edge(outbound_start[n], inbound_end[n]))
    clutter.append(graph.add_edge(outbound_start["e"], inbound_end["n"]))
    a, b = graph.position(outbound_start["w"]), graph.position(inbound_end["s"])
    bow = (-60.0, -60.0)
    clutter.append(graph.add_edge(outbound_start["w"], inbound_end["s"], [a, bow, b]))
    return graph, clutter
