import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from haulmap.config import ConfigError
from haulmap.graph import RoadGraph
from haulmap.inference import infer_graph
from haulmap.synth import (LIBRARY, Lane, Scenario, TripPlan, evaluate, evaluate_polylines,
                           generate_trips, library_scenario, scenario_from_text, truth_graph)
from haulmap.trace import segment_all

from conftest import build_graph


def one_lane(length=120.0, speed=2.0, sigma=0.0, n=1, seed=0):
    lane = Lane("a", [(0, 0), (length, 0)])
    return Scenario("one", [lane], [TripPlan(["a"], speed)] * n, sigma, rng_seed=seed)


class TestGenerate:
    def test_noise_free_sampling(self):
        (trace,) = generate_trips(one_lane())
        xs = [p.x for p in trace.points]
        assert len(xs) == 11
        assert np.allclose(np.diff(xs), 12.0)
        assert all(p.y == 0 for p in trace.points)
        assert np.allclose(np.diff([p.timestamp for p in trace.points]), 6.0)

    def test_same_seed_same_output(self):
        a = generate_trips(one_lane(sigma=2.0, n=3, seed=9))
        b = generate_trips(one_lane(sigma=2.0, n=3, seed=9))
        assert [t.points for t in a] == [t.points for t in b]
        c = generate_trips(one_lane(sigma=2.0, n=3, seed=10))
        assert [t.points for t in a] != [t.points for t in c]

    def test_no_plans(self):
        sc = Scenario("none", [Lane("a", [(0, 0), (1, 0)])], [])
        assert generate_trips(sc) == []

    def test_traces_do_not_overlap_in_time(self):
        traces = generate_trips(library_scenario("y_merge"))
        spans = sorted((t.points[0].timestamp, t.points[-1].timestamp) for t in traces)
        assert all(a[1] < b[0] for a, b in zip(spans, spans[1:]))

    def test_bad_scenarios(self):
        with pytest.raises(ValueError):
            Lane("z", [(1, 1), (1, 1)])
        with pytest.raises(ValueError):
            Scenario("x", [Lane("a", [(0, 0), (1, 0)])], [TripPlan(["b"], 1.0)])


class TestEvaluate:
    def test_identical(self):
        sc = library_scenario("y_merge")
        m = evaluate(truth_graph(sc), sc, 10.0)
        assert (m.coverage_fraction, m.precision_fraction) == pytest.approx((1.0, 1.0))
        assert m.mean_offset == pytest.approx(0.0, abs=1e-9)

    def test_half_the_lanes(self):
        sc = one_lane(length=1000.0)
        g = build_graph({0: (0, 0), 1: (500, 0)}, [(0, 1)])
        m = evaluate(g, sc, 1.0)
        assert m.coverage_fraction == pytest.approx(0.5, abs=0.02)
        assert m.precision_fraction == 1.0

    def test_spurious_edge(self):
        sc = one_lane(length=900.0)
        g = build_graph({0: (0, 0), 1: (900, 0), 2: (0, 5000), 3: (100, 5000)}, [(0, 1), (2, 3)])
        assert evaluate(g, sc, 10.0).precision_fraction == pytest.approx(0.9, abs=1e-3)

    def test_empty_graph(self):
        m = evaluate(RoadGraph(), one_lane(), 10.0)
        assert (m.coverage_fraction, m.precision_fraction, m.mean_offset) == (0.0, 1.0, None)


lines = st.lists(st.tuples(st.floats(-200, 200), st.floats(-200, 200)), min_size=2, max_size=5)


@settings(max_examples=80, deadline=None)
@given(st.lists(lines, min_size=1, max_size=3), st.lists(lines, min_size=1, max_size=3),
       st.floats(0.5, 50))
def test_metrics_are_bounded(inferred, truth, tol):
    m = evaluate_polylines(inferred, truth, tol)
    assert 0.0 <= m.coverage_fraction <= 1.0
    assert 0.0 <= m.precision_fraction <= 1.0
    if m.precision_fraction == 1.0 and m.mean_offset is not None:
        assert m.mean_offset <= tol + 1e-9


class TestScenarioFiles:
    def test_library_reference(self):
        sc = scenario_from_text("library = straight\ntrips = 4\nnoise_sigma = 0\n")
        assert len(sc.plans) == 4 and sc.noise_sigma == 0
        assert sc.rng_seed == library_scenario("straight").rng_seed

    def test_explicit_lanes(self):
        sc = scenario_from_text(
            "name = ramp\nseed = 3\nsample_period = 5\n"
            "lane.up = 0 0, 100 0, 200 50\nlane.down = 200 60, 0 10\n"
            "trip.1 = up @ 8\ntrip.2 = down @ 36 kph\n")
        assert sc.name == "ramp" and sc.rng_seed == 3 and sc.sample_period == 5
        assert [lane.name for lane in sc.lanes] == ["up", "down"]
        assert sc.plans[1].speed == pytest.approx(10.0)

    @pytest.mark.parametrize("text", [
        "lane.a = 0 0, 1\n",
        "lane.a = 0 0, 1 1\ntrip.1 = a 5\n",
        "lane.a = 0 0, 1 1\ntrip.1 = b @ 5\n",
        "lane.a = 0 0, 1 1\ncolour = red\n",
        "library = straight\nseed = x\n",
        "trip.1 = a @ 5\n",
    ])
    def test_rejects(self, text):
        with pytest.raises((ConfigError, ValueError)):
            scenario_from_text(text)

    def test_unknown_library(self):
        with pytest.raises(KeyError):
            scenario_from_text("library = moon\n")


@pytest.mark.parametrize("name", sorted(LIBRARY))
def test_library_scenarios_build(name):
    sc = library_scenario(name)
    assert sc.plans and all(lane.length > 0 for lane in sc.lanes)
    truth_graph(sc).check()


def test_noise_free_round_trip(cfg):
    sc = one_lane(length=600.0, speed=8.0, n=6)
    trips = segment_all(generate_trips(sc), cfg)
    g = infer_graph(trips, cfg)
    assert evaluate(g, sc, 10.0).coverage_fraction >= 0.95
