"""Haul-road network inference from truck GPS logs, with free-drive area marking."""

from .config import ConfigError, PipelineConfig
from .graph import Edge, RoadGraph, Vertex, graph_total_length, shortest_path
from .trace import GpsPoint, RawTrace, Trip, derive_kinematics, load_points, segment_trips

__version__ = "0.1.0"
