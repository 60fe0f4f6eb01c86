"""Planar polygon kernel on top of shapely.

All polygon outputs are normalised: exterior counter-clockwise, holes
clockwise, valid, and free of slivers below ``SLIVER_AREA``.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np
import shapely
from shapely.geometry import LineString, MultiPolygon, Point, Polygon
from shapely.geometry.base import BaseGeometry
from shapely.geometry.polygon import orient
from shapely.ops import unary_union

SNAP_GRID = 1e-9
SLIVER_AREA = 1e-6


def make_sector(apex, direction: float, radius: float, angle: float,
                arc_segments: int = 16) -> Polygon:
    """Filled circular sector with an inscribed polygonal arc.

    The bisector points along ``direction``; the arc spans ``angle``
    radians and is cut into ``arc_segments`` chords.
    """
    if radius <= 0 or not 0 < angle <= math.pi or arc_segments < 2:
        raise ValueError("need radius > 0, 0 < angle <= pi, arc_segments >= 2")
    ax, ay = float(apex[0]), float(apex[1])
    start = direction - angle / 2.0
    step = angle / arc_segments
    ring = [(ax, ay)]
    for k in range(arc_segments + 1):
        t = start + k * step
        ring.append((ax + radius * math.cos(t), ay + radius * math.sin(t)))
    return orient(Polygon(ring), 1.0)


def polygons_of(geom: BaseGeometry | None) -> list[Polygon]:
    """Flatten any geometry into its non-sliver polygon parts."""
    if geom is None or geom.is_empty:
        return []
    if isinstance(geom, Polygon):
        parts = [geom]
    elif hasattr(geom, "geoms"):
        parts = [p for g in geom.geoms for p in polygons_of(g)]
    else:
        return []
    return [orient(p, 1.0) for p in parts if p.area >= SLIVER_AREA]


def _clean(geom: BaseGeometry) -> MultiPolygon:
    if not geom.is_valid:
        geom = shapely.make_valid(geom)
    parts = polygons_of(geom)
    parts.sort(key=lambda p: (p.bounds, p.area))
    return MultiPolygon(parts)


def union(polygons: Iterable[BaseGeometry]) -> MultiPolygon:
    """Boolean union; zero-area inputs are ignored."""
    parts = [p for g in polygons for p in polygons_of(g)]
    if not parts:
        return MultiPolygon()
    return _clean(shapely.union_all(parts, grid_size=SNAP_GRID))


def buffer(geom: BaseGeometry, distance: float, arc_segments: int = 16) -> MultiPolygon:
    """Round-joined Minkowski dilation (d > 0) or erosion (d < 0).

    Dilation arcs circumscribe the true disk so that a closing with equal
    distances never cuts into the original shape.
    """
    if not math.isfinite(distance):
        raise ValueError("buffer distance must be finite")
    if geom.is_empty:
        return MultiPolygon()
    if distance > 0:
        distance /= math.cos(math.pi / (4 * arc_segments))
    # snap first: near-duplicate vertices can make GEOS drop a corner
    with np.errstate(divide="ignore", invalid="ignore"):
        geom = shapely.set_precision(geom, SNAP_GRID)
    return _clean(geom.buffer(distance, quad_segs=arc_segments))


def close(geom: BaseGeometry, dilate: float, erode: float, arc_segments: int = 16) -> MultiPolygon:
    """Dilate then erode the geometry as a whole."""
    return buffer(buffer(geom, dilate, arc_segments), -erode, arc_segments)


def buffer_polyline(line: Sequence, distance: float, arc_segments: int = 16) -> Polygon:
    """Corridor of half-width ``distance`` with round caps and joins."""
    if len(line) < 2 or distance <= 0:
        raise ValueError("need at least two points and a positive distance")
    parts = polygons_of(LineString(line).buffer(distance, quad_segs=arc_segments))
    return parts[0] if len(parts) == 1 else _clean(unary_union(parts)).geoms[0]


def fill_holes(poly: Polygon) -> Polygon:
    return orient(Polygon(poly.exterior), 1.0)


def covers(region: BaseGeometry, geometry) -> bool:
    """True iff the geometry (point, coordinate list or shape) lies in the closed region."""
    return region.covers(as_geometry(geometry))


def distance(a: BaseGeometry, b: BaseGeometry) -> float:
    return float(a.distance(b))


def as_geometry(obj) -> BaseGeometry:
    if isinstance(obj, BaseGeometry):
        return obj
    seq = list(obj)
    if len(seq) == 2 and not isinstance(seq[0], (tuple, list)):
        return Point(seq)
    if len(seq) == 1:
        return Point(seq[0])
    return LineString(seq)


def is_normalized(poly: Polygon) -> bool:
    """Structural validity check used by tests: valid, oriented, positive area."""
    if not isinstance(poly, Polygon) or not poly.is_valid or poly.area <= 0:
        return False
    if not poly.exterior.is_ccw:
        return False
    return all(not ring.is_ccw for ring in poly.interiors)
