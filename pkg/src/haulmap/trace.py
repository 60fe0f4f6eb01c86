"""GPS point ingestion, kinematics and trip segmentation."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, TextIO

from .config import PipelineConfig

logger = logging.getLogger(__name__)

EARTH_RADIUS = 6371008.8
CSV_COLUMNS = ("truck_id", "timestamp", "x", "y")


class TraceParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class GpsPoint:
    truck_id: str
    timestamp: float
    x: float
    y: float
    speed: float | None = None
    heading: float | None = None

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass
class RawTrace:
    truck_id: str
    points: list[GpsPoint]
    duplicates_dropped: int = 0


@dataclass
class Trip:
    trip_id: str
    points: list[GpsPoint]

    @property
    def truck_id(self) -> str:
        return self.points[0].truck_id

    def length(self) -> float:
        return polyline_length([p.position for p in self.points])

    def __len__(self) -> int:
        return len(self.points)


def polyline_length(coords) -> float:
    total = 0.0
    for (x0, y0), (x1, y1) in zip(coords, coords[1:]):
        total += math.hypot(x1 - x0, y1 - y0)
    return total


# -- loading ---------------------------------------------------------------

def load_points(source, latlon: bool = False) -> list[RawTrace]:
    """Read ``truck_id,timestamp,x,y`` CSV into one trace per truck.

    ``source`` is a path or a text stream. Traces come back ordered by
    truck id, points by timestamp. Repeated timestamps within a truck keep
    the first row seen. With ``latlon=True`` the x/y columns are read as
    lon/lat degrees and projected to metres about the dataset centroid.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            rows = _read_rows(fh)
    else:
        rows = _read_rows(source)
    if latlon:
        rows = _project_equirectangular(rows)

    by_truck: dict[str, dict[float, GpsPoint]] = {}
    dropped: dict[str, int] = {}
    for point in rows:
        seen = by_truck.setdefault(point.truck_id, {})
        if point.timestamp in seen:
            dropped[point.truck_id] = dropped.get(point.truck_id, 0) + 1
            continue
        seen[point.timestamp] = point

    traces = []
    for truck_id in sorted(by_truck):
        pts = sorted(by_truck[truck_id].values(), key=lambda p: p.timestamp)
        n_dup = dropped.get(truck_id, 0)
        if n_dup:
            logger.warning("truck %s: dropped %d duplicate timestamps", truck_id, n_dup)
        traces.append(RawTrace(truck_id, pts, n_dup))
    return traces


def _read_rows(fh: TextIO) -> list[GpsPoint]:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None:
        return []
    header = [h.strip() for h in header]
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise TraceParseError(f"missing column(s) {', '.join(missing)}", line=1)
    idx = [header.index(c) for c in CSV_COLUMNS]

    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < len(header):
            raise TraceParseError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
        truck_id = row[idx[0]].strip()
        if not truck_id:
            raise TraceParseError("empty truck_id", line=lineno)
        try:
            t, x, y = (float(row[i]) for i in idx[1:])
        except ValueError:
            raise TraceParseError(f"non-numeric field in {row!r}", line=lineno) from None
        if not all(math.isfinite(v) for v in (t, x, y)):
            raise TraceParseError("non-finite value", line=lineno)
        rows.append(GpsPoint(truck_id, t, x, y))
    return rows


def _project_equirectangular(rows: list[GpsPoint]) -> list[GpsPoint]:
    if not rows:
        return rows
    lon0 = sum(p.x for p in rows) / len(rows)
    lat0 = sum(p.y for p in rows) / len(rows)
    kx = EARTH_RADIUS * math.cos(math.radians(lat0)) * math.pi / 180.0
    ky = EARTH_RADIUS * math.pi / 180.0
    return [replace(p, x=(p.x - lon0) * kx, y=(p.y - lat0) * ky) for p in rows]


# -- kinematics ------------------------------------------------------------

def derive_kinematics(trace: RawTrace) -> RawTrace:
    """Forward-difference speed (m/s) and heading (rad, [0, 2pi)).

    The last point copies its predecessor; a lone point gets zeros.
    """
    pts = trace.points
    if not pts:
        return RawTrace(trace.truck_id, [], trace.duplicates_dropped)
    out = []
    speed = heading = 0.0
    for a, b in zip(pts, pts[1:]):
        dx, dy = b.x - a.x, b.y - a.y
        speed = math.hypot(dx, dy) / (b.timestamp - a.timestamp)
        heading = math.atan2(dy, dx) % (2 * math.pi)
        out.append(replace(a, speed=speed, heading=heading))
    out.append(replace(pts[-1], speed=speed, heading=heading))
    return RawTrace(trace.truck_id, out, trace.duplicates_dropped)


# -- segmentation ----------------------------------------------------------

@dataclass
class SegmentStats:
    candidate_runs: int = 0
    trips: int = 0
    slow_points: int = 0
    short_runs: int = 0


def segment_trips(trace: RawTrace | Trip, cfg: PipelineConfig,
                  stats: SegmentStats | None = None) -> list[Trip]:
    """Split a kinematics-populated trace into moving trips.

    Slow points are dropped and break the run they sit in; a timestamp gap
    above ``gap_threshold`` also breaks it. Runs that are too short in
    points or metres are discarded.
    """
    points = trace.points
    if not points:
        return []
    if any(p.speed is None for p in points):
        raise ValueError("segment_trips needs speeds; call derive_kinematics first")
    stats = stats if stats is not None else SegmentStats()

    runs: list[list[GpsPoint]] = []
    current: list[GpsPoint] = []
    for p in points:
        if p.speed < cfg.stop_speed:
            stats.slow_points += 1
            if current:
                runs.append(current)
            current = []
            continue
        if current and p.timestamp - current[-1].timestamp > cfg.gap_threshold:
            runs.append(current)
            current = []
        current.append(p)
    if current:
        runs.append(current)

    stats.candidate_runs += len(runs)
    truck_id = points[0].truck_id
    trips = []
    for run in runs:
        if len(run) < cfg.min_points or polyline_length([p.position for p in run]) < cfg.min_length:
            stats.short_runs += 1
            continue
        trips.append(Trip(f"{truck_id}/{run[0].timestamp!r}", run))
    stats.trips += len(trips)
    return trips


def segment_all(traces: Iterable[RawTrace], cfg: PipelineConfig,
                stats: SegmentStats | None = None) -> list[Trip]:
    """Kinematics plus segmentation over many traces, in truck-id order."""
    stats = stats if stats is not None else SegmentStats()
    trips = []
    for trace in sorted(traces, key=lambda t: t.truck_id):
        trips.extend(segment_trips(derive_kinematics(trace), cfg, stats))
    return trips


# -- trip files ------------------------------------------------------------

def write_trips(trips: Iterable[Trip], fh: TextIO) -> None:
    """Trip CSV: the input schema plus trip_id, speed and heading."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow([*CSV_COLUMNS, "trip_id", "speed", "heading"])
    for trip in trips:
        for p in trip.points:
            writer.writerow([p.truck_id, repr(p.timestamp), repr(p.x), repr(p.y),
                             trip.trip_id, repr(p.speed), repr(p.heading)])


def read_trips(source) -> list[Trip]:
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return read_trips(fh)
    reader = csv.DictReader(source)
    needed = {*CSV_COLUMNS, "trip_id", "speed", "heading"}
    if reader.fieldnames is None:
        return []
    missing = needed - set(reader.fieldnames)
    if missing:
        raise TraceParseError(f"missing column(s) {', '.join(sorted(missing))}", line=1)
    trips: dict[str, Trip] = {}
    for lineno, row in enumerate(reader, start=2):
        try:
            p = GpsPoint(row["truck_id"], float(row["timestamp"]), float(row["x"]),
                         float(row["y"]), float(row["speed"]), float(row["heading"]))
        except (TypeError, ValueError):
            raise TraceParseError(f"bad trip row {row!r}", line=lineno) from None
        trips.setdefault(row["trip_id"], Trip(row["trip_id"], [])).points.append(p)
    return list(trips.values())


def write_points_csv(traces: Iterable[RawTrace], fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for trace in traces:
        for p in trace.points:
            writer.writerow([p.truck_id, repr(p.timestamp), repr(p.x), repr(p.y)])


def points_csv_text(traces: Iterable[RawTrace]) -> str:
    buf = io.StringIO()
    write_points_csv(traces, buf)
    return buf.getvalue()
