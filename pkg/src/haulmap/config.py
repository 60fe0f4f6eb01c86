"""Pipeline parameters and the plain-text ``key = value`` config format.

Values may carry a unit suffix: ``kph`` (converted to m/s) or ``deg``
(converted to radians). Everything is stored internally in SI units.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path


class ConfigError(ValueError):
    """Raised for unknown keys, unparsable values or violated invariants."""


@dataclass(frozen=True)
class PipelineConfig:
    # trace segmentation
    stop_speed: float = 1.0 / 3.6
    gap_threshold: float = 30.0
    min_points: int = 11
    min_length: float = 100.0
    # map inference
    seed_radius: float = 30.0
    heading_tolerance: float = math.radians(45.0)
    sparsify_corridor: float = 15.0
    min_edge_support: int = 1
    # area marking
    marker_radius: float = 30.0
    marker_angle: float = math.radians(120.0)
    arc_segments: int = 16
    area_dilate: float = 11.0
    area_erode: float = 10.0
    path_buffer: float = 5.0
    area_merge_distance: float = 30.0
    opposite_lane_distance: float = 25.0
    opposite_lane_angle: float = math.radians(45.0)
    round_cap: int = 20

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise ConfigError(f"{f.name} must be finite, got {value!r}")
            if f.name == "stop_speed":
                if value < 0:
                    raise ConfigError("stop_speed must be >= 0")
            elif value <= 0:
                raise ConfigError(f"{f.name} must be > 0, got {value!r}")
        if self.area_dilate <= self.area_erode:
            raise ConfigError("area_dilate must exceed area_erode")
        if not 0 < self.marker_angle <= math.pi:
            raise ConfigError("marker_angle must lie in (0, pi]")
        if self.arc_segments < 2:
            raise ConfigError("arc_segments must be >= 2")

    def replace(self, **changes) -> PipelineConfig:
        return dataclasses.replace(self, **changes)

    # -- text format -------------------------------------------------------

    @classmethod
    def from_text(cls, text: str, base: PipelineConfig | None = None) -> PipelineConfig:
        values = parse_key_values(text)
        return (base or cls()).with_overrides(values)

    @classmethod
    def from_file(cls, path, base: PipelineConfig | None = None) -> PipelineConfig:
        return cls.from_text(Path(path).read_text(), base=base)

    @classmethod
    def default(cls) -> PipelineConfig:
        """Defaults as recorded in the packaged ``default.cfg``."""
        text = resources.files("haulmap").joinpath("default.cfg").read_text()
        return cls.from_text(text, base=cls())

    def with_overrides(self, values: dict[str, str]) -> PipelineConfig:
        known = {f.name: f for f in fields(self)}
        changes = {}
        for key, raw in values.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            changes[key] = _coerce(key, raw, known[key].type)
        return self.replace(**changes)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {getattr(self, f.name)!r}")
        return "\n".join(lines) + "\n"

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def parse_key_values(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def parse_quantity(raw: str) -> float:
    """Parse a number with an optional ``kph`` or ``deg`` suffix."""
    text = raw.strip()
    scale = 1.0
    for suffix, factor in (("kph", 1.0 / 3.6), ("deg", math.pi / 180.0)):
        if text.endswith(suffix):
            text = text[: -len(suffix)].strip()
            scale = factor
            break
    try:
        return float(text) * scale
    except ValueError:
        raise ConfigError(f"cannot parse number from {raw!r}") from None


def _coerce(key: str, raw, annotation):
    if not isinstance(raw, str):
        return raw
    if annotation in (int, "int"):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    return parse_quantity(raw)
