"""House geometry: furniture obstacles, activity zones, sensor placements.

Layouts are authored in a human-editable INI file with sections
``[bounds]``, ``[furniture]``, ``[walls]``, ``[zones]`` and ``[sensors]``;
all lengths are centimeters.  A bundled studio-apartment layout ships with
the package (see :func:`bundled_layout_path`).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .core import GRID_PITCH_CM, GridLocation

#: Minimum gap required between any two furniture pieces, in cm.
MIN_FURNITURE_CLEARANCE_CM = 60.0

PIR_DEFAULT_RADIUS_CM = 50.0
PR_DEFAULT_RADIUS_CM = 30.0
BODY_RADIUS_CM = 10.0

PIR_SAMPLE_HZ = 10.0
PR_SAMPLE_HZ = 10.0
COST_SAMPLE_HZ = 1.0

SENSOR_KINDS = ("PIR", "PR", "COST")


class LayoutError(ValueError):
    """Raised when a layout config is malformed or violates an invariant."""


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle, corners (x1, y1) and (x2, y2) with x1 < x2."""

    x1: float
    y1: float
    x2: float
    y2: float

    def distance_to(self, x: float, y: float) -> float:
        dx = max(self.x1 - x, 0.0, x - self.x2)
        dy = max(self.y1 - y, 0.0, y - self.y2)
        return (dx * dx + dy * dy) ** 0.5

    def gap_to(self, other: "Rect") -> float:
        dx = max(self.x1 - other.x2, other.x1 - self.x2, 0.0)
        dy = max(self.y1 - other.y2, other.y1 - self.y2, 0.0)
        return (dx * dx + dy * dy) ** 0.5


@dataclass(frozen=True)
class WallSegment:
    """Zero-thickness axis-aligned wall segment."""

    x1: float
    y1: float
    x2: float
    y2: float

    def distance_to(self, x: float, y: float) -> float:
        # project onto the segment, then measure
        vx, vy = self.x2 - self.x1, self.y2 - self.y1
        length_sq = vx * vx + vy * vy
        if length_sq == 0:
            t = 0.0
        else:
            t = max(0.0, min(1.0, ((x - self.x1) * vx + (y - self.y1) * vy)
                             / length_sq))
        px, py = self.x1 + t * vx, self.y1 + t * vy
        return ((x - px) ** 2 + (y - py) ** 2) ** 0.5


@dataclass
class FloorPlan:
    """Immutable-after-load studio geometry in cm."""

    width: float
    height: float
    furniture: list[tuple[str, Rect]]
    walls: list[WallSegment]
    grid_pitch: int = GRID_PITCH_CM


@dataclass
class ZoneMap:
    """Allocated start locations per activity place key."""

    zones: dict[str, tuple[GridLocation, ...]]

    def cells(self, place: str) -> tuple[GridLocation, ...]:
        try:
            return self.zones[place]
        except KeyError:
            raise LayoutError(f"no zone defined for place {place!r}") from None


@dataclass(frozen=True)
class SensorSpec:
    """One binary sensor; ids are dense 1..N in file order."""

    id: int
    kind: str
    position: GridLocation | None
    radius: float
    linked_appliance: str | None
    sample_rate_hz: float


def walkable(plan: FloorPlan, p: GridLocation,
             body_radius: float = BODY_RADIUS_CM) -> bool:
    """True iff a body disc of ``body_radius`` at ``p`` touches no obstacle."""
    if not (0 <= p.x <= plan.width and 0 <= p.y <= plan.height):
        raise ValueError(f"point {p} outside house bounds")
    if (p.x < body_radius or p.x > plan.width - body_radius
            or p.y < body_radius or p.y > plan.height - body_radius):
        return False
    for _, rect in plan.furniture:
        if rect.distance_to(p.x, p.y) < body_radius:
            return False
    for wall in plan.walls:
        if wall.distance_to(p.x, p.y) < body_radius:
            return False
    return True


def walkable_mask(plan: FloorPlan, body_radius: float = BODY_RADIUS_CM) -> np.ndarray:
    """Boolean grid of walkable cells, indexed [ix, iy] with x = ix * pitch."""
    pitch = plan.grid_pitch
    nx = int(plan.width) // pitch + 1
    ny = int(plan.height) // pitch + 1
    xs = np.arange(nx)[:, None] * pitch
    ys = np.arange(ny)[None, :] * pitch
    ok = ((xs >= body_radius) & (xs <= plan.width - body_radius)
          & (ys >= body_radius) & (ys <= plan.height - body_radius))
    for _, r in plan.furniture:
        dx = np.maximum(np.maximum(r.x1 - xs, xs - r.x2), 0.0)
        dy = np.maximum(np.maximum(r.y1 - ys, ys - r.y2), 0.0)
        ok &= dx * dx + dy * dy >= body_radius * body_radius
    for w in plan.walls:
        vx, vy = w.x2 - w.x1, w.y2 - w.y1
        length_sq = vx * vx + vy * vy
        if length_sq == 0:
            t = np.zeros((nx, ny))
        else:
            t = np.clip(((xs - w.x1) * vx + (ys - w.y1) * vy) / length_sq, 0, 1)
        dx, dy = xs - (w.x1 + t * vx), ys - (w.y1 + t * vy)
        ok &= dx * dx + dy * dy >= body_radius * body_radius
    return ok


def _parse_rect(text: str, *, what: str) -> Rect:
    try:
        x1, y1, x2, y2 = (float(v) for v in text.split(","))
    except ValueError:
        raise LayoutError(f"{what}: expected 'x1,y1,x2,y2', got {text!r}")
    if not (x1 < x2 and y1 < y2):
        raise LayoutError(f"{what}: corners must satisfy x1<x2 and y1<y2")
    return Rect(x1, y1, x2, y2)


def _zone_cells(rects: list[Rect], pitch: int) -> list[GridLocation]:
    cells = set()
    for r in rects:
        ix0 = int(np.ceil(r.x1 / pitch))
        ix1 = int(np.floor(r.x2 / pitch))
        iy0 = int(np.ceil(r.y1 / pitch))
        iy1 = int(np.floor(r.y2 / pitch))
        for ix in range(ix0, ix1 + 1):
            for iy in range(iy0, iy1 + 1):
                cells.add(GridLocation(ix * pitch, iy * pitch))
    return sorted(cells)


def load_plan(path: str | Path) -> tuple[FloorPlan, ZoneMap, list[SensorSpec]]:
    """Load and validate a layout config.

    Raises :class:`LayoutError` on parse errors, furniture clearance
    violations (naming both pieces), zones overlapping furniture, or bad
    sensor declarations.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = parser.read(path)
    if not read:
        raise LayoutError(f"cannot read layout file {path}")
    try:
        width = parser.getfloat("bounds", "width")
        height = parser.getfloat("bounds", "height")
    except (configparser.Error, ValueError) as exc:
        raise LayoutError(f"bad [bounds] section: {exc}") from None
    if width <= 0 or height <= 0:
        raise LayoutError("house bounds must be positive")

    furniture = []
    if parser.has_section("furniture"):
        for label, value in parser.items("furniture"):
            rect = _parse_rect(value, what=f"furniture {label!r}")
            if rect.x1 < 0 or rect.y1 < 0 or rect.x2 > width or rect.y2 > height:
                raise LayoutError(f"furniture {label!r} extends outside bounds")
            furniture.append((label, rect))
    for i, (la, ra) in enumerate(furniture):
        for lb, rb in furniture[i + 1:]:
            gap = ra.gap_to(rb)
            if gap < MIN_FURNITURE_CLEARANCE_CM:
                raise LayoutError(
                    f"furniture {la!r} and {lb!r} are {gap:g} cm apart "
                    f"(minimum clearance {MIN_FURNITURE_CLEARANCE_CM:g} cm)")

    walls = []
    if parser.has_section("walls"):
        for label, value in parser.items("walls"):
            try:
                x1, y1, x2, y2 = (float(v) for v in value.split(","))
            except ValueError:
                raise LayoutError(f"wall {label!r}: expected 'x1,y1,x2,y2'")
            walls.append(WallSegment(x1, y1, x2, y2))

    plan = FloorPlan(width, height, furniture, walls)
    mask = walkable_mask(plan, BODY_RADIUS_CM)
    pitch = plan.grid_pitch

    zones: dict[str, tuple[GridLocation, ...]] = {}
    if parser.has_section("zones"):
        for place, value in parser.items("zones"):
            if value.strip() == "open":
                ix, iy = np.nonzero(mask)
                cells = [GridLocation(int(a) * pitch, int(b) * pitch)
                         for a, b in zip(ix, iy)]
            else:
                rects = [_parse_rect(part, what=f"zone {place!r}")
                         for part in value.split(";")]
                cells = _zone_cells(rects, pitch)
                for c in cells:
                    if not mask[c.x // pitch, c.y // pitch]:
                        raise LayoutError(
                            f"zone {place!r} cell ({c.x}, {c.y}) is not "
                            f"walkable (inside or too close to an obstacle)")
            if not cells:
                raise LayoutError(f"zone {place!r} contains no grid cells")
            zones[place] = tuple(sorted(cells))

    sensors: list[SensorSpec] = []
    if parser.has_section("sensors"):
        for name, value in parser.items("sensors"):
            fields = [v.strip() for v in value.split(",")]
            kind = fields[0].upper()
            if kind not in SENSOR_KINDS:
                raise LayoutError(f"sensor {name!r}: unknown kind {fields[0]!r}")
            sensor_id = len(sensors) + 1
            if kind == "COST":
                if len(fields) != 2 or not fields[1]:
                    raise LayoutError(
                        f"sensor {name!r}: COST needs a linked appliance")
                sensors.append(SensorSpec(sensor_id, "COST", None, 0.0,
                                          fields[1], COST_SAMPLE_HZ))
                continue
            try:
                x, y = float(fields[1]), float(fields[2])
            except (IndexError, ValueError):
                raise LayoutError(f"sensor {name!r}: expected 'KIND,x,y[,radius]'")
            default = PIR_DEFAULT_RADIUS_CM if kind == "PIR" else PR_DEFAULT_RADIUS_CM
            radius = float(fields[3]) if len(fields) > 3 else default
            if not (0 <= x <= width and 0 <= y <= height):
                raise LayoutError(f"sensor {name!r} outside bounds")
            rate = PIR_SAMPLE_HZ if kind == "PIR" else PR_SAMPLE_HZ
            sensors.append(SensorSpec(sensor_id, kind,
                                      GridLocation(int(x), int(y)),
                                      radius, None, rate))

    return plan, ZoneMap(zones), sensors


def check_zones(zone_map: ZoneMap, places: list[str]) -> None:
    """Verify every referenced place has a non-empty zone."""
    missing = [p for p in places if not zone_map.zones.get(p)]
    if missing:
        raise LayoutError(f"no zone defined for places: {', '.join(missing)}")


def bundled_layout_path() -> Path:
    """Path of the studio-apartment layout shipped with the package."""
    return Path(resources.files("eldersim").joinpath("data/studio_layout.ini"))
