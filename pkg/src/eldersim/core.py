"""Shared domain vocabulary: time, grid locations, activities, anomaly labels.

All times are stored as integer counts of 0.1 s ticks ("deciseconds", ds).
That is the finest sensor sampling period in the simulator, so every
sampling instant, activity boundary and trajectory timestamp is exact and
multi-year runs accumulate no floating-point drift.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

DS_PER_SECOND = 10
DS_PER_MINUTE = 60 * DS_PER_SECOND
DS_PER_HOUR = 60 * DS_PER_MINUTE
DS_PER_DAY = 24 * DS_PER_HOUR

#: Days per simulated month and months per simulated year.  Monthly anomaly
#: laws are converted to daily rates by dividing by 30, so the simulated
#: calendar uses uniform 30-day months (and hence 360-day years).
DAYS_PER_MONTH = 30
MONTHS_PER_YEAR = 12

#: Grid pitch of the house floor grid, in cm (matches the body radius).
GRID_PITCH_CM = 10


def ds_from_seconds(seconds: float) -> int:
    return round(seconds * DS_PER_SECOND)


def ds_from_minutes(minutes: float) -> int:
    return round(minutes * DS_PER_MINUTE)


_TIME_RE = re.compile(r"^(\d+)d (\d{2}):(\d{2}):(\d{2})\.(\d)$")


@dataclass(frozen=True, order=True)
class SimTime:
    """A non-negative time offset from simulation start, at 0.1 s resolution."""

    ds: int

    def __post_init__(self):
        if self.ds < 0:
            raise ValueError(f"SimTime must be non-negative, got {self.ds} ds")

    @classmethod
    def from_seconds(cls, seconds: float) -> "SimTime":
        return cls(ds_from_seconds(seconds))

    @classmethod
    def from_dhms(cls, day: int = 0, hour: int = 0, minute: int = 0,
                  second: float = 0.0) -> "SimTime":
        ds = day * DS_PER_DAY + hour * DS_PER_HOUR + minute * DS_PER_MINUTE
        return cls(ds + ds_from_seconds(second))

    @property
    def seconds(self) -> float:
        return self.ds / DS_PER_SECOND

    @property
    def day(self) -> int:
        return self.ds // DS_PER_DAY

    @property
    def hour(self) -> int:
        return (self.ds % DS_PER_DAY) // DS_PER_HOUR

    @property
    def minute(self) -> int:
        return (self.ds % DS_PER_HOUR) // DS_PER_MINUTE

    @property
    def second(self) -> float:
        return (self.ds % DS_PER_MINUTE) / DS_PER_SECOND

    def shifted(self, ds: int) -> "SimTime":
        return SimTime(self.ds + ds)

    def format(self) -> str:
        """Canonical export format ``Dd HH:MM:SS.s``; round-trips exactly."""
        whole, tenth = divmod(self.ds % DS_PER_MINUTE, DS_PER_SECOND)
        return (f"{self.day}d {self.hour:02d}:{self.minute:02d}:"
                f"{whole:02d}.{tenth}")

    @classmethod
    def parse(cls, text: str) -> "SimTime":
        m = _TIME_RE.match(text)
        if m is None:
            raise ValueError(f"bad timestamp: {text!r}")
        day, hour, minute, sec, tenth = (int(g) for g in m.groups())
        if hour > 23 or minute > 59 or sec > 59:
            raise ValueError(f"bad timestamp: {text!r}")
        return cls(day * DS_PER_DAY + hour * DS_PER_HOUR
                   + minute * DS_PER_MINUTE + sec * DS_PER_SECOND + tenth)

    def __str__(self) -> str:
        return self.format()


@dataclass(frozen=True, order=True)
class GridLocation:
    """A point on the house floor grid, in cm from the south-west corner."""

    x: int
    y: int

    def distance_to(self, other: "GridLocation") -> float:
        return ((self.x - other.x) ** 2 + (self.y - other.y) ** 2) ** 0.5


class Tier(Enum):
    FUNDAMENTAL = "F"
    NECESSARY = "N"
    RANDOM = "R"


@dataclass(frozen=True)
class ActivityName:
    label: str
    tier: Tier

    def __str__(self) -> str:
        return self.label


#: The six anomaly kinds, grouped by time scale: multi-day state shifts,
#: discrete anomalous activities, and within-walk anomalies.
STATE_ANOMALIES = ("semi_bedridden", "housebound")
ACTIVITY_ANOMALIES = ("wandering", "forgetting")
MOVING_ANOMALIES = ("fall_while_walking", "fall_while_standing")
ANOMALY_KINDS = STATE_ANOMALIES + ACTIVITY_ANOMALIES + MOVING_ANOMALIES


@dataclass(frozen=True)
class ActivityInstance:
    """One concrete activity: what, when, for how long, and where.

    An activity crossing midnight is stored as two instances split at the
    day boundary; the pieces share ``instance_id`` so that per-day coverage
    accounting and per-activity statistics can both be exact.
    """

    name: ActivityName
    start: SimTime
    duration_ds: int
    location: GridLocation
    instance_id: int
    appliances: tuple[str, ...] = ()

    def __post_init__(self):
        if self.duration_ds <= 0:
            raise ValueError(f"{self.name.label}: duration must be positive")

    @property
    def end(self) -> SimTime:
        return SimTime(self.start.ds + self.duration_ds)

    @property
    def duration_s(self) -> float:
        return self.duration_ds / DS_PER_SECOND


@dataclass
class ActivitySequence:
    """An ordered multi-day plan of activities covering ``day_count`` days."""

    items: list[ActivityInstance]
    day_count: int

    def day_items(self, day: int) -> list[ActivityInstance]:
        lo, hi = day * DS_PER_DAY, (day + 1) * DS_PER_DAY
        return [a for a in self.items if a.start.ds < hi and a.end.ds > lo]

    def logical_items(self) -> list[ActivityInstance]:
        """Merge midnight-split pieces back into whole activities."""
        merged: list[ActivityInstance] = []
        for item in self.items:
            if merged and merged[-1].instance_id == item.instance_id:
                prev = merged[-1]
                merged[-1] = ActivityInstance(
                    prev.name, prev.start, prev.duration_ds + item.duration_ds,
                    prev.location, prev.instance_id, prev.appliances)
            else:
                merged.append(item)
        return merged


@dataclass(frozen=True)
class AnomalyLabel:
    """Ground-truth interval of one anomaly occurrence."""

    kind: str
    start: SimTime
    end: SimTime
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ANOMALY_KINDS:
            raise ValueError(f"unknown anomaly kind {self.kind!r}")
        if self.end <= self.start:
            raise ValueError("label interval must have positive length")


def validate_sequence(seq: ActivitySequence) -> list[str]:
    """Check that a sequence is sorted, overlap-free and covers every day.

    Violations are returned as human-readable strings; an empty list means
    the sequence is valid.
    """
    violations = []
    items = seq.items
    for k in range(1, len(items)):
        if items[k].start < items[k - 1].start:
            violations.append(
                f"items out of order at index {k} ({items[k].start})")
    ordered = sorted(items, key=lambda a: a.start.ds)
    for k in range(1, len(ordered)):
        if ordered[k].start.ds < ordered[k - 1].end.ds:
            violations.append(
                f"overlap between {ordered[k - 1].name.label} and "
                f"{ordered[k].name.label} at {ordered[k].start}")
    for day in range(seq.day_count):
        lo, hi = day * DS_PER_DAY, (day + 1) * DS_PER_DAY
        cursor = lo
        for a in ordered:
            s, e = max(a.start.ds, lo), min(a.end.ds, hi)
            if e <= lo or s >= hi:
                continue
            if s > cursor:
                violations.append(_gap_message(day, cursor, s))
            cursor = max(cursor, e)
        if cursor == lo:
            violations.append(f"day {day} uncovered")
        elif cursor < hi:
            violations.append(_gap_message(day, cursor, hi))
    return violations


def _gap_message(day: int, start_ds: int, end_ds: int) -> str:
    length = (end_ds - start_ds) / DS_PER_SECOND
    return (f"gap of {length:g} s on day {day} at {SimTime(start_ds)}")
