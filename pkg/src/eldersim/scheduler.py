"""Daily activity plan generation.

Each day is filled in three passes: fundamental activities are placed at
normally-drawn start times, necessary activities are placed at uniformly
random free instants with Poisson daily counts, and random activities fill
every remaining gap from the earliest free instant onward.  A placement
that would create (or land in) a free fragment shorter than the minimum
duration is rejected and redrawn, so the day always ends gap-free.

An activity whose drawn duration runs past midnight keeps its full length:
the part after 24:00 is carried into the next day as a split piece sharing
the same instance id.  This keeps duration statistics unbiased (sleep would
otherwise be cut short every night) while every single day stays exactly
covered.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import (
    DS_PER_DAY,
    ActivityInstance,
    ActivityName,
    ActivitySequence,
    GridLocation,
    SimTime,
    Tier,
    ds_from_minutes,
)
from .floor_plan import ZoneMap

SCHEDULER_STREAM = 0


class CatalogError(ValueError):
    """Raised when activity parameters violate their tier's contract."""


class SchedulingError(RuntimeError):
    """Raised when a placement cannot converge within the retry budget."""


@dataclass(frozen=True)
class ActivityParams:
    """Statistical parameters of one catalog activity (minutes as units)."""

    name: str
    tier: Tier
    duration_mean: float
    duration_sd: float
    place: str
    start_mean: float | None = None
    start_sd: float | None = None
    daily_rate: float | None = None
    pick_weight: float | None = None
    appliances: tuple[str, ...] = ()

    def activity_name(self) -> ActivityName:
        return ActivityName(self.name, self.tier)


@dataclass(frozen=True)
class SchedulerConfig:
    epsilon_s: float = 30.0
    max_retries: int = 100
    rng_seed: int = 0

    def __post_init__(self):
        if self.epsilon_s <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_retries < 1:
            raise ValueError("max_retries must be at least 1")

    @property
    def epsilon_ds(self) -> int:
        return round(self.epsilon_s * 10)


@dataclass(frozen=True)
class ForcedActivity:
    """A pre-drawn activity occurrence the scheduler must fit into the day."""

    params: ActivityParams
    duration_min: float


@dataclass(frozen=True)
class CatalogDelta:
    """Per-day catalog modifications plus pre-drawn forced occurrences."""

    replace: tuple[ActivityParams, ...] = ()
    forced: tuple[ForcedActivity, ...] = ()

    def is_empty(self) -> bool:
        return not self.replace and not self.forced


@dataclass(frozen=True)
class CarryOver:
    """Tail of an activity that ran past midnight, owed to the next day."""

    name: ActivityName
    remaining_ds: int
    location: GridLocation
    instance_id: int
    appliances: tuple[str, ...]


@dataclass
class DayResult:
    items: list[ActivityInstance]
    carry_out: CarryOver | None
    placement_log: list[tuple[str, str, int, int]]
    notes: list[str] = field(default_factory=list)


def validate_catalog(catalog: list[ActivityParams]) -> None:
    seen = set()
    for p in catalog:
        if p.name in seen:
            raise CatalogError(f"duplicate activity {p.name!r}")
        seen.add(p.name)
        if p.duration_mean is None or p.duration_sd is None:
            raise CatalogError(f"{p.name}: duration parameters required")
        if p.tier is Tier.FUNDAMENTAL:
            if p.start_mean is None or p.start_sd is None:
                raise CatalogError(f"{p.name}: fundamental needs start mean/sd")
            if not 0 <= p.start_mean < 24 * 60:
                raise CatalogError(f"{p.name}: start mean outside the day")
        elif p.tier is Tier.NECESSARY:
            if p.daily_rate is None:
                raise CatalogError(f"{p.name}: necessary needs a daily rate")
        else:
            if p.pick_weight is None or p.pick_weight <= 0:
                raise CatalogError(f"{p.name}: random needs a positive weight")


def apply_delta(catalog: list[ActivityParams],
                delta: CatalogDelta | None) -> list[ActivityParams]:
    """Apply per-day replacements; activities are matched by name.

    A replacement may move an activity between tiers.  Newly added random
    activities default to the mean weight of the existing random tier, so
    they take a uniform share after normalization.
    """
    if delta is None or not delta.replace:
        return catalog
    by_name = {p.name: p for p in catalog}
    random_weights = [p.pick_weight for p in catalog if p.tier is Tier.RANDOM]
    mean_weight = float(np.mean(random_weights)) if random_weights else 1.0
    for p in delta.replace:
        if p.tier is Tier.RANDOM and p.pick_weight is None:
            old = by_name.get(p.name)
            keep = old.pick_weight if old is not None and \
                old.tier is Tier.RANDOM else mean_weight
            p = replace(p, pick_weight=keep)
        by_name[p.name] = p
    return list(by_name.values())


class FreeTime:
    """Union of disjoint half-open [a, b) intervals in ds, kept sorted."""

    def __init__(self, intervals: list[tuple[int, int]]):
        self._iv = [(a, b) for a, b in intervals if b > a]

    def total(self) -> int:
        return sum(b - a for a, b in self._iv)

    def is_empty(self) -> bool:
        return not self._iv

    def fragments(self) -> list[tuple[int, int]]:
        return list(self._iv)

    def earliest(self) -> int:
        return self._iv[0][0]

    def fragment_at(self, t: int) -> tuple[int, int] | None:
        for a, b in self._iv:
            if a <= t < b:
                return (a, b)
            if a > t:
                return None
        return None

    def remove(self, s: int, e: int) -> None:
        out = []
        for a, b in self._iv:
            if e <= a or s >= b:
                out.append((a, b))
                continue
            if a < s:
                out.append((a, s))
            if e < b:
                out.append((e, b))
        self._iv = out

    def draw_uniform(self, rng: np.random.Generator) -> int:
        """Measure-weighted uniform tick over the whole free union."""
        offset = int(rng.integers(0, self.total()))
        for a, b in self._iv:
            if offset < b - a:
                return a + offset
            offset -= b - a
        raise AssertionError("uniform draw out of range")


def day_rng(seed: int, day_index: int) -> np.random.Generator:
    """Per-day scheduler stream; day-parallel generation equals serial."""
    key = (seed & 0xFFFFFFFFFFFFFFFF, SCHEDULER_STREAM, day_index)
    return np.random.default_rng(np.random.SeedSequence(key))


class _DayBuilder:
    def __init__(self, cfg: SchedulerConfig, day_index: int,
                 zone_map: ZoneMap | None, first_instance_id: int):
        self.cfg = cfg
        self.day_index = day_index
        self.zone_map = zone_map
        self.rng = day_rng(cfg.rng_seed, day_index)
        self.free = FreeTime([(0, DS_PER_DAY)])
        self.items: list[ActivityInstance] = []
        self.carry_out: CarryOver | None = None
        self.log: list[tuple[str, str, int, int]] = []
        self.notes: list[str] = []
        self.next_id = first_instance_id
        self.last_fundamental_start = -1

    def draw_location(self, params: ActivityParams) -> GridLocation:
        if self.zone_map is None:
            return GridLocation(0, 0)
        cells = self.zone_map.cells(params.place)
        return cells[int(self.rng.integers(0, len(cells)))]

    def try_place(self, params: ActivityParams, s_ds: int, d_ds: int,
                  check_order: bool = False,
                  allow_truncate: bool = False) -> bool:
        """One placement attempt; returns False when the draw must be retried.

        Only the random gap fill may truncate a duration to the free
        fragment; other tiers keep their full drawn duration or retry.  A
        placement reaching the end of the day keeps its full duration in
        either case and carries the excess past midnight.
        """
        eps = self.cfg.epsilon_ds
        if d_ds < eps:
            return False
        if check_order and s_ds <= self.last_fundamental_start:
            return False
        frag = self.free.fragment_at(s_ds)
        if frag is None:
            return False
        a, b = frag
        left = s_ds - a
        if 0 < left < eps:
            return False
        if b == DS_PER_DAY and s_ds + d_ds > DS_PER_DAY:
            placed_ds = DS_PER_DAY - s_ds
            carry_ds = d_ds - placed_ds
        else:
            placed_ds = min(d_ds, b - s_ds) if allow_truncate else d_ds
            carry_ds = 0
            if placed_ds < eps or s_ds + placed_ds > b:
                return False
            right = b - (s_ds + placed_ds)
            if 0 < right < eps:
                return False
        location = self.draw_location(params)
        instance_id = self.next_id
        self.next_id += 1
        start = SimTime(self.day_index * DS_PER_DAY + s_ds)
        self.items.append(ActivityInstance(
            params.activity_name(), start, placed_ds, location,
            instance_id, params.appliances))
        if carry_ds > 0:
            self.carry_out = CarryOver(params.activity_name(), carry_ds,
                                       location, instance_id, params.appliances)
        self.free.remove(s_ds, s_ds + placed_ds)
        self.log.append((params.tier.value, params.name, s_ds, placed_ds))
        if check_order:
            self.last_fundamental_start = s_ds
        return True

    def place_fundamentals(self, fundamentals: list[ActivityParams]) -> None:
        for params in fundamentals:
            for attempt in range(self.cfg.max_retries):
                s = self.rng.normal(params.start_mean, params.start_sd)
                d = self.rng.normal(params.duration_mean, params.duration_sd)
                if s < 0 or d <= 0:
                    continue
                if self.try_place(params, ds_from_minutes(s),
                                  ds_from_minutes(d), check_order=True):
                    break
            else:
                raise SchedulingError(
                    f"day {self.day_index}: could not place fundamental "
                    f"{params.name!r} after {self.cfg.max_retries} attempts")

    def place_necessary(self, necessary: list[ActivityParams],
                        forced: tuple[ForcedActivity, ...]) -> None:
        for params in necessary:
            count = int(self.rng.poisson(params.daily_rate))
            for _ in range(count):
                self._place_uniform(params, duration_min=None)
        for item in forced:
            self._place_uniform(item.params, duration_min=item.duration_min,
                                best_effort=True)

    def _feasible_starts(self, d_ds: int) -> list[tuple[int, int]]:
        """Start ticks where a full ``d_ds`` placement passes every check.

        Within each free fragment the start must leave either no gap or at
        least epsilon on both sides; in the fragment touching midnight any
        start works once the tail spills into the next day.
        """
        eps = self.cfg.epsilon_ds
        regions: list[tuple[int, int]] = []
        for a, b in self.free.fragments():
            left = [(a, a + 1), (a + eps, b)]
            if b == DS_PER_DAY:
                fit = [(a, DS_PER_DAY - d_ds - eps + 1),
                       (DS_PER_DAY - d_ds, b)]
            else:
                fit = [(a, b - d_ds - eps + 1), (b - d_ds, b - d_ds + 1)]
            for l0, l1 in left:
                for f0, f1 in fit:
                    lo, hi = max(l0, f0, a), min(l1, f1, b)
                    if lo < hi:
                        regions.append((lo, hi))
        merged: list[list[int]] = []
        for lo, hi in sorted(regions):
            if merged and lo <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        return [(lo, hi) for lo, hi in merged]

    def _place_uniform(self, params: ActivityParams,
                       duration_min: float | None,
                       best_effort: bool = False) -> None:
        """Place one occurrence at a uniform feasible start.

        The duration draw is never truncated or selected against: the
        start is sampled uniformly over the ticks where the whole duration
        fits, and the duration is redrawn only when no such tick exists.
        """
        for attempt in range(self.cfg.max_retries):
            if duration_min is not None:
                d = duration_min
            else:
                d = self.rng.normal(params.duration_mean, params.duration_sd)
                if d <= 0:
                    continue
            d_ds = ds_from_minutes(d)
            if d_ds < self.cfg.epsilon_ds:
                if duration_min is not None:
                    break
                continue
            regions = self._feasible_starts(d_ds)
            total = sum(hi - lo for lo, hi in regions)
            if total == 0:
                if duration_min is not None:
                    break
                continue
            offset = int(self.rng.integers(0, total))
            for lo, hi in regions:
                if offset < hi - lo:
                    s_ds = lo + offset
                    break
                offset -= hi - lo
            if self.try_place(params, s_ds, d_ds):
                return
        if best_effort:
            self.notes.append(
                f"day {self.day_index}: dropped forced {params.name!r} "
                f"(no feasible slot)")
            return
        raise SchedulingError(
            f"day {self.day_index}: could not place necessary "
            f"{params.name!r} after {self.cfg.max_retries} attempts")

    def fill_random(self, randoms: list[ActivityParams]) -> None:
        if not randoms:
            if not self.free.is_empty():
                raise SchedulingError(
                    f"day {self.day_index}: free time remains but the "
                    f"catalog has no random activities")
            return
        weights = np.array([p.pick_weight for p in randoms], dtype=float)
        weights /= weights.sum()
        while not self.free.is_empty():
            for attempt in range(self.cfg.max_retries):
                params = randoms[int(self.rng.choice(len(randoms), p=weights))]
                s_ds = self.free.earliest()
                d = self.rng.normal(params.duration_mean, params.duration_sd)
                if d <= 0:
                    continue
                if self.try_place(params, s_ds, ds_from_minutes(d),
                                  allow_truncate=True):
                    break
            else:
                raise SchedulingError(
                    f"day {self.day_index}: random fill stalled at "
                    f"{SimTime(self.free.earliest())}")


def schedule_day(catalog: list[ActivityParams], cfg: SchedulerConfig,
                 day_index: int, zone_map: ZoneMap | None = None,
                 carry_in: CarryOver | None = None,
                 forced: tuple[ForcedActivity, ...] = (),
                 first_instance_id: int = 0) -> DayResult:
    """Generate one fully covered day; times are absolute to the run start."""
    validate_catalog(catalog)
    builder = _DayBuilder(cfg, day_index, zone_map, first_instance_id)
    if carry_in is not None:
        placed = min(carry_in.remaining_ds, DS_PER_DAY)
        builder.items.append(ActivityInstance(
            carry_in.name, SimTime(day_index * DS_PER_DAY), placed,
            carry_in.location, carry_in.instance_id, carry_in.appliances))
        builder.free.remove(0, placed)
        rest = carry_in.remaining_ds - placed
        if rest > 0:
            builder.carry_out = CarryOver(carry_in.name, rest,
                                          carry_in.location,
                                          carry_in.instance_id,
                                          carry_in.appliances)
            builder.notes.append(
                f"day {day_index}: fully covered by carried "
                f"{carry_in.name.label!r}")
            return DayResult(builder.items, builder.carry_out, builder.log,
                             builder.notes)
    builder.place_fundamentals([p for p in catalog
                                if p.tier is Tier.FUNDAMENTAL])
    builder.place_necessary([p for p in catalog if p.tier is Tier.NECESSARY],
                            forced)
    builder.fill_random([p for p in catalog if p.tier is Tier.RANDOM])
    builder.items.sort(key=lambda a: a.start.ds)
    return DayResult(builder.items, builder.carry_out, builder.log,
                     builder.notes)


def schedule_days(catalog: list[ActivityParams], cfg: SchedulerConfig,
                  n_days: int, zone_map: ZoneMap | None = None,
                  day_overrides=None) -> ActivitySequence:
    """Concatenate per-day schedules, chaining midnight carry-overs.

    ``day_overrides`` maps a day index to a :class:`CatalogDelta` (or None);
    it is how state anomalies switch activity parameters on affected days
    and how pre-drawn wandering occurrences enter the plan.
    """
    items: list[ActivityInstance] = []
    carry = None
    next_id = 0
    for day in range(n_days):
        delta = day_overrides(day) if day_overrides is not None else None
        day_catalog = apply_delta(catalog, delta)
        forced = delta.forced if delta is not None else ()
        result = schedule_day(day_catalog, cfg, day, zone_map, carry,
                              forced, next_id)
        items.extend(result.items)
        carry = result.carry_out
        if result.items:
            next_id = max(a.instance_id for a in result.items) + 1
    return ActivitySequence(items, n_days)


# ---------------------------------------------------------------------------
# catalog and sequence files

_COLUMNS = ["type", "activity", "start_mean_min", "start_sd_min",
            "daily_rate", "duration_mean_min", "duration_sd_min",
            "pick_weight", "place", "appliances"]


def load_catalog(path: str | Path) -> list[ActivityParams]:
    catalog = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise CatalogError(f"catalog misses columns: {sorted(missing)}")
        for row in reader:
            def opt(key):
                return float(row[key]) if row[key].strip() else None
            appliances = tuple(a for a in row["appliances"].split(";") if a)
            catalog.append(ActivityParams(
                name=row["activity"],
                tier=Tier(row["type"]),
                start_mean=opt("start_mean_min"),
                start_sd=opt("start_sd_min"),
                daily_rate=opt("daily_rate"),
                duration_mean=float(row["duration_mean_min"]),
                duration_sd=float(row["duration_sd_min"]),
                pick_weight=opt("pick_weight"),
                place=row["place"],
                appliances=appliances))
    validate_catalog(catalog)
    return catalog


def save_catalog(catalog: list[ActivityParams], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_COLUMNS)
        for p in catalog:
            def fmt(v):
                return "" if v is None else f"{v:g}"
            writer.writerow([p.tier.value, p.name, fmt(p.start_mean),
                             fmt(p.start_sd), fmt(p.daily_rate),
                             fmt(p.duration_mean), fmt(p.duration_sd),
                             fmt(p.pick_weight), p.place,
                             ";".join(p.appliances)])


def default_catalog() -> list[ActivityParams]:
    """The bundled 18-activity catalog of the virtual resident."""
    from importlib import resources
    path = resources.files("eldersim").joinpath("data/default_catalog.csv")
    return load_catalog(path)


def write_activities_csv(seq: ActivitySequence, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["day", "name", "start", "duration_s", "x", "y"])
        for a in seq.items:
            writer.writerow([a.start.day, a.name.label, a.start.format(),
                             f"{a.duration_s:.1f}", a.location.x, a.location.y])


def read_activities_csv(path: str | Path) -> ActivitySequence:
    """Read a sequence export; tiers are not recorded and default to Random."""
    items = []
    day_count = 0
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.DictReader(fh)):
            start = SimTime.parse(row["start"])
            duration_ds = round(float(row["duration_s"]) * 10)
            items.append(ActivityInstance(
                ActivityName(row["name"], Tier.RANDOM), start, duration_ds,
                GridLocation(int(row["x"]), int(row["y"])), i))
            day_count = max(day_count, items[-1].end.day
                            + (1 if items[-1].end.ds % DS_PER_DAY else 0))
    return ActivitySequence(items, day_count)
