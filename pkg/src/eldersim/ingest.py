"""Ingestion of real activity logs and activity-parameter fitting.

Input normal form is one event per line, ``start<TAB>end<TAB>label`` with
ISO-8601 timestamps; the two public-dataset cleaning pipelines and the
fitting step all work on that form.  Start times of fundamental activities
are averaged on the 24 h circle, so a bedtime alternating between 23:50
and 00:10 fits to midnight rather than noon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .core import Tier
from .scheduler import ActivityParams

MINUTES_PER_DAY = 1440.0

FILL_LABEL = "other"


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class RawEvent:
    start: datetime
    end: datetime
    label: str

    def __post_init__(self):
        if self.end < self.start:
            raise IngestError(f"event {self.label!r} ends before it starts")

    @property
    def duration_min(self) -> float:
        return (self.end - self.start).total_seconds() / 60.0


@dataclass(frozen=True)
class DayEvent:
    """One cleaned within-day event; minutes from the day's midnight."""

    label: str
    start_min: float
    duration_min: float

    @property
    def end_min(self) -> float:
        return self.start_min + self.duration_min


def _norm(label: str) -> str:
    return label.strip().lower().replace(" ", "_")


def read_events(path: str | Path) -> list[RawEvent]:
    """Parse the tab-separated normal form; malformed lines are reported
    with their line number."""
    events = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise IngestError(f"{path}:{lineno}: expected "
                                  f"'start<TAB>end<TAB>label'")
            try:
                start = datetime.fromisoformat(parts[0].strip())
                end = datetime.fromisoformat(parts[1].strip())
            except ValueError as exc:
                raise IngestError(f"{path}:{lineno}: {exc}") from None
            try:
                events.append(RawEvent(start, end, _norm(parts[2])))
            except IngestError as exc:
                raise IngestError(f"{path}:{lineno}: {exc}") from None
    return events


def _trim_overlaps(events: list[RawEvent]) -> list[RawEvent]:
    """Each activity ends no later than the next one starts."""
    events = sorted(events, key=lambda e: (e.start, e.end))
    out: list[RawEvent] = []
    for ev in events:
        if out and out[-1].end > ev.start:
            prev = out.pop()
            if prev.start < ev.start:
                out.append(RawEvent(prev.start, ev.start, prev.label))
        out.append(ev)
    return out


def _dedup(events: list[RawEvent]) -> list[RawEvent]:
    seen = set()
    out = []
    for ev in events:
        key = (ev.start, ev.end, ev.label)
        if key not in seen:
            seen.add(key)
            out.append(ev)
    return out


def _window(events: list[RawEvent],
            start: datetime | None, n_days: int | None
            ) -> tuple[list[RawEvent], datetime, int]:
    if not events:
        raise IngestError("no events to process")
    events = sorted(events, key=lambda e: e.start)
    base = (start if start is not None else
            events[0].start.replace(hour=0, minute=0, second=0,
                                    microsecond=0))
    if n_days is None:
        last = max(e.end for e in events)
        n_days = max(1, math.ceil((last - base).total_seconds() / 86400.0))
    lo, hi = base, base + timedelta(days=n_days)
    clipped = []
    for ev in events:
        s, e = max(ev.start, lo), min(ev.end, hi)
        if e > s or (s == e and lo <= s < hi):
            clipped.append(RawEvent(s, e, ev.label))
    return clipped, base, n_days


def _split_days(events: list[RawEvent], base: datetime,
                n_days: int) -> list[list[DayEvent]]:
    days: list[list[DayEvent]] = [[] for _ in range(n_days)]
    for ev in events:
        cursor = ev.start
        while cursor < ev.end:
            day = int((cursor - base).total_seconds() // 86400)
            day_end = base + timedelta(days=day + 1)
            piece_end = min(ev.end, day_end)
            if 0 <= day < n_days:
                start_min = (cursor - (base + timedelta(days=day))
                             ).total_seconds() / 60.0
                dur = (piece_end - cursor).total_seconds() / 60.0
                if dur > 0:
                    days[day].append(DayEvent(ev.label, start_min, dur))
            cursor = piece_end
    for d in days:
        d.sort(key=lambda e: e.start_min)
    return days


def _fill_other(days: list[list[DayEvent]],
                absorb_below_min: float = 0.0) -> list[list[DayEvent]]:
    """Close every vacancy: short ones extend the predecessor, the rest
    become the fill activity."""
    out = []
    for events in days:
        filled: list[DayEvent] = []
        cursor = 0.0
        for ev in events:
            gap = ev.start_min - cursor
            if gap > 1e-9:
                if gap < absorb_below_min and filled:
                    prev = filled.pop()
                    filled.append(DayEvent(prev.label, prev.start_min,
                                           prev.duration_min + gap))
                else:
                    filled.append(DayEvent(FILL_LABEL, cursor, gap))
            filled.append(ev)
            cursor = max(cursor, ev.end_min)
        tail = MINUTES_PER_DAY - cursor
        if tail > 1e-9:
            if tail < absorb_below_min and filled:
                prev = filled.pop()
                filled.append(DayEvent(prev.label, prev.start_min,
                                       prev.duration_min + tail))
            else:
                filled.append(DayEvent(FILL_LABEL, cursor, tail))
        out.append(filled)
    return out


def preprocess_kasteren(events: list[RawEvent],
                        window_start: datetime | None = None,
                        window_days: int | None = None
                        ) -> list[list[DayEvent]]:
    """Window the log, drop outlier events, fill vacancies.

    Outliers: leaving the house for more than 23 hours, nights in bed
    shorter than 6 hours, and drinks before noon.
    """
    events, base, n_days = _window(events, window_start, window_days)
    kept = []
    for ev in events:
        if ev.label == "leave_house" and ev.duration_min > 23 * 60:
            continue
        if ev.label == "go_to_bed" and ev.duration_min < 6 * 60:
            continue
        if ev.label == "get_drink" and ev.start.hour < 12:
            continue
        kept.append(ev)
    kept = _trim_overlaps(_dedup(kept))
    return _fill_other(_split_days(kept, base, n_days))


def preprocess_plain(events: list[RawEvent],
                     window_start: datetime | None = None,
                     window_days: int | None = None) -> list[list[DayEvent]]:
    """Minimal cleaning: window, overlap trimming, dedup, vacancy fill."""
    events, base, n_days = _window(events, window_start, window_days)
    events = _dedup(_trim_overlaps(events))
    return _fill_other(_split_days(events, base, n_days))


_EATING_LABEL = "eating"
_SLEEP_LABEL = "sleeping"
_ABSORB_LABELS = {"bed_to_toilet", "resperate", "respirate"}


def _eating_name(start_min: float) -> str:
    hour = start_min / 60.0
    if 4 <= hour < 11:
        return "take_breakfast"
    if 11 <= hour < 16:
        return "take_lunch"
    return "take_dinner"


def preprocess_aruba(events: list[RawEvent],
                     window_start: datetime | None = None,
                     window_days: int | None = None
                     ) -> list[list[DayEvent]]:
    """Aruba-style cleaning.

    Overlaps are trimmed so activities follow each other just in time,
    duplicates are removed, vacancies become the fill activity (those under
    five minutes extend their predecessor), leave/enter pairs collapse into
    one going-out span, eating splits into the three meals by clock windows,
    daytime sleeping becomes a nap, and bed-to-toilet style micro events are
    absorbed into their predecessor.
    """
    events, base, n_days = _window(events, window_start, window_days)
    events = _dedup(_trim_overlaps(events))

    # collapse leave_home .. enter_home into one outing
    collapsed: list[RawEvent] = []
    pending_leave: RawEvent | None = None
    for ev in sorted(events, key=lambda e: e.start):
        if ev.label == "leave_home":
            if pending_leave is not None:
                collapsed.append(RawEvent(pending_leave.start, ev.start,
                                          "go_out"))
            pending_leave = ev
            continue
        if ev.label == "enter_home":
            start = pending_leave.start if pending_leave else ev.start
            collapsed.append(RawEvent(start, ev.end, "go_out"))
            pending_leave = None
            continue
        if pending_leave is not None and ev.end <= pending_leave.start:
            collapsed.append(ev)
            continue
        if pending_leave is not None:
            # stray label recorded while away: close the outing first
            collapsed.append(RawEvent(pending_leave.start, ev.start,
                                      "go_out"))
            pending_leave = None
        collapsed.append(ev)
    if pending_leave is not None:
        collapsed.append(RawEvent(pending_leave.start, pending_leave.end,
                                  "go_out"))
    events = _trim_overlaps(collapsed)

    days = _split_days(events, base, n_days)
    days = _fill_other(days, absorb_below_min=5.0)

    out: list[list[DayEvent]] = []
    for day_events in days:
        renamed: list[DayEvent] = []
        for ev in day_events:
            if ev.label == _EATING_LABEL:
                renamed.append(DayEvent(_eating_name(ev.start_min),
                                        ev.start_min, ev.duration_min))
            elif ev.label == _SLEEP_LABEL and 6 * 60 <= ev.start_min < 17 * 60:
                renamed.append(DayEvent("nap", ev.start_min, ev.duration_min))
            else:
                renamed.append(ev)
        absorbed: list[DayEvent] = []
        for ev in renamed:
            if ev.label in _ABSORB_LABELS and absorbed:
                prev = absorbed.pop()
                absorbed.append(DayEvent(prev.label, prev.start_min,
                                         prev.duration_min + ev.duration_min))
            elif ev.label in _ABSORB_LABELS:
                absorbed.append(DayEvent(FILL_LABEL, ev.start_min,
                                         ev.duration_min))
            else:
                absorbed.append(ev)
        out.append(absorbed)
    return out


def days_to_events(days: list[list[DayEvent]],
                   base: datetime) -> list[RawEvent]:
    """Inverse of day splitting; boundary-adjacent same-label pieces rejoin."""
    events: list[RawEvent] = []
    for day, day_events in enumerate(days):
        day0 = base + timedelta(days=day)
        for ev in day_events:
            start = day0 + timedelta(minutes=ev.start_min)
            end = day0 + timedelta(minutes=ev.end_min)
            if events and events[-1].label == ev.label \
                    and events[-1].end == start:
                events[-1] = RawEvent(events[-1].start, end, ev.label)
            else:
                events.append(RawEvent(start, end, ev.label))
    return events


# ---------------------------------------------------------------------------
# circular statistics and fitting

def circular_mean_minutes(samples, period_min: float = MINUTES_PER_DAY
                          ) -> float:
    """Mean of clock times on the circle, in [0, period)."""
    ang = np.asarray(samples, dtype=float) * 2 * np.pi / period_min
    mean = np.angle(np.mean(np.exp(1j * ang)))
    if mean < 0:
        mean += 2 * np.pi
    return float(mean * period_min / (2 * np.pi)) % period_min


def circular_sd_minutes(samples, period_min: float = MINUTES_PER_DAY
                        ) -> float:
    """Angular deviation sqrt(2 (1 - R)) mapped back to minutes."""
    ang = np.asarray(samples, dtype=float) * 2 * np.pi / period_min
    r = abs(np.mean(np.exp(1j * ang)))
    return float(np.sqrt(max(0.0, 2 * (1 - r))) * period_min / (2 * np.pi))


@dataclass
class FitReport:
    params: list[ActivityParams]
    n_days: int
    sample_counts: dict[str, int]
    shrink_applied: dict[str, float]
    diagnostics: list[str] = field(default_factory=list)

    def to_catalog(self) -> list[ActivityParams]:
        order = {Tier.FUNDAMENTAL: 0, Tier.NECESSARY: 1, Tier.RANDOM: 2}
        return sorted(self.params,
                      key=lambda p: (order[p.tier],
                                     p.start_mean if p.start_mean is not None
                                     else 0.0, p.name))

    def format_text(self) -> str:
        lines = [f"{'tier':4} {'activity':22} {'n':>5} {'start':>8} "
                 f"{'s.sd':>7} {'rate':>6} {'dur':>8} {'d.sd':>7} {'p':>6}"]
        for p in self.to_catalog():
            def num(v, fmt="{:.2f}"):
                return "-" if v is None else fmt.format(v)
            lines.append(
                f"{p.tier.value:4} {p.name:22} "
                f"{self.sample_counts.get(p.name, 0):>5} "
                f"{num(p.start_mean, '{:8.2f}')} {num(p.start_sd, '{:7.2f}')} "
                f"{num(p.daily_rate, '{:6.2f}')} "
                f"{num(p.duration_mean, '{:8.2f}')} "
                f"{num(p.duration_sd, '{:7.2f}')} "
                f"{num(p.pick_weight, '{:6.3f}')}")
        lines.extend(self.diagnostics)
        return "\n".join(lines)


def fit_params(days: list[list[DayEvent]], tiers: dict[str, Tier],
               shrink: dict[str, float] | None = None,
               places: dict[str, str] | None = None) -> FitReport:
    """Fit per-activity parameters from cleaned day sequences.

    Start statistics of fundamentals use the circular mean and dispersion
    over the 24 h circle; durations use plain sample statistics; necessary
    activities get their mean daily count and random ones their occurrence
    share.  ``shrink`` factors multiply the start and duration deviations
    of the named activities.
    """
    shrink = shrink or {}
    places = places or {}
    n_days = len(days)
    if n_days == 0:
        raise IngestError("no days to fit")
    # rejoin midnight-split pieces so starts and durations describe whole
    # occurrences (a night of sleep is one sample, not two half-nights)
    merged: list[tuple[str, float, float]] = []   # label, abs start, abs end
    for day, day_events in enumerate(days):
        for ev in day_events:
            start = day * MINUTES_PER_DAY + ev.start_min
            end = start + ev.duration_min
            if merged and merged[-1][0] == ev.label \
                    and abs(merged[-1][2] - start) < 1e-9:
                merged[-1] = (ev.label, merged[-1][1], end)
            else:
                merged.append((ev.label, start, end))
    starts: dict[str, list[float]] = {}
    durations: dict[str, list[float]] = {}
    counts: dict[str, int] = {}
    for label, start, end in merged:
        starts.setdefault(label, []).append(start % MINUTES_PER_DAY)
        durations.setdefault(label, []).append(end - start)
        counts[label] = counts.get(label, 0) + 1

    unknown = sorted(set(counts) - set(tiers))
    if unknown:
        raise IngestError(f"no tier assignment for: {', '.join(unknown)}")
    thin = sorted(label for label, tier in tiers.items()
                  if tier is Tier.FUNDAMENTAL and counts.get(label, 0) < 2)
    if thin:
        raise IngestError("insufficient samples for fundamental "
                          f"activities: {', '.join(thin)}")

    random_total = sum(counts.get(label, 0) for label, t in tiers.items()
                       if t is Tier.RANDOM)
    params: list[ActivityParams] = []
    applied: dict[str, float] = {}
    diagnostics = ["start sd convention: circular dispersion "
                   "sqrt(2(1-R)) mapped to minutes"]
    for label, tier in sorted(tiers.items()):
        if counts.get(label, 0) == 0:
            diagnostics.append(f"note: {label!r} never occurs; skipped")
            continue
        dur = np.array(durations[label], dtype=float)
        dur_mean = float(dur.mean())
        dur_sd = float(dur.std(ddof=1)) if len(dur) > 1 else 0.0
        factor = shrink.get(label, 1.0)
        if factor != 1.0:
            applied[label] = factor
        kwargs = dict(name=label, tier=tier, duration_mean=dur_mean,
                      duration_sd=dur_sd * factor,
                      place=places.get(label, label))
        if tier is Tier.FUNDAMENTAL:
            s = starts[label]
            kwargs["start_mean"] = circular_mean_minutes(s)
            kwargs["start_sd"] = circular_sd_minutes(s) * factor
        elif tier is Tier.NECESSARY:
            kwargs["daily_rate"] = counts[label] / n_days
        else:
            kwargs["pick_weight"] = counts[label] / random_total
        params.append(ActivityParams(**kwargs))
    return FitReport(params, n_days, counts, applied, diagnostics)
