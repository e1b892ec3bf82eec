"""Day-to-day similarity of activity sequences.

Days are sampled at a fixed rate into equal-length character strings (one
character per activity) and compared with Levenshtein distance.  Set-level
scores are the mean distance over all cross pairs, or over all unordered
distinct pairs within one set; candidate quality is the absolute gap of
those scores against a reference set.  Two randomized baseline generators
are included for comparison: RanD picks every next activity uniformly with
fitted durations, RanS does the same but pins each day's sleep to the
reference schedule first.
"""

from __future__ import annotations

import string
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import (
    DS_PER_DAY,
    DS_PER_SECOND,
    ActivityInstance,
    ActivityName,
    ActivitySequence,
    GridLocation,
    SimTime,
    Tier,
    ds_from_minutes,
)

DEFAULT_RATE_HZ = 1.0 / 60  # one character per minute, day length 1440

_CHARS = string.ascii_uppercase + string.ascii_lowercase + string.digits


@dataclass
class DayString:
    codes: np.ndarray            # uint16 symbol codes, one per sample slot
    rate_hz: float
    alphabet: dict[str, str]     # activity name -> single character

    @property
    def chars(self) -> str:
        inverse = {ord(c): c for c in self.alphabet.values()}
        return "".join(inverse[int(v)] for v in self.codes)

    def __len__(self) -> int:
        return len(self.codes)


def build_alphabet(names) -> dict[str, str]:
    ordered = sorted(set(names))
    if len(ordered) > len(_CHARS):
        raise ValueError(f"alphabet supports at most {len(_CHARS)} activities")
    return {name: _CHARS[i] for i, name in enumerate(ordered)}


def slot_period_ds(rate_hz: float) -> int:
    period = DS_PER_SECOND / rate_hz
    rounded = round(period)
    if abs(period - rounded) > 1e-9 or rounded <= 0:
        raise ValueError(f"sampling rate {rate_hz} Hz does not align with "
                         f"the 0.1 s clock")
    return rounded


def to_day_strings(seq: ActivitySequence, rate_hz: float = DEFAULT_RATE_HZ,
                   alphabet: dict[str, str] | None = None) -> list[DayString]:
    """One fixed-length string per day; slot k takes the activity active at
    its start instant."""
    if alphabet is None:
        alphabet = build_alphabet(a.name.label for a in seq.items)
    period = slot_period_ds(rate_hz)
    if DS_PER_DAY % period:
        raise ValueError("sampling rate must divide the day evenly")
    slots_per_day = DS_PER_DAY // period
    items = sorted(seq.items, key=lambda a: a.start.ds)
    for a in items:
        if a.name.label not in alphabet:
            raise ValueError(f"activity {a.name.label!r} not in alphabet")
    codes_by_name = {name: ord(c) for name, c in alphabet.items()}
    out = []
    pos = 0
    for day in range(seq.day_count):
        codes = np.zeros(slots_per_day, dtype=np.uint16)
        for k in range(slots_per_day):
            t = day * DS_PER_DAY + k * period
            while pos < len(items) and items[pos].end.ds <= t:
                pos += 1
            if pos >= len(items) or items[pos].start.ds > t:
                raise ValueError(f"no activity covers {SimTime(t)}")
            codes[k] = codes_by_name[items[pos].name.label]
        out.append(DayString(codes, rate_hz, alphabet))
    return out


@njit(cache=True)
def _levenshtein(a, b):
    n, m = len(a), len(b)
    row = np.empty(m + 1, dtype=np.int64)
    for j in range(m + 1):
        row[j] = j
    for i in range(1, n + 1):
        diag = row[0]
        row[0] = i
        for j in range(1, m + 1):
            keep = row[j]
            cost = 0 if a[i - 1] == b[j - 1] else 1
            best = diag + cost
            if row[j] + 1 < best:
                best = row[j] + 1
            if row[j - 1] + 1 < best:
                best = row[j - 1] + 1
            row[j] = best
            diag = keep
    return row[m]


def _as_codes(s) -> np.ndarray:
    if isinstance(s, DayString):
        return s.codes
    if isinstance(s, str):
        return np.frombuffer(s.encode("utf-16-le"), dtype=np.uint16)
    return np.asarray(s, dtype=np.uint16)


def sim(a, b) -> int:
    """Levenshtein distance (insertions, deletions, substitutions)."""
    if isinstance(a, DayString) and isinstance(b, DayString) \
            and a.alphabet != b.alphabet:
        raise ValueError("day strings use different alphabets")
    return int(_levenshtein(_as_codes(a), _as_codes(b)))


def rho_cross(a_days: list, b_days: list) -> float:
    """Mean distance over all cross pairs (identical indices included)."""
    if not a_days or not b_days:
        raise ValueError("both day sets must be non-empty")
    total = 0
    for x in a_days:
        for y in b_days:
            total += sim(x, y)
    return total / (len(a_days) * len(b_days))


def rho_self(a_days: list) -> float:
    """Mean distance over unordered distinct pairs within one set."""
    m = len(a_days)
    if m < 2:
        raise ValueError("self-similarity needs at least two days")
    total = 0
    for i in range(m):
        for j in range(i + 1, m):
            total += sim(a_days[i], a_days[j])
    return total / (m * (m - 1) / 2)


def deltas(a_days: list, ref_days: list) -> tuple[float, float]:
    """(intra, inter) gaps of a candidate set against a reference set."""
    ref_var = rho_self(ref_days)
    d_intra = abs(rho_self(a_days) - ref_var)
    d_inter = abs(rho_cross(a_days, ref_days) - ref_var)
    return d_intra, d_inter


# ---------------------------------------------------------------------------
# randomized baselines

@dataclass(frozen=True)
class BaselineActivity:
    name: str
    duration_mean: float        # minutes
    duration_sd: float


def _draw_duration(rng, spec: BaselineActivity) -> int:
    for _ in range(1000):
        d = rng.normal(spec.duration_mean, spec.duration_sd)
        if d > 0:
            return max(ds_from_minutes(d), 1)
    return max(ds_from_minutes(spec.duration_mean), 1)


def _instance(name: str, start_ds: int, dur_ds: int,
              instance_id: int) -> ActivityInstance:
    return ActivityInstance(ActivityName(name, Tier.RANDOM),
                            SimTime(start_ds), dur_ds, GridLocation(0, 0),
                            instance_id)


def ran_d(activities: list[BaselineActivity], n_days: int,
          rng: np.random.Generator) -> ActivitySequence:
    """Chronological uniform-next-activity baseline with fitted durations."""
    items = []
    counter = 0
    for day in range(n_days):
        t = day * DS_PER_DAY
        end = (day + 1) * DS_PER_DAY
        while t < end:
            spec = activities[int(rng.integers(0, len(activities)))]
            d = min(_draw_duration(rng, spec), end - t)
            items.append(_instance(spec.name, t, d, counter))
            counter += 1
            t += d
    return ActivitySequence(items, n_days)


def ran_s(activities: list[BaselineActivity], n_days: int,
          sleep_schedule: list[tuple[float, float] | None], sleep_name: str,
          rng: np.random.Generator) -> ActivitySequence:
    """RanD with each day's sleep pinned to the reference schedule first."""
    items = []
    counter = 0
    others = [a for a in activities if a.name != sleep_name]
    for day in range(n_days):
        day0 = day * DS_PER_DAY
        end = (day + 1) * DS_PER_DAY
        sched = sleep_schedule[day % len(sleep_schedule)]
        if sched is not None:
            s_start = day0 + min(ds_from_minutes(sched[0]), DS_PER_DAY - 1)
            s_end = min(s_start + ds_from_minutes(sched[1]), end)
            if s_end <= s_start:
                s_end = s_start + 1
        else:
            s_start = s_end = end
        if s_end > s_start:
            items.append(_instance(sleep_name, s_start, s_end - s_start,
                                   counter))
            counter += 1
        blocks = [(day0, s_start), (s_end, end)]
        for lo, hi in blocks:
            t = lo
            while t < hi:
                spec = others[int(rng.integers(0, len(others)))]
                d = min(_draw_duration(rng, spec), hi - t)
                items.append(_instance(spec.name, t, d, counter))
                counter += 1
                t += d
    items.sort(key=lambda a: a.start.ds)
    return ActivitySequence(items, n_days)


def sleep_schedule_from(seq: ActivitySequence, sleep_name: str
                        ) -> list[tuple[float, float] | None]:
    """Per-day (start minute, duration minutes) of the named activity."""
    out: list[tuple[float, float] | None] = [None] * seq.day_count
    for a in seq.logical_items():
        if a.name.label != sleep_name:
            continue
        day = a.start.day
        if day < seq.day_count and out[day] is None:
            out[day] = ((a.start.ds % DS_PER_DAY) / 600, a.duration_ds / 600)
    return out
