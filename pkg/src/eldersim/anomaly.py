"""Latent cognitive decline and the six behavioral anomalies it drives.

A monthly MMSE-style score follows a linear downward drift with Gaussian
noise, clamped to [0, 30].  Anomaly occurrence laws are either constants
(the two multi-day state anomalies) or affine functions of the current
score (wandering, forgetting, and the two falls), clamped at zero.  The
calendar pre-draws every occurrence for a whole run so that enabling or
disabling one anomaly never perturbs the draws of the others.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .core import (
    DAYS_PER_MONTH,
    DS_PER_DAY,
    AnomalyLabel,
    SimTime,
    Tier,
)
from .scheduler import ActivityParams, CatalogDelta, ForcedActivity

MMSE_MIN, MMSE_MAX = 0.0, 30.0

#: Default monthly drift: 29 down to 19.5 over nine years.
DEFAULT_DRIFT = (29.0 - 19.5) / 9 / 12


@dataclass
class MmseProcess:
    """Monthly latent score: ``M[m+1] = clamp(M[m] - drift + noise)``.

    While no noise or clamping has occurred the next value is computed from
    the last rebase point in closed form (one multiply), so a zero-noise
    ramp is bit-exact over any horizon instead of accumulating rounding
    error from repeated subtraction.
    """

    initial: float = 29.0
    drift: float = DEFAULT_DRIFT
    noise_sd: float = 1.0
    scores: list[float] = field(default_factory=list)
    _anchor_index: int = 0
    _anchor_value: float = 29.0

    def __post_init__(self):
        if not self.scores:
            self.scores = [float(self.initial)]
        self._anchor_index = 0
        self._anchor_value = self.scores[0]


def step_mmse(proc: MmseProcess, rng: np.random.Generator) -> float:
    """Append and return the next monthly score."""
    m_next = len(proc.scores)
    value = proc._anchor_value - proc.drift * (m_next - proc._anchor_index)
    if proc.noise_sd > 0:
        value += rng.normal(0.0, proc.noise_sd)
    clamped = min(MMSE_MAX, max(MMSE_MIN, value))
    if proc.noise_sd > 0 or clamped != value:
        proc._anchor_index = m_next
        proc._anchor_value = clamped
    proc.scores.append(clamped)
    return clamped


@dataclass(frozen=True)
class AffineLaw:
    """max(0, slope * score + intercept)."""

    slope: float
    intercept: float

    def value_at(self, score: float) -> float:
        return max(0.0, self.slope * score + self.intercept)


@dataclass(frozen=True)
class AnomalyProfile:
    """Frequency and duration laws of the six anomalies, plus enable flags."""

    wandering_freq: AffineLaw = AffineLaw(-1.86, 56.0)
    wandering_duration_min: AffineLaw = AffineLaw(-0.31, 9.8)
    forgetting_freq: AffineLaw = AffineLaw(-1.0, 30.0)
    fall_walking_freq: AffineLaw = AffineLaw(-1.0 / 15, 2.0)
    fall_standing_freq: AffineLaw = AffineLaw(-1.0 / 15, 2.0)
    fall_hold_s: float = 30.0
    housebound_freq: float = 1.0 / 10
    housebound_duration_days: float = 14.0
    semi_bedridden_freq: float = 1.0 / 20
    semi_bedridden_duration_days: float = 30.0
    mmse_initial: float = 29.0
    mmse_drift: float = DEFAULT_DRIFT
    mmse_noise_sd: float = 1.0
    enabled: frozenset = frozenset({
        "semi_bedridden", "housebound", "wandering", "forgetting",
        "fall_while_walking", "fall_while_standing"})

    def is_enabled(self, kind: str) -> bool:
        return kind in self.enabled

    def mmse_process(self) -> MmseProcess:
        return MmseProcess(self.mmse_initial, self.mmse_drift,
                           self.mmse_noise_sd)


def anomaly_rates(profile: AnomalyProfile, score: float) -> dict:
    """Per-anomaly (events per month, mean duration) at a given score.

    Duration units vary by kind: minutes for wandering, seconds for falls,
    days for the state anomalies; forgetting has no intrinsic duration (it
    ends at the resident's next return to the appliance) and reports None.
    """
    if not MMSE_MIN <= score <= MMSE_MAX:
        raise ValueError(f"score {score} outside [{MMSE_MIN}, {MMSE_MAX}]")
    return {
        "wandering": (profile.wandering_freq.value_at(score),
                      profile.wandering_duration_min.value_at(score)),
        "forgetting": (profile.forgetting_freq.value_at(score), None),
        "fall_while_walking": (profile.fall_walking_freq.value_at(score),
                               profile.fall_hold_s),
        "fall_while_standing": (profile.fall_standing_freq.value_at(score),
                                profile.fall_hold_s),
        "housebound": (profile.housebound_freq,
                       profile.housebound_duration_days),
        "semi_bedridden": (profile.semi_bedridden_freq,
                           profile.semi_bedridden_duration_days),
    }


@dataclass(frozen=True)
class StateInterval:
    """One merged state-anomaly episode, in fractional days."""

    kind: str
    start_day: float
    end_day: float


@dataclass
class AnomalyCalendar:
    """All pre-drawn anomaly occurrences of a run.

    State anomalies are continuous intervals; a day counts as affected when
    the interval covers the day's first instant.  Wandering occurrences are
    carried as per-day duration lists and enter the schedule as forced
    necessary activities; forgetting and fall events are per-day counts
    resolved against the concrete schedule later.
    """

    n_days: int
    mmse: np.ndarray
    state_intervals: list[StateInterval]
    wandering_min: list[list[float]]
    forgetting_counts: np.ndarray
    falls: list[list[str]]

    def month_of_day(self, day: int) -> int:
        return min(day // DAYS_PER_MONTH, len(self.mmse) - 1)

    def state_active(self, kind: str, day: int) -> bool:
        return any(iv.kind == kind and iv.start_day <= day < iv.end_day
                   for iv in self.state_intervals)

    def state_labels(self) -> list[AnomalyLabel]:
        labels = []
        for iv in self.state_intervals:
            start = SimTime(round(iv.start_day * DS_PER_DAY))
            end = SimTime(min(round(iv.end_day * DS_PER_DAY),
                              self.n_days * DS_PER_DAY))
            if end.ds > start.ds:
                labels.append(AnomalyLabel(iv.kind, start, end, {}))
        return labels

    def wandering_events(self) -> int:
        return sum(len(day) for day in self.wandering_min)


def _merge_intervals(kind: str,
                     raw: list[tuple[float, float]]) -> list[StateInterval]:
    merged: list[list[float]] = []
    for start, end in sorted(raw):
        if merged and start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return [StateInterval(kind, a, b) for a, b in merged]


def _positive_normal(rng, mean, sd, max_tries=1000):
    for _ in range(max_tries):
        v = rng.normal(mean, sd)
        if v > 0:
            return v
    return mean


def build_calendar(proc: MmseProcess, profile: AnomalyProfile,
                   n_months: int, rng: np.random.Generator) -> AnomalyCalendar:
    """Sample every anomaly occurrence for ``n_months`` 30-day months.

    The generator is split into one child stream per anomaly (plus one for
    the score process), so toggling an anomaly leaves the rest untouched.
    """
    (mmse_rng, wander_rng, forget_rng, fall_w_rng, fall_s_rng,
     hb_rng, sb_rng) = rng.spawn(7)

    while len(proc.scores) < n_months:
        step_mmse(proc, mmse_rng)
    mmse = np.array(proc.scores[:n_months])
    n_days = n_months * DAYS_PER_MONTH

    wandering: list[list[float]] = [[] for _ in range(n_days)]
    forgetting = np.zeros(n_days, dtype=np.int64)
    falls: list[list[str]] = [[] for _ in range(n_days)]

    for m in range(n_months):
        score = mmse[m]
        wander_f = profile.wandering_freq.value_at(score) / DAYS_PER_MONTH
        wander_d = profile.wandering_duration_min.value_at(score)
        forget_f = profile.forgetting_freq.value_at(score) / DAYS_PER_MONTH
        fw_f = profile.fall_walking_freq.value_at(score) / DAYS_PER_MONTH
        fs_f = profile.fall_standing_freq.value_at(score) / DAYS_PER_MONTH
        for day in range(m * DAYS_PER_MONTH, (m + 1) * DAYS_PER_MONTH):
            if profile.is_enabled("wandering"):
                for _ in range(int(wander_rng.poisson(wander_f))):
                    wandering[day].append(_positive_normal(
                        wander_rng, wander_d, wander_d / 5))
            if profile.is_enabled("forgetting"):
                forgetting[day] = forget_rng.poisson(forget_f)
            if profile.is_enabled("fall_while_walking"):
                falls[day] += ["fall_while_walking"] * int(
                    fall_w_rng.poisson(fw_f))
            if profile.is_enabled("fall_while_standing"):
                falls[day] += ["fall_while_standing"] * int(
                    fall_s_rng.poisson(fs_f))

    intervals: list[StateInterval] = []
    for kind, freq, dur, kind_rng in (
            ("housebound", profile.housebound_freq,
             profile.housebound_duration_days, hb_rng),
            ("semi_bedridden", profile.semi_bedridden_freq,
             profile.semi_bedridden_duration_days, sb_rng)):
        if not profile.is_enabled(kind):
            continue
        raw = []
        for m in range(n_months):
            for _ in range(int(kind_rng.poisson(freq))):
                onset = (m + kind_rng.uniform(0.0, 1.0)) * DAYS_PER_MONTH
                length = _positive_normal(kind_rng, dur, dur / 5)
                raw.append((onset, min(onset + length, float(n_days))))
        intervals.extend(_merge_intervals(kind, raw))

    return AnomalyCalendar(n_days, mmse, intervals, wandering,
                           forgetting, falls)


# ---------------------------------------------------------------------------
# schedule overrides

_GO_OUT_HOUSEBOUND = ActivityParams(
    "go out", Tier.NECESSARY, 20.0, 4.0, "entrance", daily_rate=1.0 / 14)
_GO_OUT_SEMI = ActivityParams(
    "go out", Tier.NECESSARY, 20.0, 4.0, "entrance", daily_rate=1.0 / 7)
_PHONE_HOUSEBOUND = ActivityParams(
    "use the phone", Tier.NECESSARY, 10.0, 2.0, "desk", daily_rate=1.0 / 3)
_REST_SEMI = ActivityParams("rest", Tier.RANDOM, 60.0, 10.0, "sofa")
_NAP_SEMI = ActivityParams("nap", Tier.RANDOM, 40.0, 8.0, "sofa")


def apply_state_overrides(calendar: AnomalyCalendar, day: int) -> CatalogDelta:
    """Catalog deltas for the state anomalies active on ``day``.

    Housebound demotes going out and phoning to rare necessary activities;
    semi-bedridden does the same for going out (at a higher rate, which
    wins when both anomalies overlap), lengthens rest, and adds naps.
    """
    housebound = calendar.state_active("housebound", day)
    semi = calendar.state_active("semi_bedridden", day)
    changes: list[ActivityParams] = []
    if housebound:
        changes.append(_PHONE_HOUSEBOUND)
    if semi:
        changes.extend([_REST_SEMI, _NAP_SEMI])
    if semi:
        changes.append(_GO_OUT_SEMI)
    elif housebound:
        changes.append(_GO_OUT_HOUSEBOUND)
    return CatalogDelta(replace=tuple(changes))


def wandering_params(calendar: AnomalyCalendar, profile: AnomalyProfile,
                     day: int) -> ActivityParams:
    score = calendar.mmse[calendar.month_of_day(day)]
    mean = profile.wandering_duration_min.value_at(score)
    return ActivityParams("wandering", Tier.NECESSARY, mean, mean / 5,
                          "walking", daily_rate=0.0)


def day_directives(calendar: AnomalyCalendar, profile: AnomalyProfile,
                   day: int) -> CatalogDelta:
    """Full per-day delta: state overrides plus forced wandering."""
    delta = apply_state_overrides(calendar, day)
    if day < calendar.n_days and calendar.wandering_min[day]:
        params = wandering_params(calendar, profile, day)
        forced = tuple(ForcedActivity(params, d)
                       for d in calendar.wandering_min[day])
        delta = replace(delta, forced=forced)
    return delta


# ---------------------------------------------------------------------------
# forgetting

@dataclass(frozen=True)
class StayRecord:
    """Occupancy of one place; used to resolve forgetting intervals."""

    instance_id: int
    name: str
    place: str
    appliances: tuple[str, ...]
    start_ds: int
    end_ds: int


def stays_from_sequence(seq, place_of: dict[str, str]) -> list[StayRecord]:
    return [StayRecord(a.instance_id, a.name.label,
                       place_of.get(a.name.label, ""), a.appliances,
                       a.start.ds, a.end.ds)
            for a in seq.logical_items()]


def plan_forgetting(day: int, stays: list[StayRecord],
                    rng: np.random.Generator,
                    horizon_ds: int) -> tuple[AnomalyLabel, str] | None:
    """Resolve one forgetting event on ``day`` against concrete stays.

    Picks a uniformly random appliance-using stay of the day; one of its
    appliances (random when several) stays on from the stay's end until
    the next stay at the same place, or the end of the run.  Returns None
    when the day offers no appliance-using stay.
    """
    lo, hi = day * DS_PER_DAY, (day + 1) * DS_PER_DAY
    candidates = [i for i, s in enumerate(stays)
                  if s.appliances and lo <= s.start_ds < hi]
    if not candidates:
        return None
    idx = candidates[int(rng.integers(0, len(candidates)))]
    stay = stays[idx]
    appliance = stay.appliances[int(rng.integers(0, len(stay.appliances)))]
    end_ds = horizon_ds
    for later in stays[idx + 1:]:
        if later.place == stay.place:
            end_ds = later.start_ds
            break
    if end_ds <= stay.end_ds:
        return None
    label = AnomalyLabel("forgetting", SimTime(stay.end_ds), SimTime(end_ds),
                         {"appliance": appliance, "activity": stay.name})
    return label, appliance


# ---------------------------------------------------------------------------
# profile files

_LAW_SECTIONS = {
    "wandering": ("wandering_freq", "wandering_duration_min"),
    "forgetting": ("forgetting_freq", None),
    "fall_while_walking": ("fall_walking_freq", None),
    "fall_while_standing": ("fall_standing_freq", None),
}


def load_profile(path: str | Path) -> AnomalyProfile:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    if not parser.read(path):
        raise ValueError(f"cannot read profile file {path}")
    kwargs: dict = {}
    enabled = set()

    def flag(section):
        if parser.getboolean(section, "enabled", fallback=True):
            enabled.add(section)

    if parser.has_section("mmse"):
        kwargs["mmse_initial"] = parser.getfloat("mmse", "initial",
                                                 fallback=29.0)
        kwargs["mmse_drift"] = parser.getfloat("mmse", "drift",
                                               fallback=DEFAULT_DRIFT)
        kwargs["mmse_noise_sd"] = parser.getfloat("mmse", "noise_sd",
                                                  fallback=1.0)
    for section, (freq_attr, dur_attr) in _LAW_SECTIONS.items():
        if not parser.has_section(section):
            enabled.add(section)
            continue
        flag(section)
        kwargs[freq_attr] = AffineLaw(
            parser.getfloat(section, "freq_slope"),
            parser.getfloat(section, "freq_intercept"))
        if dur_attr is not None:
            kwargs[dur_attr] = AffineLaw(
                parser.getfloat(section, "duration_slope"),
                parser.getfloat(section, "duration_intercept"))
    for section, freq_attr, dur_attr in (
            ("housebound", "housebound_freq", "housebound_duration_days"),
            ("semi_bedridden", "semi_bedridden_freq",
             "semi_bedridden_duration_days")):
        if not parser.has_section(section):
            enabled.add(section)
            continue
        flag(section)
        kwargs[freq_attr] = parser.getfloat(section, "freq_per_month")
        kwargs[dur_attr] = parser.getfloat(section, "duration_days")
    return AnomalyProfile(enabled=frozenset(enabled), **kwargs)


def default_profile_path() -> Path:
    return Path(resources.files("eldersim").joinpath("data/default_anomaly.ini"))
