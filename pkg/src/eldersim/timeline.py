"""Stitch a schedule and an anomaly calendar into one continuous timeline.

The resident is stationary during activities and walks between them; walks
end exactly when the next activity starts.  Each walk eats the tail of the
preceding activity (which keeps at least the minimum duration), wandering
activities are whole walks through random staging points, and fall holds
push the following activity back by the hold length.  Any overrun cascades
forward as a time debt that later activities absorb against their planned
end times, so the timeline stays contiguous.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import DS_PER_DAY, ActivitySequence, AnomalyLabel, GridLocation, SimTime
from .anomaly import AnomalyCalendar, plan_forgetting, StayRecord
from .floor_plan import FloorPlan
from .trajectory import (
    AgentModel,
    PathWeights,
    Trajectory,
    _planner,
    inject_fall,
    plan_wandering,
    timestamp_path,
    walk_time_ds,
)

WANDERING_ACTIVITY = "wandering"

TRAJECTORY_STREAM = 2
FALL_STREAM = 3
FORGET_STREAM = 4


def _stream(seed: int, *key: int) -> np.random.Generator:
    entropy = (seed & 0xFFFFFFFFFFFFFFFF,) + key
    return np.random.default_rng(np.random.SeedSequence(entropy))


@dataclass
class Stay:
    t0: int
    t1: int
    location: GridLocation
    name: str
    place: str
    appliances: tuple[str, ...]
    instance_id: int


@dataclass
class Walk:
    traj: Trajectory
    day: int


@dataclass
class Timeline:
    segments: list            # Stay and Walk, in time order
    labels: list[AnomalyLabel]
    appliance_intervals: dict[str, list[tuple[int, int]]]
    horizon_ds: int
    notes: list[str] = field(default_factory=list)

    def stays(self) -> list[Stay]:
        return [s for s in self.segments if isinstance(s, Stay)]

    def walks(self) -> list[Walk]:
        return [s for s in self.segments if isinstance(s, Walk)]


def _walk_events(logical) -> list[tuple[str, int, int]]:
    """Schedule-determined walk events: ('wander'|'transit', index, day)."""
    events = []
    for k, act in enumerate(logical):
        if act.name.label == WANDERING_ACTIVITY:
            events.append(("wander", k, act.start.day))
    for k in range(len(logical) - 1):
        a, b = logical[k], logical[k + 1]
        if WANDERING_ACTIVITY in (a.name.label, b.name.label):
            continue
        if a.location != b.location:
            events.append(("transit", k, b.start.day))
    return events


def stitch_timeline(seq: ActivitySequence, plan: FloorPlan, agent: AgentModel,
                    calendar: AnomalyCalendar | None, seed: int,
                    place_of: dict[str, str], epsilon_ds: int = 300,
                    weights: PathWeights | None = None) -> Timeline:
    """Build the full motion timeline, fall labels included."""
    planner = _planner(plan, agent, weights)
    logical = seq.logical_items()
    horizon_ds = seq.day_count * DS_PER_DAY
    notes: list[str] = []
    labels: list[AnomalyLabel] = []

    # pre-assign fall events to the day's walk events
    events = _walk_events(logical)
    events_by_day: dict[int, list[int]] = {}
    for eid, (_, _, day) in enumerate(events):
        events_by_day.setdefault(day, []).append(eid)
    falls_at: dict[int, list[tuple[str, np.random.Generator]]] = {}
    if calendar is not None:
        for day, kinds in enumerate(calendar.falls[:seq.day_count]):
            if not kinds:
                continue
            rng = _stream(seed, FALL_STREAM, day)
            todays = events_by_day.get(day, [])
            for i, kind in enumerate(kinds):
                if not todays:
                    notes.append(f"day {day}: no walk for {kind}; dropped")
                    continue
                eid = todays[int(rng.integers(0, len(todays)))]
                falls_at.setdefault(eid, []).append(
                    (kind, _stream(seed, FALL_STREAM, day, i + 1)))
    event_of: dict[tuple[str, int], int] = {
        (kind, k): eid for eid, (kind, k, _) in enumerate(events)}

    segments: list = []
    wander_rngs: dict[int, np.random.Generator] = {}
    pos = logical[0].location
    t = 0

    def emit_walk(traj: Trajectory, eid: int, day: int) -> Trajectory:
        for kind, fall_rng in falls_at.get(eid, ()):
            traj, label = inject_fall(traj, kind, fall_rng)
            labels.append(label)
        segments.append(Walk(traj, day))
        return traj

    for k, act in enumerate(logical):
        nxt = logical[k + 1] if k + 1 < len(logical) else None
        eff_start = max(t, act.start.ds)
        if act.name.label == WANDERING_ACTIVITY:
            target = nxt.location if nxt is not None else pos
            requested_ds = max(act.end.ds - eff_start, 10)
            day = act.start.day
            rng = wander_rngs.setdefault(
                day, _stream(seed, TRAJECTORY_STREAM, day))
            traj = plan_wandering(plan, pos, target, SimTime(eff_start),
                                  requested_ds / 10, agent, rng, weights)
            traj = emit_walk(traj, event_of[("wander", k)], day)
            labels.append(AnomalyLabel(
                WANDERING_ACTIVITY, SimTime(eff_start),
                SimTime(traj.end_ds),
                {"requested_s": requested_ds / 10,
                 "walk_s": traj.duration_ds / 10}))
            t = traj.end_ds
            pos = target
            continue

        stay_loc = act.location
        if nxt is None:
            end = max(horizon_ds, eff_start + 1)
            segments.append(Stay(eff_start, end, stay_loc, act.name.label,
                                 place_of.get(act.name.label, ""),
                                 act.appliances, act.instance_id))
            t = end
            break
        if nxt.name.label == WANDERING_ACTIVITY or nxt.location == stay_loc:
            end = max(nxt.start.ds, eff_start + epsilon_ds)
            segments.append(Stay(eff_start, end, stay_loc, act.name.label,
                                 place_of.get(act.name.label, ""),
                                 act.appliances, act.instance_id))
            t = end
            pos = stay_loc
            continue
        cells = planner.cells(stay_loc, nxt.location)
        t_walk = walk_time_ds(cells * planner.pitch, agent)
        walk_start = max(nxt.start.ds - t_walk, eff_start + epsilon_ds)
        segments.append(Stay(eff_start, walk_start, stay_loc, act.name.label,
                             place_of.get(act.name.label, ""),
                             act.appliances, act.instance_id))
        path = [GridLocation(int(ix) * planner.pitch, int(iy) * planner.pitch)
                for ix, iy in cells]
        traj = timestamp_path(path, agent, SimTime(walk_start + t_walk))
        traj = emit_walk(traj, event_of[("transit", k)], nxt.start.day)
        t = traj.end_ds
        pos = nxt.location

    # appliance usage: stays plus forgetting extensions
    appliance_intervals: dict[str, list[tuple[int, int]]] = {}
    stays = [s for s in segments if isinstance(s, Stay)]
    for s in stays:
        for a in s.appliances:
            appliance_intervals.setdefault(a, []).append((s.t0, s.t1))
    if calendar is not None:
        records = [StayRecord(s.instance_id, s.name, s.place, s.appliances,
                              s.t0, s.t1) for s in stays]
        for day, count in enumerate(
                calendar.forgetting_counts[:seq.day_count]):
            if not count:
                continue
            rng = _stream(seed, FORGET_STREAM, day)
            for _ in range(int(count)):
                planned = plan_forgetting(day, records, rng, horizon_ds)
                if planned is None:
                    notes.append(f"day {day}: no appliance activity for "
                                 f"forgetting; dropped")
                    continue
                label, appliance = planned
                labels.append(label)
                appliance_intervals.setdefault(appliance, []).append(
                    (label.start.ds, label.end.ds))
    for name, ivs in appliance_intervals.items():
        appliance_intervals[name] = _merge(ivs)

    labels.sort(key=lambda l: (l.start.ds, l.kind))
    return Timeline(segments, labels, appliance_intervals, horizon_ds, notes)


def _merge(intervals: list[tuple[int, int]]) -> list[tuple[int, int]]:
    out: list[list[int]] = []
    for a, b in sorted(intervals):
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [(a, b) for a, b in out]
