"""Binary sensor sampling and the change-only log.

The master clock runs at 10 Hz (one tick per 0.1 s); cost sensors are
evaluated on every tenth tick and hold their value in between, so all
samplings share one origin and there is no clock skew.  PIR sensors read 1
when the moving body disc touches their detection disc and drop while the
resident stays still; pressure sensors read 1 whenever the body disc
overlaps the mat; cost sensors read 1 while the linked appliance is in use
(by an activity or a pending forgetting interval).

The full sample matrix is never materialized for long runs: activations
are derived per timeline segment in closed form, and only state changes
are stored, which is also the export format.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .floor_plan import SensorSpec
from .timeline import Stay, Timeline, Walk
from .trajectory import AgentModel, Trajectory

SAMPLE_PERIOD_S = 0.1
COST_EVERY_TICKS = 10


class SensorFrame(NamedTuple):
    index: int
    states: np.ndarray


@dataclass
class CompressedLog:
    """Change-only record: the first frame plus every differing successor."""

    indices: np.ndarray          # int64 sample indices, strictly increasing
    frames: np.ndarray           # (K, N_b) uint8
    n_samples: int
    period_s: float = SAMPLE_PERIOD_S

    @property
    def n_sensors(self) -> int:
        return self.frames.shape[1]

    def validate(self) -> None:
        if self.n_samples == 0:
            if len(self.indices):
                raise ValueError("malformed log: frames but no samples")
            return
        if len(self.indices) == 0 or self.indices[0] != 0:
            raise ValueError("malformed log: first frame missing")
        if np.any(np.diff(self.indices) <= 0):
            raise ValueError("malformed log: indices not increasing")
        if self.indices[-1] >= self.n_samples:
            raise ValueError("malformed log: index beyond sample count")
        if len(self.frames) != len(self.indices):
            raise ValueError("malformed log: frame/index count mismatch")
        if len(self.frames) > 1 and not np.all(
                np.any(self.frames[1:] != self.frames[:-1], axis=1)):
            raise ValueError("malformed log: stored frame equals predecessor")

    def iter_frames(self) -> Iterable[SensorFrame]:
        for i, row in zip(self.indices, self.frames):
            yield SensorFrame(int(i), row)


def compress(frames: np.ndarray, period_s: float = SAMPLE_PERIOD_S
             ) -> CompressedLog:
    """Keep the first frame and every frame differing from its predecessor."""
    frames = np.asarray(frames, dtype=np.uint8)
    n = frames.shape[0]
    if n == 0:
        return CompressedLog(np.empty(0, dtype=np.int64),
                             frames.reshape(0, frames.shape[1] if
                                            frames.ndim == 2 else 0), 0,
                             period_s)
    changed = np.any(frames[1:] != frames[:-1], axis=1)
    indices = np.concatenate([[0], np.nonzero(changed)[0] + 1]).astype(np.int64)
    return CompressedLog(indices, frames[indices].copy(), n, period_s)


def decompress(log: CompressedLog) -> np.ndarray:
    """Reconstruct the full matrix by holding the last stored vector."""
    log.validate()
    if log.n_samples == 0:
        return np.empty((0, log.frames.shape[1] if log.frames.ndim == 2
                         else 0), dtype=np.uint8)
    counts = np.diff(np.append(log.indices, log.n_samples))
    return np.repeat(log.frames, counts, axis=0)


# ---------------------------------------------------------------------------
# event-driven sampling

def _point_cover_interval(x: float, y: float, t0: int, t1: int,
                          sensor_x: float, sensor_y: float,
                          reach: float) -> tuple[int, int] | None:
    dx, dy = x - sensor_x, y - sensor_y
    if dx * dx + dy * dy <= reach * reach:
        return (t0, t1)
    return None


def _segment_positions(a: np.ndarray, b: np.ndarray, t0: float, t1: float,
                       ticks: np.ndarray) -> np.ndarray:
    u = (ticks - t0) / (t1 - t0)
    return a[None, :] + u[:, None] * (b - a)[None, :]


def _walk_cover_ticks(traj: Trajectory, sx: float, sy: float, reach: float,
                      skip_holds: bool) -> list[tuple[int, int]]:
    """Closed tick intervals where the interpolated body covers a sensor.

    Interval edges come from quadratic roots; each edge tick is re-checked
    with the same interpolation the per-tick oracle uses, so boundary
    rounding can never flip a sample.
    """
    T = traj.times_ds
    P = traj.points.astype(np.float64)
    a = P[:-1]
    b = P[1:]
    t0 = T[:-1].astype(np.float64)
    t1 = T[1:].astype(np.float64)
    hold_set = set(traj.holds)
    seg_hold = np.array([(int(T[i]), int(T[i + 1])) in hold_set
                         for i in range(len(T) - 1)]) if traj.holds else \
        np.zeros(len(T) - 1, dtype=bool)

    d = b - a
    f = a - np.array([sx, sy])
    qa = np.einsum("ij,ij->i", d, d)
    qb = 2.0 * np.einsum("ij,ij->i", f, d)
    qc = np.einsum("ij,ij->i", f, f) - reach * reach

    out: list[tuple[int, int]] = []
    moving = qa > 0
    if skip_holds:
        consider = moving & ~seg_hold
    else:
        consider = ~seg_hold
    # stationary (non-hold) segments: covered iff the fixed point is in reach
    stat = consider & ~moving
    for i in np.nonzero(stat)[0]:
        if qc[i] <= 0:
            out.append((int(t0[i]), int(t1[i])))
    mov = consider & moving
    disc = qb * qb - 4.0 * qa * qc
    for i in np.nonzero(mov & (disc >= 0))[0]:
        root = disc[i] ** 0.5
        u_lo = (-qb[i] - root) / (2 * qa[i])
        u_hi = (-qb[i] + root) / (2 * qa[i])
        if u_hi < 0 or u_lo > 1:
            continue
        u_lo, u_hi = max(u_lo, 0.0), min(u_hi, 1.0)
        lo = int(np.ceil(t0[i] + u_lo * (t1[i] - t0[i]) - 1e-9))
        hi = int(np.floor(t0[i] + u_hi * (t1[i] - t0[i]) + 1e-9))
        lo = max(lo, int(t0[i]))
        hi = min(hi, int(t1[i]))
        # re-check edges against the canonical interpolation
        while lo <= hi:
            pos = a[i] + (lo - t0[i]) / (t1[i] - t0[i]) * d[i]
            if (pos[0] - sx) ** 2 + (pos[1] - sy) ** 2 <= reach * reach:
                break
            lo += 1
        while hi >= lo:
            pos = a[i] + (hi - t0[i]) / (t1[i] - t0[i]) * d[i]
            if (pos[0] - sx) ** 2 + (pos[1] - sy) ** 2 <= reach * reach:
                break
            hi -= 1
        if lo <= hi:
            out.append((lo, hi))
    return out


def _motion_ranges(traj: Trajectory) -> list[tuple[int, int]]:
    """Closed tick ranges with nonzero displacement since the previous tick."""
    lo, hi = int(traj.times_ds[0]) + 1, int(traj.times_ds[-1])
    if hi < lo:
        return []
    ranges = [(lo, hi)]
    still = np.all(traj.points[1:] == traj.points[:-1], axis=1)
    for i in np.nonzero(still)[0]:
        ranges = _subtract(ranges, int(traj.times_ds[i]) + 1,
                           int(traj.times_ds[i + 1]))
    return ranges


def _subtract(ranges: list[tuple[int, int]], s: int,
              e: int) -> list[tuple[int, int]]:
    out = []
    for a, b in ranges:
        if e < a or s > b:
            out.append((a, b))
            continue
        if a < s:
            out.append((a, s - 1))
        if e < b:
            out.append((e + 1, b))
    return out


def _intersect(xs: list[tuple[int, int]],
               ys: list[tuple[int, int]]) -> list[tuple[int, int]]:
    out = []
    i = j = 0
    while i < len(xs) and j < len(ys):
        lo = max(xs[i][0], ys[j][0])
        hi = min(xs[i][1], ys[j][1])
        if lo <= hi:
            out.append((lo, hi))
        if xs[i][1] < ys[j][1]:
            i += 1
        else:
            j += 1
    return out


def _union_halfopen(intervals: list[tuple[int, int]]) -> list[tuple[int, int]]:
    out: list[list[int]] = []
    for a, b in sorted(intervals):
        if b <= a:
            continue
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [(a, b) for a, b in out]


def simulate_sensors(sensors: list[SensorSpec], timeline: Timeline,
                     agent: AgentModel | None = None) -> CompressedLog:
    """Sample every sensor over the timeline into a change-only log."""
    agent = agent or AgentModel()
    horizon = timeline.horizon_ds
    n_b = len(sensors)
    on_intervals: list[list[tuple[int, int]]] = [[] for _ in sensors]

    walks = timeline.walks()
    stays = timeline.stays()
    for j, spec in enumerate(sensors):
        if spec.kind == "COST":
            for a, b in timeline.appliance_intervals.get(
                    spec.linked_appliance, ()):
                lo = -(-a // COST_EVERY_TICKS) * COST_EVERY_TICKS
                hi = -(-b // COST_EVERY_TICKS) * COST_EVERY_TICKS
                if hi > lo:
                    on_intervals[j].append((lo, hi))
            continue
        sx, sy = spec.position.x, spec.position.y
        reach = spec.radius + agent.body_radius
        reach_fall = spec.radius + agent.fall_body_radius
        if spec.kind == "PIR":
            for w in walks:
                cover = _walk_cover_ticks(w.traj, sx, sy, reach,
                                          skip_holds=True)
                for lo, hi in _intersect(cover, _motion_ranges(w.traj)):
                    on_intervals[j].append((lo, hi + 1))
        else:  # PR
            for s in stays:
                iv = _point_cover_interval(s.location.x, s.location.y,
                                           s.t0, s.t1, sx, sy, reach)
                if iv is not None:
                    on_intervals[j].append(iv)
            for w in walks:
                for lo, hi in _walk_cover_ticks(w.traj, sx, sy, reach,
                                                skip_holds=True):
                    on_intervals[j].append((lo, hi + 1))
                for h0, h1 in w.traj.holds:
                    idx = int(np.searchsorted(w.traj.times_ds, h0))
                    hx, hy = w.traj.points[idx]
                    # fall posture (enlarged radius) holds from the first
                    # sample strictly after the fall instant to the last
                    # one strictly before standing back up
                    iv = _point_cover_interval(float(hx), float(hy),
                                               h0 + 1, h1, sx, sy, reach_fall)
                    if iv is not None:
                        on_intervals[j].append(iv)
                    iv = _point_cover_interval(float(hx), float(hy),
                                               h0, h0 + 1, sx, sy, reach)
                    if iv is not None:
                        on_intervals[j].append(iv)

    edges_t: list[int] = []
    edges_j: list[int] = []
    edges_v: list[int] = []
    for j in range(n_b):
        clipped = [(max(a, 0), min(b, horizon)) for a, b in on_intervals[j]]
        for a, b in _union_halfopen(clipped):
            edges_t += [a, b]
            edges_j += [j, j]
            edges_v += [1, 0]
    order = np.lexsort((np.arange(len(edges_t)), np.array(edges_t)))

    state = np.zeros(n_b, dtype=np.uint8)
    out_idx: list[int] = [0]
    out_frames: list[np.ndarray] = []
    et = np.array(edges_t)[order] if len(edges_t) else np.empty(0, int)
    ej = np.array(edges_j)[order] if len(edges_t) else np.empty(0, int)
    ev = np.array(edges_v)[order] if len(edges_t) else np.empty(0, int)
    pos = 0
    while pos < len(et) and et[pos] <= 0:
        state[ej[pos]] = ev[pos]
        pos += 1
    out_frames.append(state.copy())
    while pos < len(et):
        tick = et[pos]
        if tick >= horizon:
            break
        while pos < len(et) and et[pos] == tick:
            state[ej[pos]] = ev[pos]
            pos += 1
        if np.any(state != out_frames[-1]):
            out_idx.append(int(tick))
            out_frames.append(state.copy())
    log = CompressedLog(np.array(out_idx, dtype=np.int64),
                        np.stack(out_frames) if out_frames else
                        np.empty((0, n_b), dtype=np.uint8),
                        horizon)
    log.validate()
    return log
