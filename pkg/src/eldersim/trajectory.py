"""Walking paths between activities: planning, timing, wandering, falls.

Paths are searched on the house grid with an additive cost: travelled
length, a discomfort penalty for cells close to furniture or walls, a
penalty per 45-degree turn, and a penalty for deviating from the preferred
stride.  The weights are configurable; topology and arrival times are what
the rest of the simulator relies on.  Timestamps are assigned from the
arrival instant backward at a fixed walking speed, so the resident always
reaches the next activity exactly when it starts.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .core import DS_PER_SECOND, AnomalyLabel, GridLocation, SimTime
from .floor_plan import BODY_RADIUS_CM, FloorPlan, walkable_mask

log = logging.getLogger(__name__)


class PathError(RuntimeError):
    """Raised when no collision-free path exists between two points."""


@dataclass(frozen=True)
class AgentModel:
    walking_speed: float = 68.75      # cm/s
    body_radius: float = BODY_RADIUS_CM
    fall_body_radius: float = 40.0
    stride: float = 40.0              # preferred step length, cm

    def __post_init__(self):
        if self.walking_speed <= 0:
            raise ValueError("walking speed must be positive")


@dataclass(frozen=True)
class PathWeights:
    length: float = 1.0               # per cm travelled
    proximity: float = 0.5            # per cell within `proximity_range` of an obstacle
    turn: float = 0.2                 # per 45 degrees of turning
    stride: float = 0.1               # per cm of deviation from the stride
    proximity_range: float = 30.0


@dataclass
class Trajectory:
    """Timestamped body-center path; times in ds, positions in cm."""

    times_ds: np.ndarray
    points: np.ndarray               # (N, 2) int
    purpose: str = "normal"
    holds: tuple[tuple[int, int], ...] = ()

    @property
    def start_ds(self) -> int:
        return int(self.times_ds[0])

    @property
    def end_ds(self) -> int:
        return int(self.times_ds[-1])

    @property
    def duration_ds(self) -> int:
        return self.end_ds - self.start_ds

    def locations(self) -> list[GridLocation]:
        return [GridLocation(int(x), int(y)) for x, y in self.points]


_SQRT2 = math.sqrt(2.0)
_DX = np.array([1, 1, 0, -1, -1, -1, 0, 1], dtype=np.int64)
_DY = np.array([0, 1, 1, 1, 0, -1, -1, -1], dtype=np.int64)
_STEP = np.array([1.0, _SQRT2, 1.0, _SQRT2, 1.0, _SQRT2, 1.0, _SQRT2])


@njit(cache=True)
def _astar_grid(mask, near, sx, sy, gx, gy, w_len, w_prox, w_turn, w_stride,
                stride_cm, pitch):
    """A* over (cell, heading) states; returns (K, 2) cell indices or (0, 2)."""
    nx, ny = mask.shape
    n_states = nx * ny * 9
    g = np.full(n_states, np.inf)
    parent = np.full(n_states, -1, dtype=np.int64)

    cap = 4 * n_states
    heap_key = np.empty(cap)
    heap_val = np.empty(cap, dtype=np.int64)
    size = 0

    start = (sx * ny + sy) * 9 + 8
    g[start] = 0.0
    h0 = w_len * pitch * math.hypot(gx - sx, gy - sy)
    heap_key[0] = h0
    heap_val[0] = start
    size = 1

    goal_state = -1
    while size > 0:
        top_key = heap_key[0]
        state = heap_val[0]
        size -= 1
        heap_key[0] = heap_key[size]
        heap_val[0] = heap_val[size]
        i = 0
        while True:  # sift down
            left = 2 * i + 1
            if left >= size:
                break
            child = left
            if left + 1 < size and heap_key[left + 1] < heap_key[left]:
                child = left + 1
            if heap_key[child] >= heap_key[i]:
                break
            heap_key[i], heap_key[child] = heap_key[child], heap_key[i]
            heap_val[i], heap_val[child] = heap_val[child], heap_val[i]
            i = child
        cell = state // 9
        heading = state % 9
        cx = cell // ny
        cy = cell % ny
        h_here = w_len * pitch * math.hypot(gx - cx, gy - cy)
        if top_key > g[state] + h_here + 1e-9:
            continue  # stale heap entry
        if cx == gx and cy == gy:
            goal_state = state
            break
        for d in range(8):
            tx = cx + _DX[d]
            ty = cy + _DY[d]
            if tx < 0 or tx >= nx or ty < 0 or ty >= ny or not mask[tx, ty]:
                continue
            step_cm = _STEP[d] * pitch
            cost = w_len * step_cm + w_stride * abs(step_cm - stride_cm)
            if near[tx, ty]:
                cost += w_prox
            if heading != 8:
                turn = abs(heading - d)
                if turn > 4:
                    turn = 8 - turn
                cost += w_turn * turn
            nstate = (tx * ny + ty) * 9 + d
            ng = g[state] + cost
            if ng < g[nstate]:
                g[nstate] = ng
                parent[nstate] = state
                if size >= cap:
                    new_cap = cap * 2
                    nk = np.empty(new_cap)
                    nv = np.empty(new_cap, dtype=np.int64)
                    nk[:size] = heap_key[:size]
                    nv[:size] = heap_val[:size]
                    heap_key = nk
                    heap_val = nv
                    cap = new_cap
                key = ng + w_len * pitch * math.hypot(gx - tx, gy - ty)
                i = size
                heap_key[i] = key
                heap_val[i] = nstate
                size += 1
                while i > 0:  # sift up
                    up = (i - 1) // 2
                    if heap_key[up] <= heap_key[i]:
                        break
                    heap_key[i], heap_key[up] = heap_key[up], heap_key[i]
                    heap_val[i], heap_val[up] = heap_val[up], heap_val[i]
                    i = up

    if goal_state < 0:
        return np.empty((0, 2), dtype=np.int64)
    length = 0
    state = goal_state
    while state >= 0:
        length += 1
        state = parent[state]
    out = np.empty((length, 2), dtype=np.int64)
    state = goal_state
    for k in range(length - 1, -1, -1):
        cell = state // 9
        out[k, 0] = cell // ny
        out[k, 1] = cell % ny
        state = parent[state]
    return out


class PathPlanner:
    """Per-plan search state: walkable mask, proximity mask, path cache."""

    def __init__(self, plan: FloorPlan, body_radius: float = BODY_RADIUS_CM,
                 weights: PathWeights | None = None, stride_cm: float = 40.0):
        self.plan = plan
        self.weights = weights or PathWeights()
        self.stride_cm = stride_cm
        self.pitch = plan.grid_pitch
        self.mask = walkable_mask(plan, body_radius)
        self.near = self._near_mask(self.weights.proximity_range)
        self._cache: dict[tuple[int, int, int, int], np.ndarray] = {}
        ix, iy = np.nonzero(self.mask)
        self._open_cells = np.stack([ix, iy], axis=1)

    def _near_mask(self, rng_cm: float) -> np.ndarray:
        nx, ny = self.mask.shape
        xs = np.arange(nx)[:, None] * self.pitch
        ys = np.arange(ny)[None, :] * self.pitch
        dist = np.minimum.reduce([
            xs + 0.0 * ys, self.plan.width - xs + 0.0 * ys,
            0.0 * xs + ys, 0.0 * xs + self.plan.height - ys])
        for _, r in self.plan.furniture:
            dx = np.maximum(np.maximum(r.x1 - xs, xs - r.x2), 0.0)
            dy = np.maximum(np.maximum(r.y1 - ys, ys - r.y2), 0.0)
            dist = np.minimum(dist, np.sqrt(dx * dx + dy * dy))
        for w in self.plan.walls:
            vx, vy = w.x2 - w.x1, w.y2 - w.y1
            norm = vx * vx + vy * vy
            t = np.clip(((xs - w.x1) * vx + (ys - w.y1) * vy)
                        / (norm if norm else 1.0), 0, 1)
            dx, dy = xs - (w.x1 + t * vx), ys - (w.y1 + t * vy)
            dist = np.minimum(dist, np.sqrt(dx * dx + dy * dy))
        return dist < rng_cm

    def _to_cell(self, p: GridLocation) -> tuple[int, int]:
        if p.x % self.pitch or p.y % self.pitch:
            raise ValueError(f"{p} is not grid-aligned (pitch {self.pitch})")
        return p.x // self.pitch, p.y // self.pitch

    def cells(self, start: GridLocation, goal: GridLocation) -> np.ndarray:
        sx, sy = self._to_cell(start)
        gx, gy = self._to_cell(goal)
        key = (sx, sy, gx, gy)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        nx, ny = self.mask.shape
        if not (0 <= sx < nx and 0 <= sy < ny and 0 <= gx < nx and 0 <= gy < ny):
            raise PathError(f"endpoint outside grid: {start} -> {goal}")
        if not self.mask[sx, sy] or not self.mask[gx, gy]:
            raise PathError(f"unreachable: endpoint not walkable "
                            f"({start} -> {goal})")
        w = self.weights
        path = _astar_grid(self.mask, self.near, sx, sy, gx, gy,
                           w.length, w.proximity, w.turn, w.stride,
                           float(self.stride_cm), float(self.pitch))
        if path.shape[0] == 0:
            raise PathError(f"unreachable: no path {start} -> {goal}")
        self._cache[key] = path
        return path

    def random_open_cell(self, rng: np.random.Generator) -> GridLocation:
        i = int(rng.integers(0, self._open_cells.shape[0]))
        ix, iy = self._open_cells[i]
        return GridLocation(int(ix) * self.pitch, int(iy) * self.pitch)


_PLANNERS: dict[tuple[int, float, float], PathPlanner] = {}


def _planner(plan: FloorPlan, agent: AgentModel,
             weights: PathWeights | None) -> PathPlanner:
    key = (id(plan), agent.body_radius, agent.stride)
    planner = _PLANNERS.get(key)
    if planner is None or planner.plan is not plan or \
            (weights is not None and planner.weights != weights):
        planner = PathPlanner(plan, agent.body_radius, weights, agent.stride)
        if len(_PLANNERS) > 8:
            _PLANNERS.clear()
        _PLANNERS[key] = planner
    return planner


def plan_path(plan: FloorPlan, start: GridLocation, goal: GridLocation,
              agent: AgentModel, weights: PathWeights | None = None
              ) -> list[GridLocation]:
    """Collision-free grid path with exact endpoints; raises PathError."""
    planner = _planner(plan, agent, weights)
    cells = planner.cells(start, goal)
    pitch = planner.pitch
    return [GridLocation(int(ix) * pitch, int(iy) * pitch)
            for ix, iy in cells]


def _path_lengths(points: np.ndarray) -> np.ndarray:
    if points.shape[0] < 2:
        return np.zeros(points.shape[0])
    diffs = np.diff(points.astype(np.float64), axis=0)
    return np.concatenate([[0.0], np.cumsum(np.hypot(diffs[:, 0],
                                                     diffs[:, 1]))])


def walk_time_ds(points: np.ndarray, agent: AgentModel) -> int:
    lengths = _path_lengths(points)
    return round(lengths[-1] / agent.walking_speed * DS_PER_SECOND)


def timestamp_path(path: list[GridLocation], agent: AgentModel,
                   arrival: SimTime, max_duration_ds: int | None = None
                   ) -> Trajectory:
    """Assign timestamps backward from the arrival instant.

    The last point gets exactly ``arrival``; earlier points are placed at
    cumulative distance over walking speed, rounded to the 0.1 s clock so
    rounding never accumulates along the path.
    """
    if not path:
        raise ValueError("path must contain at least one point")
    points = np.array([[p.x, p.y] for p in path], dtype=np.int64)
    lengths = _path_lengths(points)
    total_ds = round(lengths[-1] / agent.walking_speed * DS_PER_SECOND)
    if max_duration_ds is not None and total_ds > max_duration_ds:
        raise PathError(
            f"walk needs {total_ds / 10:.1f} s but only "
            f"{max_duration_ds / 10:.1f} s are free before arrival")
    remaining = (lengths[-1] - lengths) / agent.walking_speed
    times = arrival.ds - np.round(remaining * DS_PER_SECOND).astype(np.int64)
    return Trajectory(times, points)


def plan_wandering(plan: FloorPlan, start: GridLocation, goal: GridLocation,
                   start_time: SimTime, duration_s: float, agent: AgentModel,
                   rng: np.random.Generator,
                   weights: PathWeights | None = None) -> Trajectory:
    """Roam through random staging points, then head to the goal.

    Staging points (at least one) are appended until the whole walk, final
    leg included, lasts at least ``duration_s``; timestamps run forward
    from ``start_time``.
    """
    if duration_s <= 0:
        raise ValueError("wandering duration must be positive")
    planner = _planner(plan, agent, weights)
    duration_ds = round(duration_s * DS_PER_SECOND)
    tour = [np.array([[start.x, start.y]], dtype=np.int64)]
    tour_cm = 0.0
    current = start
    for _ in range(10000):
        staging = planner.random_open_cell(rng)
        try:
            hop = planner.cells(current, staging)
        except PathError:
            continue  # disconnected pocket; resample
        pts = hop * planner.pitch
        tour.append(pts[1:])
        tour_cm += _path_lengths(pts)[-1]
        current = staging
        leg = planner.cells(current, goal) * planner.pitch
        leg_cm = _path_lengths(leg)[-1]
        total_ds = round((tour_cm + leg_cm) / agent.walking_speed
                         * DS_PER_SECOND)
        if total_ds >= duration_ds:
            tour.append(leg[1:])
            break
    else:
        raise PathError("wandering could not reach the requested duration")
    points = np.concatenate(tour, axis=0)
    lengths = _path_lengths(points)
    times = start_time.ds + np.round(
        lengths / agent.walking_speed * DS_PER_SECOND).astype(np.int64)
    return Trajectory(times, points, purpose="wandering")


def inject_fall(traj: Trajectory, kind: str, rng: np.random.Generator,
                hold_s: float = 30.0) -> tuple[Trajectory, AnomalyLabel]:
    """Freeze the walker for ``hold_s`` seconds and shift the rest.

    A fall while standing holds at the first point; a fall while walking
    holds at a uniformly random interior point.  On a two-point path there
    is no interior, so the fall degrades to the standing variant.
    """
    n = traj.points.shape[0]
    if kind == "fall_while_walking" and n < 3:
        log.info("fall while walking on a %d-point path; treating as "
                 "fall while standing", n)
        kind = "fall_while_standing"
    if kind == "fall_while_standing":
        idx = 0
    elif kind == "fall_while_walking":
        idx = int(rng.integers(1, n - 1))
    else:
        raise ValueError(f"unknown fall kind {kind!r}")
    hold_ds = round(hold_s * DS_PER_SECOND)
    t0 = int(traj.times_ds[idx])
    times = np.concatenate([traj.times_ds[:idx + 1], [t0 + hold_ds],
                            traj.times_ds[idx + 1:] + hold_ds])
    points = np.concatenate([traj.points[:idx + 1],
                             traj.points[idx:idx + 1],
                             traj.points[idx + 1:]], axis=0)
    holds = tuple(sorted(traj.holds + ((t0, t0 + hold_ds),)))
    label = AnomalyLabel(kind, SimTime(t0), SimTime(t0 + hold_ds),
                         {"x": int(traj.points[idx, 0]),
                          "y": int(traj.points[idx, 1])})
    return Trajectory(times, points, traj.purpose, holds), label
