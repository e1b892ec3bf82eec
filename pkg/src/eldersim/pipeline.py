"""End-to-end orchestration: seeded dataset runs, metrics, plot data.

One run wires the modules together: anomaly calendar, daily schedules with
per-day overrides, walking trajectories with falls and wandering, sensor
sampling, and the export bundle (activities, trajectories, change-only
sensor log, ground-truth labels, monthly scores, manifest).  All
randomness flows from one seed through named sub-streams, so runs are
bit-reproducible and toggling one anomaly leaves the other draws alone.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .anomaly import (
    AnomalyProfile,
    build_calendar,
    day_directives,
    load_profile,
    default_profile_path,
)
from .core import (
    DAYS_PER_MONTH,
    DS_PER_DAY,
    ActivitySequence,
    AnomalyLabel,
    SimTime,
    Tier,
    validate_sequence,
)
from .floor_plan import bundled_layout_path, check_zones, load_plan
from .metrics import (
    BaselineActivity,
    DayString,
    build_alphabet,
    deltas,
    ran_d,
    ran_s,
    rho_cross,
    rho_self,
    sleep_schedule_from,
    to_day_strings,
    DEFAULT_RATE_HZ,
)
from .scheduler import (
    SchedulerConfig,
    default_catalog,
    load_catalog,
    read_activities_csv,
    schedule_days,
    write_activities_csv,
)
from .sensing import simulate_sensors
from .timeline import Stay, Timeline, Walk, stitch_timeline
from .trajectory import AgentModel

ANOMALY_STREAM = 1

BUNDLE_FILES = ("activities.csv", "trajectories.csv", "sensors.csv",
                "labels.csv", "mmse.csv", "manifest.json")


class ConfigError(ValueError):
    pass


def _anomaly_rng(seed: int) -> np.random.Generator:
    key = (seed & 0xFFFFFFFFFFFFFFFF, ANOMALY_STREAM)
    return np.random.default_rng(np.random.SeedSequence(key))


@dataclass
class RunConfig:
    seed: int = 0
    days: int = 100
    layout_path: str | None = None       # None: bundled studio layout
    catalog_path: str | None = None      # None: bundled catalog
    profile_path: str | None = None      # None: bundled anomaly profile
    out_dir: str = "out"
    epsilon_s: float = 30.0
    max_retries: int = 100

    def validate(self) -> None:
        if self.days <= 0:
            raise ConfigError("horizon must be positive")
        for label, path in (("layout", self.layout_path),
                            ("catalog", self.catalog_path),
                            ("profile", self.profile_path)):
            if path is not None and not Path(path).exists():
                raise ConfigError(f"{label} file not found: {path}")

    def resolved_layout(self) -> Path:
        return Path(self.layout_path) if self.layout_path else \
            bundled_layout_path()

    def to_manifest(self) -> dict:
        def file_entry(path: Path) -> dict:
            digest = hashlib.sha256(path.read_bytes()).hexdigest()
            return {"path": str(path), "sha256": digest}

        from importlib import resources
        catalog = Path(self.catalog_path) if self.catalog_path else \
            Path(str(resources.files("eldersim")
                     .joinpath("data/default_catalog.csv")))
        profile = Path(self.profile_path) if self.profile_path else \
            default_profile_path()
        return {
            "version": __version__,
            "seed": self.seed,
            "days": self.days,
            "epsilon_s": self.epsilon_s,
            "max_retries": self.max_retries,
            "layout": file_entry(self.resolved_layout()),
            "catalog": file_entry(catalog),
            "profile": file_entry(profile),
        }

    @classmethod
    def from_manifest(cls, path: str | Path,
                      out_dir: str | None = None) -> "RunConfig":
        data = json.loads(Path(path).read_text())
        return cls(seed=data["seed"], days=data["days"],
                   layout_path=data["layout"]["path"],
                   catalog_path=data["catalog"]["path"],
                   profile_path=data["profile"]["path"],
                   out_dir=out_dir or str(Path(path).parent),
                   epsilon_s=data["epsilon_s"],
                   max_retries=data["max_retries"])


@dataclass
class RunResult:
    out_dir: Path
    sequence: ActivitySequence
    timeline: Timeline
    labels: list[AnomalyLabel]
    n_frames: int
    notes: list[str] = field(default_factory=list)

    @property
    def files(self) -> dict[str, Path]:
        return {name: self.out_dir / name for name in BUNDLE_FILES}


def _place_map(catalog) -> dict[str, str]:
    place_of = {p.name: p.place for p in catalog}
    place_of.setdefault("wandering", "walking")
    place_of.setdefault("nap", "sofa")
    place_of.setdefault("go out", "entrance")
    place_of.setdefault("use the phone", "desk")
    place_of.setdefault("rest", "sofa")
    return place_of


def run_simulation(cfg: RunConfig) -> RunResult:
    """Generate the full labeled dataset bundle on disk."""
    cfg.validate()
    plan, zone_map, sensors = load_plan(cfg.resolved_layout())
    catalog = load_catalog(cfg.catalog_path) if cfg.catalog_path else \
        default_catalog()
    profile = load_profile(cfg.profile_path) if cfg.profile_path else \
        load_profile(default_profile_path())
    place_of = _place_map(catalog)
    check_zones(zone_map, sorted(set(place_of.values())))

    n_months = max(1, math.ceil(cfg.days / DAYS_PER_MONTH))
    calendar = build_calendar(profile.mmse_process(), profile, n_months,
                              _anomaly_rng(cfg.seed))
    sched_cfg = SchedulerConfig(cfg.epsilon_s, cfg.max_retries, cfg.seed)
    seq = schedule_days(catalog, sched_cfg, cfg.days, zone_map,
                        lambda day: day_directives(calendar, profile, day))
    violations = validate_sequence(seq)
    if violations:
        raise RuntimeError(f"schedule failed validation: {violations[:3]}")
    agent = AgentModel()
    timeline = stitch_timeline(seq, plan, agent, calendar, cfg.seed,
                               place_of, sched_cfg.epsilon_ds)
    log = simulate_sensors(sensors, timeline, agent)

    labels = sorted(calendar.state_labels() + timeline.labels,
                    key=lambda l: (l.start.ds, l.kind))
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []
    try:
        path = out_dir / "activities.csv"
        write_activities_csv(seq, path)
        created.append(path)
        path = out_dir / "trajectories.csv"
        _write_trajectories(timeline, labels, agent, path)
        created.append(path)
        path = out_dir / "sensors.csv"
        _write_sensors(log, sensors, path)
        created.append(path)
        path = out_dir / "labels.csv"
        _write_labels(labels, path)
        created.append(path)
        path = out_dir / "mmse.csv"
        _write_mmse(calendar.mmse, path)
        created.append(path)
        path = out_dir / "manifest.json"
        path.write_text(json.dumps(cfg.to_manifest(), indent=2,
                                   sort_keys=True) + "\n")
        created.append(path)
    except BaseException:
        for p in created:
            p.unlink(missing_ok=True)
        raise
    return RunResult(out_dir, seq, timeline, labels, int(log.n_samples),
                     timeline.notes)


def _write_trajectories(timeline: Timeline, labels: list[AnomalyLabel],
                        agent: AgentModel, path: Path) -> None:
    fall_ids = {l.start.ds: i for i, l in enumerate(labels)
                if l.kind.startswith("fall")}
    wander_ids = {l.start.ds: i for i, l in enumerate(labels)
                  if l.kind == "wandering"}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "x", "y", "body_radius", "purpose", "label_id"])
        for walk in timeline.walks():
            traj = walk.traj
            wander_id = wander_ids.get(traj.start_ds, "")
            holds = traj.holds
            for t, (x, y) in zip(traj.times_ds, traj.points):
                t = int(t)
                radius = agent.body_radius
                label_id = wander_id
                for h0, h1 in holds:
                    if h0 <= t <= h1:
                        radius = agent.fall_body_radius
                        if h0 in fall_ids:
                            label_id = fall_ids[h0]
                        break
                writer.writerow([SimTime(t).format(), int(x), int(y),
                                 f"{radius:g}", traj.purpose, label_id])


def _write_sensors(log, sensors, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# n_sensors={len(sensors)}\n")
        fh.write(f"# period_s={log.period_s}\n")
        fh.write(f"# n_samples={log.n_samples}\n")
        for s in sensors:
            pos = f"{s.position.x},{s.position.y}" if s.position else ","
            fh.write(f"# sensor,{s.id},{s.kind},{pos},{s.radius:g},"
                     f"{s.linked_appliance or ''},{s.sample_rate_hz:g}\n")
        writer = csv.writer(fh)
        writer.writerow(["index", "t", "bitstring"])
        for frame in log.iter_frames():
            bits = "".join("1" if v else "0" for v in frame.states)
            writer.writerow([frame.index, SimTime(frame.index).format(),
                             bits])


def _write_labels(labels: list[AnomalyLabel], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "kind", "start", "end", "metadata"])
        for i, label in enumerate(labels):
            writer.writerow([i, label.kind, label.start.format(),
                             label.end.format(),
                             json.dumps(label.metadata, sort_keys=True)])


def _write_mmse(mmse: np.ndarray, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["month", "score"])
        for month, score in enumerate(mmse):
            writer.writerow([month, repr(float(score))])


def read_labels_csv(path: str | Path) -> list[AnomalyLabel]:
    labels = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            labels.append(AnomalyLabel(
                row["kind"], SimTime.parse(row["start"]),
                SimTime.parse(row["end"]), json.loads(row["metadata"])))
    return labels


# ---------------------------------------------------------------------------
# metrics reports

@dataclass
class MetricsRow:
    name: str
    rho_self: tuple[float, float]
    rho_cross: tuple[float, float] | None
    d_intra: tuple[float, float]
    d_inter: tuple[float, float] | None
    trials: int


@dataclass
class MetricsReport:
    reference_name: str
    reference_rho: float
    rows: list[MetricsRow]

    def format_text(self) -> str:
        def pm(pair):
            if pair is None:
                return f"{'-':>20}"
            return f"{pair[0]:10.2f} ±{pair[1]:7.2f}"
        lines = [f"{'set':14} {'rho(A,A)':>20} {'rho(A,ref)':>20} "
                 f"{'d_intra':>20} {'d_inter':>20}",
                 f"{self.reference_name:14} {self.reference_rho:10.2f} "
                 f"{'':9} {pm(None)} {pm((0.0, 0.0))} {pm(None)}"]
        for row in self.rows:
            lines.append(f"{row.name:14} {pm(row.rho_self)} "
                         f"{pm(row.rho_cross)} {pm(row.d_intra)} "
                         f"{pm(row.d_inter)}")
        return "\n".join(lines)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["set", "trials", "rho_self_mean", "rho_self_sd",
                             "rho_cross_mean", "rho_cross_sd",
                             "d_intra_mean", "d_intra_sd",
                             "d_inter_mean", "d_inter_sd"])
            writer.writerow([self.reference_name, 1,
                             f"{self.reference_rho:.4f}", 0, "", "",
                             0, 0, "", ""])
            for row in self.rows:
                def cells(pair):
                    return ["", ""] if pair is None else \
                        [f"{pair[0]:.4f}", f"{pair[1]:.4f}"]
                writer.writerow([row.name, row.trials]
                                + cells(row.rho_self) + cells(row.rho_cross)
                                + cells(row.d_intra) + cells(row.d_inter))


def _mean_sd(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std(ddof=1)) if len(arr) > 1 else 0.0


def _set_stats(day_sets: list[list[DayString]],
               reference: list[DayString]) -> tuple:
    ref_rho = rho_self(reference)
    rs, rc, di, de = [], [], [], []
    for days in day_sets:
        rs.append(rho_self(days))
        rc.append(rho_cross(days, reference))
        a, b = deltas(days, reference)
        di.append(a)
        de.append(b)
    return (_mean_sd(rs), _mean_sd(rc), _mean_sd(di), _mean_sd(de),
            len(day_sets), ref_rho)


def baseline_specs(seq: ActivitySequence) -> list[BaselineActivity]:
    durations: dict[str, list[float]] = {}
    for a in seq.logical_items():
        durations.setdefault(a.name.label, []).append(a.duration_ds / 600)
    out = []
    for name in sorted(durations):
        arr = np.array(durations[name])
        sd = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
        out.append(BaselineActivity(name, float(arr.mean()), sd))
    return out


def run_metrics(candidate_paths: list[str | Path], reference_path: str | Path,
                rate_hz: float = DEFAULT_RATE_HZ, trials: int = 10,
                seed: int = 0, sleep_activity: str | None = None,
                include_baselines: bool = True) -> MetricsReport:
    """Similarity report of candidate sequence files against a reference."""
    if not candidate_paths:
        raise ConfigError("at least one candidate file is required")
    reference = read_activities_csv(reference_path)
    candidates = [read_activities_csv(p) for p in candidate_paths]
    ref_names = {a.name.label for a in reference.items}
    cand_names = {a.name.label for s in candidates for a in s.items}
    if not ref_names & cand_names:
        raise ConfigError("candidate and reference share no activities; "
                          "are these matching exports?")
    alphabet = build_alphabet(ref_names | cand_names)
    ref_days = to_day_strings(reference, rate_hz, alphabet)
    cand_days = [to_day_strings(c, rate_hz, alphabet) for c in candidates]

    rows = []
    stats = _set_stats(cand_days, ref_days)
    rows.append(MetricsRow("candidate", stats[0], stats[1], stats[2],
                           stats[3], stats[4]))
    ref_rho = stats[5]
    if include_baselines:
        specs = baseline_specs(reference)
        if sleep_activity is None:
            sleep_activity = max(specs, key=lambda s: s.duration_mean).name
        schedule = sleep_schedule_from(reference, sleep_activity)
        n_days = reference.day_count
        rand_sets, rans_sets = [], []
        for trial in range(trials):
            rng = np.random.default_rng(np.random.SeedSequence(
                (seed & 0xFFFFFFFFFFFFFFFF, 99, trial)))
            rand_sets.append(to_day_strings(ran_d(specs, n_days, rng),
                                            rate_hz, alphabet))
            rans_sets.append(to_day_strings(
                ran_s(specs, n_days, schedule, sleep_activity, rng),
                rate_hz, alphabet))
        for name, sets in (("RanD", rand_sets), ("RanS", rans_sets)):
            s = _set_stats(sets, ref_days)
            rows.append(MetricsRow(name, s[0], s[1], s[2], s[3], s[4]))
    return MetricsReport(Path(reference_path).stem, ref_rho, rows)


# ---------------------------------------------------------------------------
# figure data exports

def export_plotdata(bundle_dir: str | Path, day: int = 0) -> dict[str, Path]:
    """Emit per-figure CSVs from a finished bundle.

    Monthly anomaly counts and durations, weekly activity statistics, and
    the sensor activation trace of one day's walks.
    """
    bundle = Path(bundle_dir)
    needed = ["activities.csv", "labels.csv", "mmse.csv"]
    missing = [n for n in needed if not (bundle / n).exists()]
    if missing:
        raise ConfigError(f"incomplete bundle, missing: {', '.join(missing)}")
    out = bundle / "plotdata"
    out.mkdir(exist_ok=True)
    labels = read_labels_csv(bundle / "labels.csv")
    seq = read_activities_csv(bundle / "activities.csv")
    mmse = []
    with open(bundle / "mmse.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            mmse.append(float(row["score"]))

    paths: dict[str, Path] = {}
    n_months = len(mmse)
    month_ds = DAYS_PER_MONTH * DS_PER_DAY
    path = out / "monthly_anomalies.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["month", "mmse", "wandering", "forgetting",
                         "fall_while_walking", "fall_while_standing",
                         "housebound_days", "semi_bedridden_days",
                         "wandering_mean_s"])
        for m in range(n_months):
            lo, hi = m * month_ds, (m + 1) * month_ds
            counts = {k: 0 for k in ("wandering", "forgetting",
                                     "fall_while_walking",
                                     "fall_while_standing")}
            wander_secs = []
            state_days = {"housebound": 0, "semi_bedridden": 0}
            for l in labels:
                if l.kind in counts and lo <= l.start.ds < hi:
                    counts[l.kind] += 1
                    if l.kind == "wandering":
                        wander_secs.append((l.end.ds - l.start.ds) / 10)
                if l.kind in state_days:
                    for d in range(m * DAYS_PER_MONTH,
                                   (m + 1) * DAYS_PER_MONTH):
                        if l.start.ds <= d * DS_PER_DAY < l.end.ds:
                            state_days[l.kind] += 1
            mean_w = (f"{np.mean(wander_secs):.1f}"
                      if wander_secs else "")
            writer.writerow([m, repr(mmse[m]), counts["wandering"],
                             counts["forgetting"],
                             counts["fall_while_walking"],
                             counts["fall_while_standing"],
                             state_days["housebound"],
                             state_days["semi_bedridden"], mean_w])
    paths["monthly_anomalies"] = path

    path = out / "weekly_activities.csv"
    logical = seq.logical_items()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["week", "days", "go_out_per_day",
                         "nap_min_per_day", "sleep_min_per_day"])
        n_weeks = math.ceil(seq.day_count / 7)
        for week in range(n_weeks):
            d0, d1 = week * 7, min((week + 1) * 7, seq.day_count)
            days_in = d1 - d0
            go_out = sum(1 for a in logical
                         if a.name.label == "go out" and d0 <= a.start.day < d1)
            nap = sum(a.duration_ds / 600 for a in logical
                      if a.name.label == "nap" and d0 <= a.start.day < d1)
            sleep = sum(a.duration_ds / 600 for a in logical
                        if a.name.label == "sleep" and d0 <= a.start.day < d1)
            writer.writerow([week, days_in, f"{go_out / days_in:.4f}",
                             f"{nap / days_in:.2f}", f"{sleep / days_in:.2f}"])
    paths["weekly_activities"] = path

    trace_inputs = ["trajectories.csv", "sensors.csv"]
    if all((bundle / n).exists() for n in trace_inputs):
        paths["transition_traces"] = _export_traces(bundle, out, day)
    return paths


def _export_traces(bundle: Path, out: Path, day: int) -> Path:
    lo, hi = day * DS_PER_DAY, (day + 1) * DS_PER_DAY
    walks: list[tuple[int, int]] = []
    prev_t = None
    prev_row = None
    start = None
    with open(bundle / "trajectories.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            t = SimTime.parse(row["t"]).ds
            if prev_t is None:
                start = t
            else:
                gap = t - prev_t
                hold = (row["body_radius"] == prev_row["body_radius"]
                        == "40" and row["x"] == prev_row["x"]
                        and row["y"] == prev_row["y"])
                if gap > 20 and not hold:
                    walks.append((start, prev_t))
                    start = t
            prev_t, prev_row = t, row
    if prev_t is not None:
        walks.append((start, prev_t))
    walks = [(a, b) for a, b in walks if a < hi and b >= lo]

    events: list[tuple[int, np.ndarray]] = []
    state = None
    with open(bundle / "sensors.csv", newline="") as fh:
        rows = (line for line in fh if not line.startswith("#"))
        for row in csv.DictReader(rows):
            idx = int(row["index"])
            bits = np.frombuffer(row["bitstring"].encode(), dtype=np.uint8) \
                - ord("0")
            if idx <= lo:
                state = (idx, bits)
            elif idx < hi:
                events.append((idx, bits))
    if state is not None:
        events.insert(0, state)

    # per-sensor on-intervals over the day, then clipped per walk
    on_spans: dict[int, list[tuple[int, int]]] = {}
    active: dict[int, int] = {}
    for k, (idx, bits) in enumerate(events):
        t = max(idx, lo)
        onset = set(int(j) for j in np.nonzero(bits)[0])
        for j in list(active):
            if j not in onset:
                on_spans.setdefault(j, []).append((active.pop(j), t))
        for j in onset:
            active.setdefault(j, t)
    for j, t_on in active.items():
        on_spans.setdefault(j, []).append((t_on, hi))

    path = out / f"transition_traces_day{day}.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["walk", "walk_start", "walk_end", "sensor",
                         "t_on", "t_off"])
        for wid, (a, b) in enumerate(walks):
            for j in sorted(on_spans):
                for t_on, t_off in on_spans[j]:
                    s, e = max(t_on, a), min(t_off, b + 1)
                    if s < e:
                        writer.writerow([wid, SimTime(a).format(),
                                         SimTime(b).format(), j + 1,
                                         SimTime(s).format(),
                                         SimTime(e).format()])
    return path
