"""Synthetic occupants and weather, and the scenario runner.

A :class:`WorldTrace` is generated once and replayed unchanged against every
zoning, so differences between scenarios come from the zoning alone.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from shapely.geometry import Point
from shapely.ops import nearest_points

from .config import RunConfig, SimulationConfig, TriggerConfig
from .geometry import FloorPlan, Zoning, points_in_polygon
from .metrics import (
    QualityReport,
    ScalabilityInputs,
    ScenarioQuality,
    scalability_class,
    scalability_components,
    zone_condition_counts,
)
from .triggering import (
    VOTES,
    FeatureEncoder,
    FeedbackEvent,
    OccupantProfile,
    TriggerConditionSet,
    VoteLedger,
    cluster_conditions,
    ledger_from_events,
    match_conditions,
    record_feedback,
    remove_redundant,
    should_prompt,
)

DAY = 86400.0
WORK_START = 8 * 3600.0
WORK_END = 18 * 3600.0
GENDERS = ("female", "male")


def _rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), *stream])


def working_timestamps(days: int, step: float = 60.0) -> np.ndarray:
    """Seconds since Monday 00:00 for every step of 08:00-18:00 on weekdays."""
    ticks = np.arange(WORK_START, WORK_END, step)
    return np.concatenate([d * DAY + ticks for d in range(days) if d % 7 < 5] or [np.empty(0)])


def generate_environment(
    duration_days: int,
    seed: int,
    *,
    step: float = 60.0,
    working_hours: bool = True,
    mean: float = 30.0,
    amplitude: float = 3.0,
    noise: float = 0.5,
    peak_hour: float = 14.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Diurnal outdoor-temperature sinusoid plus Gaussian noise.

    Returns ``(timestamps, temperatures)``; with ``working_hours=False`` the
    series covers every step of every day.
    """
    if working_hours:
        ts = working_timestamps(duration_days, step)
    else:
        ts = np.arange(0.0, duration_days * DAY, step)
    phase = 2 * np.pi * ((ts % DAY) / 3600.0 - peak_hour) / 24.0
    temps = mean + amplitude * np.cos(phase)
    if noise > 0:
        temps = temps + _rng(seed, 1).normal(0.0, noise, size=len(ts))
    return ts, temps


@dataclass(frozen=True)
class OccupantStreams:
    true_locations: np.ndarray  # (occupants, T, 2)
    locations: np.ndarray  # reported, noisy
    heart_rate: np.ndarray  # (occupants, T)
    walking: np.ndarray  # (occupants, T) bool
    comfort_offset: np.ndarray  # (occupants,)
    dwells: np.ndarray  # every sampled dwell duration, seconds


def _random_point_in(space_poly, rng: np.random.Generator) -> tuple[float, float]:
    pts = np.asarray(space_poly, dtype=float)
    (minx, miny), (maxx, maxy) = pts.min(0), pts.max(0)
    for _ in range(1000):
        p = (rng.uniform(minx, maxx), rng.uniform(miny, maxy))
        if points_in_polygon([p], space_poly)[0]:
            return p
    raise RuntimeError("could not sample a point inside the space")


def _inside_plan(points: np.ndarray, plan: FloorPlan) -> np.ndarray:
    inside = np.zeros(len(points), dtype=bool)
    for s in plan.spaces:
        todo = ~inside
        if not todo.any():
            break
        idx = np.flatnonzero(todo)
        inside[idx] = points_in_polygon(points[idx], s.polygon)
    return inside


def clip_to_plan(points: np.ndarray, plan: FloorPlan, fallback: np.ndarray | None = None) -> np.ndarray:
    """Move points outside every space to the nearest point of the floor plan."""
    pts = np.array(points, dtype=float)
    outside = np.flatnonzero(~_inside_plan(pts, plan))
    if len(outside) == 0:
        return pts
    union = plan.union
    for i in outside.tolist():
        q = nearest_points(union, Point(pts[i]))[0]
        pts[i] = (q.x, q.y)
    still = outside[~_inside_plan(pts[outside], plan)]
    if len(still):
        if fallback is None:
            raise RuntimeError("clipping left points outside the floor plan")
        pts[still] = fallback[still]
    return pts


def generate_occupants(
    count: int,
    plan: FloorPlan,
    seed: int,
    timestamps: np.ndarray,
    config: SimulationConfig = SimulationConfig(),
) -> tuple[list[OccupantProfile], OccupantStreams]:
    """Random-waypoint occupants sampled at ``timestamps``.

    Each working day an occupant starts at a random point of a random space,
    dwells for an exponential time (mean ``config.dwell_mean``), then walks in
    a straight line to a random point of another space.  Reported locations
    add isotropic noise of radius U[0.25, 3] m and are clipped to the plan.
    """
    ts = np.asarray(timestamps, dtype=float)
    n_t = len(ts)
    rng = _rng(seed, 2)
    profiles, offsets = [], []
    true_loc = np.zeros((count, n_t, 2))
    walking = np.zeros((count, n_t), dtype=bool)
    dwells: list[float] = []
    days = np.floor(ts / DAY).astype(np.int64)
    for o in range(count):
        profiles.append(OccupantProfile(
            occupant_id=f"occ{o:03d}",
            gender=GENDERS[int(rng.integers(len(GENDERS)))],
            height=float(np.clip(rng.normal(168, 9), 140, 210)),
            weight=float(np.clip(rng.normal(68, 11), 40, 150)),
            big_five=tuple(float(v) for v in rng.uniform(0, 1, 5)),
        ))
        offsets.append(float(rng.normal(0.0, 0.7)))
        for day in np.unique(days).tolist():
            sel = np.flatnonzero(days == day)
            start, end = day * DAY + WORK_START, day * DAY + WORK_END
            seg_t0, seg_t1, seg_a, seg_b = [], [], [], []
            k = int(rng.integers(len(plan.spaces)))
            pos = _random_point_in(plan.spaces[k].polygon, rng)
            t = start
            while t < end:
                dwell = float(rng.exponential(config.dwell_mean))
                dwells.append(dwell)
                seg_t0.append(t); seg_t1.append(t + dwell); seg_a.append(pos); seg_b.append(pos)
                t += dwell
                if len(plan.spaces) > 1:
                    k = (k + 1 + int(rng.integers(len(plan.spaces) - 1))) % len(plan.spaces)
                nxt = _random_point_in(plan.spaces[k].polygon, rng)
                travel = math.dist(pos, nxt) / config.walking_speed
                seg_t0.append(t); seg_t1.append(t + travel); seg_a.append(pos); seg_b.append(nxt)
                t += travel
                pos = nxt
            t0 = np.array(seg_t0)
            seg = np.searchsorted(t0, ts[sel], side="right") - 1
            a, b = np.array(seg_a)[seg], np.array(seg_b)[seg]
            span = np.array(seg_t1)[seg] - t0[seg]
            frac = np.where(span > 0, (ts[sel] - t0[seg]) / np.where(span > 0, span, 1.0), 0.0)
            true_loc[o, sel] = a + np.clip(frac, 0, 1)[:, None] * (b - a)
            walking[o, sel] = np.any(a != b, axis=1)

    noise_rng = _rng(seed, 3)
    radius = noise_rng.uniform(0.25, 3.0, size=(count, n_t))
    angle = noise_rng.uniform(0, 2 * np.pi, size=(count, n_t))
    noisy = true_loc + np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=-1)
    flat_true = true_loc.reshape(-1, 2)
    reported = clip_to_plan(noisy.reshape(-1, 2), plan, fallback=clip_to_plan(flat_true, plan))
    reported = reported.reshape(count, n_t, 2)

    hr_rng = _rng(seed, 4)
    base = hr_rng.normal(70.0, 5.0, size=(count, 1))
    hr = base + 15.0 * walking + hr_rng.normal(0.0, 3.0, size=(count, n_t))
    hr = np.clip(hr, 45.0, 180.0)
    streams = OccupantStreams(true_loc, reported, hr, walking, np.array(offsets), np.array(dwells))
    return profiles, streams


@dataclass(frozen=True)
class WorldTrace:
    days: int
    step: float
    seed: int
    timestamps: np.ndarray
    outdoor_temp: np.ndarray
    profiles: tuple[OccupantProfile, ...]
    locations: np.ndarray
    heart_rate: np.ndarray
    comfort_offset: np.ndarray
    extras: dict = field(default_factory=dict, compare=False)

    @property
    def n_occupants(self) -> int:
        return len(self.profiles)

    def environment_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["timestamp", "outdoor_temp"])
        for t, v in zip(self.timestamps.tolist(), self.outdoor_temp.tolist()):
            w.writerow([repr(t), repr(v)])
        return buf.getvalue()

    def streams_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["occupant_id", "timestamp", "x", "y", "heart_rate"])
        ts = self.timestamps.tolist()
        for o, prof in enumerate(self.profiles):
            xs, ys = self.locations[o, :, 0].tolist(), self.locations[o, :, 1].tolist()
            for t, x, y, h in zip(ts, xs, ys, self.heart_rate[o].tolist()):
                w.writerow([prof.occupant_id, repr(t), repr(x), repr(y), repr(h)])
        return buf.getvalue()

    def manifest(self) -> dict:
        env, streams = self.environment_csv(), self.streams_csv()
        occupants = [
            {
                "occupant_id": p.occupant_id, "gender": p.gender, "height": p.height,
                "weight": p.weight, "big_five": list(p.big_five), "comfort_offset": float(off),
            }
            for p, off in zip(self.profiles, self.comfort_offset.tolist())
        ]
        return {
            "days": self.days,
            "step": self.step,
            "seed": self.seed,
            "occupants": occupants,
            "hashes": {
                "environment.csv": hashlib.sha256(env.encode()).hexdigest(),
                "streams.csv": hashlib.sha256(streams.encode()).hexdigest(),
            },
        }

    def trace_hash(self) -> str:
        blob = json.dumps(self.manifest(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def save(self, directory: str | Path) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "environment.csv").write_text(self.environment_csv())
        (d / "streams.csv").write_text(self.streams_csv())
        (d / "trace.json").write_text(json.dumps(self.manifest(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, directory: str | Path) -> WorldTrace:
        d = Path(directory)
        man = json.loads((d / "trace.json").read_text())
        env_text = (d / "environment.csv").read_text()
        streams_text = (d / "streams.csv").read_text()
        for name, text in (("environment.csv", env_text), ("streams.csv", streams_text)):
            if hashlib.sha256(text.encode()).hexdigest() != man["hashes"][name]:
                raise ValueError(f"{name} does not match the trace manifest hash")
        env = list(csv.DictReader(io.StringIO(env_text)))
        ts = np.array([float(r["timestamp"]) for r in env])
        temps = np.array([float(r["outdoor_temp"]) for r in env])
        profiles = tuple(
            OccupantProfile(o["occupant_id"], o["gender"], o["height"], o["weight"], tuple(o["big_five"]))
            for o in man["occupants"]
        )
        n_o, n_t = len(profiles), len(ts)
        locs = np.zeros((n_o, n_t, 2))
        hr = np.zeros((n_o, n_t))
        rows = list(csv.DictReader(io.StringIO(streams_text)))
        for i, r in enumerate(rows):
            o, t = divmod(i, n_t)
            locs[o, t] = (float(r["x"]), float(r["y"]))
            hr[o, t] = float(r["heart_rate"])
        offsets = np.array([o["comfort_offset"] for o in man["occupants"]])
        return cls(man["days"], man["step"], man["seed"], ts, temps, profiles, locs, hr, offsets)


def generate_trace(plan: FloorPlan, config: SimulationConfig, seed: int) -> WorldTrace:
    ts, temps = generate_environment(
        config.days, seed, step=config.step, mean=config.temp_mean,
        amplitude=config.temp_amplitude, noise=config.temp_noise, peak_hour=config.temp_peak_hour,
    )
    profiles, streams = generate_occupants(config.occupants, plan, seed, ts, config)
    return WorldTrace(
        days=config.days, step=config.step, seed=int(seed), timestamps=ts, outdoor_temp=temps,
        profiles=tuple(profiles), locations=streams.locations, heart_rate=streams.heart_rate,
        comfort_offset=streams.comfort_offset, extras={"streams": streams},
    )


def encode_trace(trace: WorldTrace, encoder: FeatureEncoder, sel: slice | np.ndarray = slice(None)) -> np.ndarray:
    """Encoded feature vectors, shape ``(occupants, len(sel), dim)``."""
    temps = trace.outdoor_temp[sel]
    out = []
    for o, p in enumerate(trace.profiles):
        hr = trace.heart_rate[o, sel]
        out.append(encoder.encode_batch(temps, hr, np.tile(p.big_five, (len(temps), 1)), [p.gender] * len(temps)))
    return np.array(out).reshape(trace.n_occupants, len(temps), encoder.dimension)


def fit_conditions(trace: WorldTrace, k: int, seed: int, calibration_days: int = 1) -> TriggerConditionSet:
    """Fit the encoder and k condition centroids on the first calibration days."""
    if trace.n_occupants == 0:
        raise ValueError("no occupants to calibrate on")
    day_index = np.floor(trace.timestamps / DAY).astype(np.int64)
    cal_days = np.unique(day_index)[:calibration_days]
    sel = np.flatnonzero(np.isin(day_index, cal_days))
    encoder = FeatureEncoder.fit(
        np.tile(trace.outdoor_temp[sel], trace.n_occupants),
        trace.heart_rate[:, sel].ravel(),
        [p.gender for p in trace.profiles],
    )
    vectors = encode_trace(trace, encoder, sel).reshape(-1, encoder.dimension)
    return cluster_conditions(vectors, k=k, seed=seed, encoder=encoder)


def _vote(temp: float, offset: float, rng: np.random.Generator) -> str:
    sensation = 0.5 * (temp - 30.0) + offset + rng.normal(0.0, 0.5)
    if sensation > 0.5:
        return VOTES[2]
    if sensation < -0.5:
        return VOTES[0]
    return VOTES[1]


@dataclass
class ScenarioResult:
    method: str
    policy: str
    events: list[FeedbackEvent]
    ledger: VoteLedger
    decisions: list[dict]
    zoning: Zoning
    conditions: TriggerConditionSet
    trace_hash: str


def run_scenario(
    trace: WorldTrace,
    zoning: Zoning,
    conditions: TriggerConditionSet,
    policy: str = "adaptive",
    sim: SimulationConfig = SimulationConfig(),
    trigger: TriggerConfig = TriggerConfig(),
    seed: int = 0,
) -> ScenarioResult:
    """Replay ``trace`` against ``zoning`` under the given prompting policy.

    The adaptive policy consults :func:`should_prompt` at every step; the
    fixed-interval policy prompts every ``sim.fixed_interval`` seconds with
    only the cooldown as a guard.  Responses arrive with probability
    ``sim.response_probability`` after a U[0, max_response_delay] delay.
    """
    if conditions is None or conditions.encoder is None:
        raise ValueError("trigger conditions are not fitted")
    if policy not in ("adaptive", "fixed_interval"):
        raise ValueError(f"unknown policy {policy!r}")
    conditions = TriggerConditionSet(conditions.centroids.copy(), conditions.encoder)
    n_o, n_t = trace.n_occupants, len(trace.timestamps)
    zone_ids = zoning.locate(trace.locations.reshape(-1, 2)).reshape(n_o, n_t) if n_o else np.zeros((0, n_t), int)
    vectors = encode_trace(trace, conditions.encoder) if n_o else np.zeros((0, n_t, 0))
    if n_o:
        cond_ids = match_conditions(vectors.reshape(-1, vectors.shape[-1]), conditions).reshape(n_o, n_t)

    rng = _rng(seed, 11)
    ledger = VoteLedger()
    decisions: list[dict] = []
    responses = [0] * n_o
    last_prompt = [-math.inf] * n_o
    ids = [p.occupant_id for p in trace.profiles]
    ts_list = trace.timestamps.tolist()
    for t, ts in enumerate(ts_list):
        for o in range(n_o):
            occ = ids[o]
            if responses[o] >= sim.response_cap:
                decisions.append({"timestamp": ts, "occupant": occ, "decision": "skip", "reason": "cap"})
                continue
            zone = int(zone_ids[o, t])
            if trigger.fine_tune:
                cond = int(match_conditions(vectors[o, t], conditions)[0])
            else:
                cond = int(cond_ids[o, t])
            loc = (float(trace.locations[o, t, 0]), float(trace.locations[o, t, 1]))
            if policy == "adaptive":
                d = should_prompt(ledger, occ, loc, ts, cond, cooldown=trigger.cooldown, y=trigger.y, zone_id=zone)
                action, reason = d.action, d.reason
            else:
                last = ledger.last_feedback_time.get(occ)
                if zone < 0:
                    action, reason = "skip", "out_of_zone"
                elif ts - last_prompt[o] < sim.fixed_interval:
                    action, reason = "skip", "interval"
                elif last is not None and ts - last < trigger.cooldown:
                    action, reason = "skip", "cooldown"
                else:
                    action, reason = "prompt", None
            entry = {"timestamp": ts, "occupant": occ, "decision": action, "reason": reason}
            if action == "prompt":
                last_prompt[o] = ts
                responded = bool(rng.random() < sim.response_probability)
                entry["responded"] = responded
                entry["zone_id"], entry["condition_id"] = zone, cond
                if responded:
                    delay = float(rng.uniform(0.0, sim.max_response_delay))
                    vote = _vote(float(trace.outdoor_temp[t]), float(trace.comfort_offset[o]), rng)
                    event = FeedbackEvent(occ, ts + delay, loc, zone, cond, vote)
                    record_feedback(
                        ledger, event, trigger.fine_tune,
                        conditions=conditions, vector=vectors[o, t], rate=trigger.fine_tune_rate,
                    )
                    responses[o] += 1
            decisions.append(entry)
    return ScenarioResult(
        method=zoning.method, policy=policy, events=list(ledger.events), ledger=ledger,
        decisions=decisions, zoning=zoning, conditions=conditions, trace_hash=trace.trace_hash(),
    )


def zone_count_table(zonings: Mapping[str, Zoning]) -> dict[str, int]:
    return {m: len(z) for m, z in zonings.items()}


def score_scenarios(
    plan: FloorPlan,
    zonings: Mapping[str, Zoning],
    events: Mapping[str, list[FeedbackEvent]],
    config: RunConfig,
    grown_counts: Mapping[str, int] | None = None,
    metadata: dict | None = None,
) -> QualityReport:
    """Quality report for each zoning's accepted events, before and after
    redundancy removal.

    ``grown_counts`` holds each method's zone count on the mirrored plan and
    drives the scalability-class row.
    """
    trig, coch = config.trigger, config.cochran
    scenarios = []
    for method, zoning in zonings.items():
        before = ledger_from_events(events[method])
        after = ledger_from_events(remove_redundant(events[method], trig.y))
        zone_ids = [z.zone_id for z in zoning.zones]
        inputs = ScalabilityInputs(
            zone_count=len(zoning), gross_floor_area=plan.gross_floor_area,
            total_spaces=len(plan.spaces), population=coch.population,
            margin=coch.margin, confidence=coch.confidence, p=coch.p,
        )
        sq = ScenarioQuality(
            method=method,
            zone_count=len(zoning),
            components=scalability_components(inputs),
            zone_ids=zone_ids,
            counts_before=[zone_condition_counts(before, z, trig.x) for z in zone_ids],
            counts_after=[zone_condition_counts(after, z, trig.x) for z in zone_ids],
            x=trig.x,
            y=trig.y,
        )
        if grown_counts is not None and method in grown_counts:
            sq.zone_count_grown = int(grown_counts[method])
            sq.scalability_class = scalability_class(len(zoning), sq.zone_count_grown)
        scenarios.append(sq)
    meta = {"config_hash": config.config_hash(), "seeds": config.seeds.model_dump(), **(metadata or {})}
    return QualityReport(scenarios, meta).finalize()


def compare_scenarios(
    trace: WorldTrace,
    plan: FloorPlan,
    zonings: Mapping[str, Zoning],
    conditions: TriggerConditionSet,
    config: RunConfig,
    grown_counts: Mapping[str, int] | None = None,
) -> tuple[QualityReport, dict[str, ScenarioResult]]:
    """Run every zoning on the same trace and score the outcomes."""
    sim = config.simulation
    results = {
        method: run_scenario(trace, zoning, conditions, sim.policy, sim, config.trigger, seed=config.seeds.sim)
        for method, zoning in zonings.items()
    }
    hashes = sorted({r.trace_hash for r in results.values()})
    report = score_scenarios(
        plan, zonings, {m: r.events for m, r in results.items()}, config, grown_counts,
        metadata={"trace_hash": hashes[0] if len(hashes) == 1 else hashes, "policy": sim.policy},
    )
    return report, results
