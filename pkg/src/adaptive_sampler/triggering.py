"""Trigger conditions, the prompt-decision rule and the vote ledger."""
from __future__ import annotations

import csv
import io
import json
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .geometry import Zoning
from .zoning import kmeans

VOTES = ("warmer", "no change", "cooler")
SKIP_REASONS = ("out_of_zone", "adequate", "cooldown")
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class OccupantProfile:
    occupant_id: str
    gender: str
    height: float
    weight: float
    big_five: tuple[float, float, float, float, float]

    def __post_init__(self):
        if not 100 < self.height < 250:
            raise ValueError(f"height {self.height} outside (100, 250) cm")
        if not 30 < self.weight < 200:
            raise ValueError(f"weight {self.weight} outside (30, 200) kg")
        if len(self.big_five) != 5:
            raise ValueError("big_five needs exactly 5 scores")
        if not all(0.0 <= v <= 1.0 for v in self.big_five):
            raise ValueError("big_five scores must lie in [0, 1]")


@dataclass(frozen=True)
class ContextSample:
    occupant_id: str
    timestamp: float
    outdoor_temp: float
    heart_rate: float
    location: tuple[float, float]

    def __post_init__(self):
        if not 30 < self.heart_rate < 220:
            raise ValueError(f"heart_rate {self.heart_rate} outside (30, 220) bpm")


@dataclass(frozen=True)
class FeatureEncoder:
    """z-scores for outdoor temperature and heart rate, raw Big-Five, one-hot gender."""

    temp_mean: float
    temp_scale: float
    hr_mean: float
    hr_scale: float
    genders: tuple[str, ...]

    @classmethod
    def fit(cls, temps, heart_rates, genders: Iterable[str]) -> FeatureEncoder:
        t = np.asarray(temps, dtype=float)
        h = np.asarray(heart_rates, dtype=float)
        t_sd, h_sd = float(t.std()), float(h.std())
        return cls(
            float(t.mean()), t_sd if t_sd > 0 else 1.0,
            float(h.mean()), h_sd if h_sd > 0 else 1.0,
            tuple(sorted(set(genders))),
        )

    @property
    def dimension(self) -> int:
        return 7 + len(self.genders)

    def encode_batch(self, temps, heart_rates, big_five, genders: Sequence[str]) -> np.ndarray:
        temps = np.asarray(temps, dtype=float)
        hrs = np.asarray(heart_rates, dtype=float)
        b5 = np.asarray(big_five, dtype=float).reshape(len(temps), 5)
        onehot = np.zeros((len(temps), len(self.genders)))
        col = {g: i for i, g in enumerate(self.genders)}
        for row, g in enumerate(genders):
            if g not in col:
                raise ValueError(f"unseen gender category {g!r}")
            onehot[row, col[g]] = 1.0
        return np.column_stack([
            (temps - self.temp_mean) / self.temp_scale,
            (hrs - self.hr_mean) / self.hr_scale,
            b5,
            onehot,
        ])

    def to_dict(self) -> dict:
        return {
            "temp_mean": self.temp_mean, "temp_scale": self.temp_scale,
            "hr_mean": self.hr_mean, "hr_scale": self.hr_scale,
            "genders": list(self.genders),
        }

    @classmethod
    def from_dict(cls, d: dict) -> FeatureEncoder:
        return cls(d["temp_mean"], d["temp_scale"], d["hr_mean"], d["hr_scale"], tuple(d["genders"]))


def encode_features(profile: OccupantProfile, sample: ContextSample, encoder: FeatureEncoder) -> np.ndarray:
    return encoder.encode_batch(
        [sample.outdoor_temp], [sample.heart_rate], [profile.big_five], [profile.gender]
    )[0]


@dataclass
class TriggerConditionSet:
    """Condition centroids in encoded feature space.

    ``centroids`` is mutated only by :func:`record_feedback` with
    ``fine_tune=True``.
    """

    centroids: np.ndarray
    encoder: FeatureEncoder | None = None

    @property
    def k(self) -> int:
        return len(self.centroids)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "centroids": self.centroids.tolist(),
            "encoder": self.encoder.to_dict() if self.encoder else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> TriggerConditionSet:
        enc = FeatureEncoder.from_dict(d["encoder"]) if d.get("encoder") else None
        return cls(np.array(d["centroids"], dtype=float), enc)


def cluster_conditions(samples, k: int = 10, seed: int = 0, encoder: FeatureEncoder | None = None) -> TriggerConditionSet:
    result = kmeans(samples, k, seed=seed)
    return TriggerConditionSet(result.centroids.copy(), encoder)


def match_conditions(vectors, conditions: TriggerConditionSet) -> np.ndarray:
    """Nearest centroid per row; near-exact ties go to the lowest id."""
    v = np.atleast_2d(np.asarray(vectors, dtype=float))
    c = conditions.centroids
    d = ((v[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)
    best = d.min(axis=1, keepdims=True)
    tied = d <= best + TIE_RTOL * np.maximum(best, 1.0)
    return np.argmax(tied, axis=1)


def match_condition(vector, conditions: TriggerConditionSet) -> int:
    return int(match_conditions([vector], conditions)[0])


@dataclass(frozen=True)
class FeedbackEvent:
    occupant_id: str
    timestamp: float
    location: tuple[float, float]
    zone_id: int
    condition_id: int
    preference_vote: str = "no change"

    def __post_init__(self):
        if self.preference_vote not in VOTES:
            raise ValueError(f"unknown vote {self.preference_vote!r}")


@dataclass(frozen=True)
class Decision:
    action: str
    reason: str | None = None
    zone_id: int = -1
    condition_id: int = -1

    @property
    def prompt(self) -> bool:
        return self.action == "prompt"


@dataclass
class VoteLedger:
    counts: Counter = field(default_factory=Counter)
    last_feedback_time: dict[str, float] = field(default_factory=dict)
    events: list[FeedbackEvent] = field(default_factory=list)

    def rebuilt_counts(self) -> Counter:
        return Counter((e.zone_id, e.condition_id) for e in self.events)

    def consistent(self) -> bool:
        last: dict[str, float] = {}
        for e in self.events:
            last[e.occupant_id] = max(last.get(e.occupant_id, e.timestamp), e.timestamp)
        live = Counter({key: v for key, v in self.counts.items() if v})
        return live == self.rebuilt_counts() and last == self.last_feedback_time


def should_prompt(
    ledger: VoteLedger,
    occupant_id: str,
    location,
    timestamp: float,
    condition_id: int,
    zoning: Zoning | None = None,
    cooldown: float = 900.0,
    y: int = 1,
    zone_id: int | None = None,
) -> Decision:
    """Prompt iff the location resolves to a zone, the (zone, condition)
    cell holds fewer than ``y`` votes, and the occupant's last feedback is
    at least ``cooldown`` seconds old.

    ``zone_id`` may be passed when the caller has already resolved the
    location against ``zoning``.
    """
    if zone_id is None:
        zone_id = int(zoning.locate([location])[0])
    if zone_id < 0:
        return Decision("skip", "out_of_zone", -1, condition_id)
    if ledger.counts.get((zone_id, condition_id), 0) >= y:
        return Decision("skip", "adequate", zone_id, condition_id)
    last = ledger.last_feedback_time.get(occupant_id)
    if last is not None and timestamp - last < cooldown:
        return Decision("skip", "cooldown", zone_id, condition_id)
    return Decision("prompt", None, zone_id, condition_id)


def record_feedback(
    ledger: VoteLedger,
    event: FeedbackEvent,
    fine_tune: bool = False,
    *,
    conditions: TriggerConditionSet | None = None,
    vector=None,
    rate: float = 0.05,
) -> VoteLedger:
    """Append ``event`` and update counts and the occupant's last-feedback time.

    With ``fine_tune`` the matched centroid moves ``rate`` of the way toward
    the event's encoded ``vector`` (in place on ``conditions``).
    """
    last = ledger.last_feedback_time.get(event.occupant_id)
    if last is not None and event.timestamp < last:
        raise ValueError(
            f"event for {event.occupant_id} at {event.timestamp} precedes last feedback at {last}"
        )
    if conditions is not None and not 0 <= event.condition_id < conditions.k:
        raise ValueError(f"condition_id {event.condition_id} outside 0..{conditions.k - 1}")
    ledger.events.append(event)
    ledger.counts[(event.zone_id, event.condition_id)] += 1
    ledger.last_feedback_time[event.occupant_id] = event.timestamp
    if fine_tune:
        if conditions is None or vector is None:
            raise ValueError("fine_tune needs conditions and the encoded vector")
        c = conditions.centroids[event.condition_id]
        c += rate * (np.asarray(vector, dtype=float) - c)
    return ledger


def remove_redundant(events: Sequence[FeedbackEvent], y: int = 1) -> list[FeedbackEvent]:
    """Keep the earliest ``y`` events of each (zone, condition), in input order."""
    ranked = sorted(range(len(events)), key=lambda i: events[i].timestamp)
    seen: Counter = Counter()
    keep = set()
    for i in ranked:
        key = (events[i].zone_id, events[i].condition_id)
        if seen[key] < y:
            seen[key] += 1
            keep.add(i)
    return [e for i, e in enumerate(events) if i in keep]


def ledger_from_events(events: Iterable[FeedbackEvent]) -> VoteLedger:
    ledger = VoteLedger()
    for e in sorted(events, key=lambda e: e.timestamp):
        record_feedback(ledger, e)
    return ledger


EVENT_FIELDS = ("occupant_id", "timestamp", "x", "y", "zone_id", "condition_id", "vote")


def events_to_csv(events: Iterable[FeedbackEvent]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVENT_FIELDS)
    for e in events:
        w.writerow([e.occupant_id, repr(float(e.timestamp)), repr(float(e.location[0])),
                    repr(float(e.location[1])), e.zone_id, e.condition_id, e.preference_vote])
    return buf.getvalue()


def events_from_csv(text: str) -> list[FeedbackEvent]:
    rows = csv.DictReader(io.StringIO(text))
    return [
        FeedbackEvent(r["occupant_id"], float(r["timestamp"]), (float(r["x"]), float(r["y"])),
                      int(r["zone_id"]), int(r["condition_id"]), r["vote"])
        for r in rows
    ]


def decisions_to_jsonl(decisions: Iterable[dict]) -> str:
    return "".join(json.dumps(d, sort_keys=True) + "\n" for d in decisions)
