"""Sampling-quality mathematics: Cochran, scalability, softmax, Q_s."""
from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np


@dataclass(frozen=True)
class ScalabilityInputs:
    """Resource counts for one zoning scenario.

    ``zone_count`` is the number of zones N; ``population`` is the occupant
    population used for the Cochran sample size (a different N).
    """

    zone_count: int
    gross_floor_area: float
    total_spaces: int
    population: int
    margin: float = 0.11
    confidence: float = 0.90
    p: float = 0.5

    def __post_init__(self):
        if self.zone_count < 1:
            raise ValueError("zone_count must be >= 1")
        if not self.gross_floor_area > 0:
            raise ValueError("gross_floor_area must be > 0")
        if self.total_spaces < 1:
            raise ValueError("total_spaces must be >= 1")
        if self.population < 1:
            raise ValueError("population must be >= 1")
        if not 0 < self.margin < 1:
            raise ValueError("margin must be in (0, 1)")
        if not 0 < self.p < 1:
            raise ValueError("p must be in (0, 1)")


def z_score(confidence: float) -> float:
    """Two-sided standard-normal critical value for ``confidence``."""
    if not 0 < confidence < 1:
        raise ValueError("confidence must be in (0, 1)")
    return NormalDist().inv_cdf(0.5 + confidence / 2.0)


def cochran_pooled(margin: float, confidence: float, p: float = 0.5) -> float:
    """Sample size for an infinite population: Z^2 p q / e^2."""
    if not 0 < margin < 1:
        raise ValueError("margin must be in (0, 1)")
    if not 0 < p < 1:
        raise ValueError("p must be in (0, 1)")
    z = z_score(confidence)
    return z * z * p * (1.0 - p) / (margin * margin)


def cochran_sample_size(population: float, margin: float, confidence: float, p: float = 0.5) -> int:
    """Finite-population corrected Cochran sample size, rounded half-up (>= 1).

    ``population`` may be ``math.inf``.
    """
    if not population >= 1:
        raise ValueError("population must be >= 1")
    n0 = cochran_pooled(margin, confidence, p)
    n = n0 / (1.0 + (n0 - 1.0) / population)
    return max(1, math.floor(n + 0.5))


def _clamp01(v: float) -> float:
    return min(1.0, max(0.0, v))


def scalability_components(inputs: ScalabilityInputs) -> tuple[float, float, float]:
    """``(S_s, S_a, S_o)`` for one scenario.

    S_a = 1 - N/A; S_s = 1 - N/S_st and S_o = 1 - n/S_ot, both clamped to [0, 1].
    """
    n = cochran_sample_size(inputs.population, inputs.margin, inputs.confidence, inputs.p)
    s_a = 1.0 - inputs.zone_count / inputs.gross_floor_area
    s_s = _clamp01(1.0 - inputs.zone_count / inputs.total_spaces)
    s_o = _clamp01(1.0 - n / inputs.population)
    return s_s, s_a, s_o


def softmax(values) -> np.ndarray:
    z = np.asarray(values, dtype=float)
    if z.size == 0:
        raise ValueError("softmax of an empty vector")
    e = np.exp(z - z.max())
    return e / e.sum()


def normalize_across(values) -> np.ndarray:
    """Range-scale one metric across scenarios, then softmax.

    A zero range (all scenarios equal) yields the uniform distribution.
    """
    v = np.asarray(values, dtype=float)
    spread = float(v.max() - v.min())
    if spread == 0.0:
        return np.full(v.shape, 1.0 / v.size)
    return softmax(v / spread)


def overall_scalability(components) -> np.ndarray:
    """Per-scenario S from a ``scenarios x (s, a, o)`` component matrix."""
    comps = np.asarray(components, dtype=float)
    if comps.ndim != 2 or comps.shape[1] != 3:
        raise ValueError("components must have shape (scenarios, 3)")
    normed = np.column_stack([normalize_across(comps[:, i]) for i in range(3)])
    return normed.mean(axis=1)


def _zone_counts(counts: Mapping, zone_id, x: int) -> list[int]:
    per = [0] * x
    for (z, c), v in counts.items():
        if z != zone_id or v == 0:
            continue
        if not 0 <= c < x:
            raise ValueError(f"condition {c} outside 0..{x - 1}")
        per[c] += int(v)
    return per


def q_s(condition_counts: Sequence[int], x: int = 10, y: int = 1) -> float:
    """Adequacy minus redundancy for one zone's per-condition vote counts.

    ``condition_counts[u]`` is the vote count of condition ``u`` (``len == x``).
    A zone with no votes scores 0.
    """
    if x < 1 or y < 1:
        raise ValueError("x and y must be >= 1")
    if len(condition_counts) != x:
        raise ValueError("need one count per condition")
    n = sum(condition_counts)
    if n == 0:
        return 0.0
    met = sum(1 for a in condition_counts if a >= 1)
    return met / x - sum(abs(a - y) for a in condition_counts) / n


def adequacy(condition_counts: Sequence[int], x: int = 10) -> float:
    return sum(1 for a in condition_counts if a >= 1) / x


def redundancy(condition_counts: Sequence[int], y: int = 1) -> float:
    """Deviation term of Q_s (0 for an empty zone)."""
    n = sum(condition_counts)
    return 0.0 if n == 0 else sum(abs(a - y) for a in condition_counts) / n


def adequacy_redundancy(ledger, zone_id, x: int = 10, y: int = 1) -> float:
    """Q_s of ``zone_id`` given a ledger (anything with ``counts[(zone, cond)]``)."""
    counts = ledger.counts if hasattr(ledger, "counts") else ledger
    return q_s(_zone_counts(counts, zone_id, x), x, y)


def zone_condition_counts(ledger, zone_id, x: int = 10) -> list[int]:
    counts = ledger.counts if hasattr(ledger, "counts") else ledger
    return _zone_counts(counts, zone_id, x)


def scalability_class(count_base: int, count_grown: int) -> str:
    """Classify zone-count growth when the floor plan is doubled."""
    ratio = count_grown / count_base
    if ratio <= 1.1:
        return "Constant O(1)"
    if ratio >= 1.5:
        return "Linear O(N)"
    return "Sublinear"


REFERENCE_CLAIM = "18-23% higher overall sampling quality"


@dataclass
class ScenarioQuality:
    method: str
    zone_count: int
    components: tuple[float, float, float]
    zone_ids: list[int]
    counts_before: list[list[int]]
    counts_after: list[list[int]]
    x: int = 10
    y: int = 1
    scalability: float = float("nan")
    overall: float = float("nan")
    zone_count_grown: int | None = None
    scalability_class: str | None = None

    @property
    def q_before(self) -> list[float]:
        return [q_s(c, self.x, self.y) for c in self.counts_before]

    @property
    def q_after(self) -> list[float]:
        return [q_s(c, self.x, self.y) for c in self.counts_after]

    def summary(self) -> dict:
        qb, qa = self.q_before, self.q_after
        voted = [c for c in self.counts_before if sum(c)]
        return {
            "method": self.method,
            "zone_count": self.zone_count,
            "S_s": self.components[0],
            "S_a": self.components[1],
            "S_o": self.components[2],
            "S": self.scalability,
            "Q_s_mean_before": float(np.mean(qb)),
            "Q_s_median_before": float(np.median(qb)),
            "Q_s_mean_after": float(np.mean(qa)),
            "Q_s_median_after": float(np.median(qa)),
            "adequacy_mean": float(np.mean([adequacy(c, self.x) for c in self.counts_before])),
            "redundancy_mean": float(np.mean([redundancy(c, self.y) for c in voted])) if voted else 0.0,
            "votes_before": int(sum(map(sum, self.counts_before))),
            "votes_after": int(sum(map(sum, self.counts_after))),
            "overall_quality": self.overall,
            "zone_count_mirrored": self.zone_count_grown,
            "scalability_class": self.scalability_class,
            "reliability": None,
        }


@dataclass
class QualityReport:
    scenarios: list[ScenarioQuality]
    metadata: dict

    def by_method(self) -> dict[str, ScenarioQuality]:
        return {s.method: s for s in self.scenarios}

    def finalize(self) -> QualityReport:
        """Fill S and overall quality (both normalised across scenarios)."""
        comps = np.array([s.components for s in self.scenarios])
        big_s = overall_scalability(comps)
        q_mean = np.array([np.mean(s.q_before) for s in self.scenarios])
        dims = np.column_stack([normalize_across(comps[:, i]) for i in range(3)] + [normalize_across(q_mean)])
        overall = dims.mean(axis=1)
        for s, sv, ov in zip(self.scenarios, big_s, overall):
            s.scalability = float(sv)
            s.overall = float(ov)
        return self

    def comparison(self) -> dict:
        by = self.by_method()
        out: dict = {"reference_claim": REFERENCE_CLAIM}
        b2v = by.get("build2vec")
        for other in ("square_grid", "spaces"):
            if b2v is not None and other in by:
                out[f"build2vec_vs_{other}_overall_ratio"] = b2v.overall / by[other].overall
                out[f"build2vec_vs_{other}_overall_gain_pct"] = 100.0 * (b2v.overall / by[other].overall - 1.0)
        return out

    def to_dict(self) -> dict:
        return {
            "scenarios": [s.summary() for s in self.scenarios],
            "per_zone": {
                s.method: [
                    {"zone_id": z, "Q_s_before": qb, "Q_s_after": qa, "D_u_before": adequacy(cb, s.x) * s.x,
                     "D_u_after": adequacy(ca, s.x) * s.x, "n_before": sum(cb), "n_after": sum(ca)}
                    for z, qb, qa, cb, ca in zip(s.zone_ids, s.q_before, s.q_after, s.counts_before, s.counts_after)
                ]
                for s in self.scenarios
            },
            "comparison": self.comparison(),
            "reliability": None,
            "metadata": self.metadata,
        }

    def per_zone_csv(self) -> str:
        lines = ["method,phase,zone_id,n,D_u,Q_s"]
        for s in self.scenarios:
            for phase, counts in (("before", s.counts_before), ("after", s.counts_after)):
                for z, c in zip(s.zone_ids, counts):
                    met = sum(1 for a in c if a >= 1)
                    lines.append(f"{s.method},{phase},{z},{sum(c)},{met},{q_s(c, s.x, s.y)!r}")
        return "\n".join(lines) + "\n"

    def plot_data_csv(self) -> str:
        """Four-metric comparison table: one row per metric, one column per scenario."""
        summaries = [s.summary() for s in self.scenarios]
        methods = [s["method"] for s in summaries]
        rows = [
            ("scalability", [s["S"] for s in summaries]),
            ("adequacy", [s["adequacy_mean"] for s in summaries]),
            ("redundancy", [s["redundancy_mean"] for s in summaries]),
            ("reliability", [None for _ in summaries]),
            ("overall_quality", [s["overall_quality"] for s in summaries]),
        ]
        lines = ["metric," + ",".join(methods)]
        for name, vals in rows:
            lines.append(name + "," + ",".join("" if v is None else repr(float(v)) for v in vals))
        return "\n".join(lines) + "\n"

    def table(self) -> str:
        """Mean/median Q_s before and after redundancy removal plus scalability class."""
        by = [s.summary() for s in self.scenarios]
        head = "| |" + "|".join(s["method"] for s in by) + "|"
        sep = "|---" * (len(by) + 1) + "|"
        before = "| before removal |" + "|".join(
            f"mean {s['Q_s_mean_before']:.2f} median {s['Q_s_median_before']:.2f}" for s in by) + "|"
        after = "| after removal |" + "|".join(
            f"mean {s['Q_s_mean_after']:.2f} median {s['Q_s_median_after']:.2f}" for s in by) + "|"
        cls = "| scalability complexity |" + "|".join(str(s["scalability_class"]) for s in by) + "|"
        return "\n".join([head, sep, before, after, cls]) + "\n"
