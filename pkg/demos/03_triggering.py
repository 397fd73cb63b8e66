"""Walk through the prompt decision rule on a two-room plan."""
from __future__ import annotations

from adaptive_sampler.fixtures import twin_rooms
from adaptive_sampler.geometry import discretize
from adaptive_sampler.metrics import q_s
from adaptive_sampler.triggering import FeedbackEvent, VoteLedger, record_feedback, remove_redundant, should_prompt
from adaptive_sampler.zoning import spaces_zoning


def main() -> None:
    plan = twin_rooms()
    zoning = spaces_zoning(plan, discretize(plan, 0.5))
    ledger = VoteLedger()

    steps = [
        ("a", (1.0, 1.0), 0.0, 3),     # empty ledger: prompt
        ("b", (2.0, 2.0), 60.0, 3),    # same zone and condition already covered
        ("a", (9.0, 1.0), 600.0, 4),   # a answered 600 s ago
        ("a", (6.5, 5.0), 2000.0, 4),  # corridor gap between the rooms
        ("a", (9.0, 1.0), 2000.0, 4),
    ]
    for occ, loc, t, cond in steps:
        d = should_prompt(ledger, occ, loc, t, cond, zoning)
        print(f"t={t:>6.0f} {occ} at {loc} condition {cond}: {d.action}" + (f" ({d.reason})" if d.reason else ""))
        if d.prompt:
            record_feedback(ledger, FeedbackEvent(occ, t, loc, d.zone_id, cond, "no change"))

    print("ledger:", dict(ledger.counts))
    # one vote out of ten conditions is heavily penalised
    print("Q_s zone 0:", q_s([ledger.counts.get((0, u), 0) for u in range(10)]))

    noisy = [FeedbackEvent(o, float(t), (1.0, 1.0), 0, 3, "cooler") for t, o in enumerate("abc")]
    print("redundant votes kept after removal:", [e.occupant_id for e in remove_redundant(noisy, y=1)])


if __name__ == "__main__":
    main()
