"""
Monitoring content over time
============================

Captures of the same content are appended to a store. Each append is graded,
and a flag event is raised when the content first reaches the review grade
or its viral multiplier grows.
"""

import tempfile
from datetime import datetime, timedelta, timezone

from cogmetric import EngagementRecord, InteractionCounts, SnapshotStore, WeightScheme

start = datetime(2024, 9, 20, tzinfo=timezone.utc)
captures = [
    dict(like=137, comment=7, share=6),
    dict(like=900, comment=80, share=60),
    dict(like=2500, comment=300, share=400),
    dict(like=30000, comment=900, share=2000),
]

with tempfile.TemporaryDirectory() as root:
    store = SnapshotStore(root)
    for week, counts in enumerate(captures):
        record = EngagementRecord("fb-xinhua", "facebook", start + timedelta(weeks=week), 1,
                                  InteractionCounts(counts))
        snapshot, event = store.append_snapshot(record)
        print(f"week {week}: E={snapshot.assessment.effectiveness:9.2f} grade {snapshot.assessment.grade.value}")
        if event:
            print("   ", event)

    ###########################################################################
    # Trend with the change in E since the previous capture.

    print()
    for point in store.series_trend("fb-xinhua"):
        print(f"{point.captured_at:%Y-%m-%d}  {point.effectiveness:9.2f}  {point.grade.value:<2}  {point.delta:+9.2f}")

    ###########################################################################
    # What-if: a heavier share weight. The stored history is not touched, and
    # the result is marked as graded under a non-canonical scheme.

    print()
    for r in store.reevaluate_all(WeightScheme.from_overrides({"share": 2.0})):
        print(f"{r.content_id}: {r.old_effectiveness:.2f} -> {r.new_effectiveness:.2f} "
              f"({r.old_grade.value} -> {r.new_grade.value}, canonical={r.canonical_scheme})")

    ###########################################################################
    # Reopening the store replays the logs and reproduces the same events.

    reopened = SnapshotStore(root)
    _, replayed = reopened.replay()
    assert replayed == reopened.events()
    print(f"\n{len(replayed)} events replayed identically")
