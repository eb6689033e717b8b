"""Exit criteria. Each test prints one PASS/FAIL line in the pytest summary."""

from __future__ import annotations

import json
import math
import random
from datetime import datetime, timedelta, timezone
from fractions import Fraction

import pytest

import reference_script
from cogmetric.analysis import aggregate_account, score_records
from cogmetric.ingest import (
    DEFAULT_ADAPTERS,
    EngagementRecord,
    load_dataset,
    normalize,
    parse_rows,
    serialize_records,
)
from cogmetric.metric import (
    GRADE_BANDS,
    Grade,
    InteractionCounts,
    WeightScheme,
    assess,
    assign_grade,
    compute_effectiveness,
    compute_weighted_score,
    grade_interval,
    viral_multiplier,
)
from cogmetric.monitor import SnapshotStore

SEED = 20240918


@pytest.mark.acceptance("AC1 Instagram case: E = 11827.4, A+, viral x1, flagged")
def test_ac1_instagram():
    a = assess(InteractionCounts(like=37908, comment=650), 1)
    assert abs(a.effectiveness - 11827.4) < 1e-9
    assert a.grade is Grade.A_PLUS
    assert a.viral_multiplier == 1
    assert a.flagged


@pytest.mark.acceptance("AC2 YouTube account: exact E (rel 1e-9), A+, viral x8, |E - 81700.1| < 5")
def test_ac2_youtube():
    a = assess(InteractionCounts(view=86604097), 106)
    exact = Fraction(86604097, 10) / 106
    assert abs(Fraction(a.effectiveness) - exact) / exact < Fraction(1, 10**9)
    assert abs(a.effectiveness - 81700.1) < 5
    assert a.grade is Grade.A_PLUS
    assert a.viral_multiplier == 8


@pytest.mark.acceptance("AC3 Facebook case: E = 52.0, C, not flagged")
def test_ac3_facebook():
    a = assess(InteractionCounts(like=137, comment=7, share=6), 1)
    assert a.effectiveness == 52.0
    assert a.grade is Grade.C
    assert not a.flagged


def _legacy_post(post_id, rng):
    return {"post_id": post_id, "views": rng.randint(0, 10**6), "likes": rng.randint(0, 10**6),
            "comments": rng.randint(0, 10**6), "shares": rng.randint(0, 10**6)}


@pytest.mark.acceptance("AC4 Reference-script oracle parity on posts_data and 1,000 random vectors")
def test_ac4_reference_parity():
    fixed = [(605.0, "B", False), (11380.0, "A+", True), (15.4, "C", False)]
    for post, (e_expected, g_expected, f_expected) in zip(reference_script.posts_data, fixed):
        e = reference_script.calculate_engagement_effectiveness(post)
        assert e == e_expected
        assert reference_script.assign_grade(e) == (g_expected, f_expected)

    rng = random.Random(SEED)
    # small-magnitude vectors exercise the low bands, full-range ones the high bands
    posts = list(reference_script.posts_data)
    for i in range(1000):
        post = _legacy_post(100 + i, rng)
        if i % 2:
            for key in ("views", "likes", "comments", "shares"):
                post[key] = rng.randint(0, 6) if i % 4 == 1 else post[key] // 10**rng.randint(0, 6)
        posts.append(post)

    parsed = parse_rows(json.dumps(posts), "json")
    assert not parsed.errors
    records = [normalize(row, DEFAULT_ADAPTERS["generic"]) for row in parsed.rows]
    scored = score_records(records)
    seen_grades = set()
    for post, (_, a) in zip(posts, scored):
        e = reference_script.calculate_engagement_effectiveness(post)
        grade, flag = reference_script.assign_grade(e)
        assert a.effectiveness == e
        assert (a.grade.value, a.flagged) == (grade, flag)
        seen_grades.add(grade)
    assert len(scored) == 1003
    assert seen_grades == {g.value for g in Grade}


@pytest.mark.acceptance("AC5 Grade bands partition [0, inf); boundary values map per half-open intervals")
def test_ac5_grade_partition():
    boundaries = {0.0: Grade.F, 2.999: Grade.F, math.nextafter(3.0, 0.0): Grade.F, 3.0: Grade.E,
                  4.0: Grade.D, 10.0: Grade.C, 100.0: Grade.B, 1000.0: Grade.A, 10000.0: Grade.A_PLUS}
    for e, grade in boundaries.items():
        assert assign_grade(e) is grade, e

    rng = random.Random(SEED)
    lowers = [lo for _, lo, _ in GRADE_BANDS]
    samples = []
    for i in range(10_000):
        kind = i % 3
        if kind == 0:
            samples.append(10 ** rng.uniform(-6, 9))
        elif kind == 1:
            samples.append(rng.uniform(0, 20))
        else:
            lo = rng.choice(lowers)
            samples.append(max(0.0, lo + rng.choice([-1, 1]) * rng.random() * 1e-9 * max(lo, 1)))
    for e in samples:
        matching = [g for g, _, _ in GRADE_BANDS if grade_interval(g)[0] <= e < grade_interval(g)[1]]
        assert len(matching) == 1
        assert assign_grade(e) is matching[0]


@pytest.mark.acceptance("AC6 Linearity, monotonicity, scale law, viral floor, aggregation counterexample")
def test_ac6_metric_properties():
    rng = random.Random(SEED)
    scheme = WeightScheme.default()

    def rand_counts():
        return InteractionCounts({k: rng.randint(0, 10**6) for k in ("view", "like", "comment", "share")})

    for _ in range(2000):
        a, b = rand_counts(), rand_counts()
        assert math.isclose(compute_weighted_score(a + b, scheme),
                            compute_weighted_score(a, scheme) + compute_weighted_score(b, scheme),
                            rel_tol=1e-12)

        t = rng.randint(1, 500)
        bump = InteractionCounts({rng.choice(["view", "like", "comment", "share"]): rng.randint(1, 10**5)})
        before, after = assess(a, t), assess(a + bump, t)
        assert after.weighted_score >= before.weighted_score
        assert after.effectiveness >= before.effectiveness
        assert after.grade.rank >= before.grade.rank
        assert after.viral_multiplier >= before.viral_multiplier

        score, k = compute_weighted_score(a), rng.randint(1, 1000)
        assert math.isclose(compute_effectiveness(score, k * t), compute_effectiveness(score, t) / k,
                            rel_tol=1e-12)

        e = before.effectiveness
        assert (viral_multiplier(e) >= 1) == (assign_grade(e) is Grade.A_PLUS)

    records = [EngagementRecord("hit", "generic", None, 1, InteractionCounts(share=100)),
               EngagementRecord("dud", "generic", None, 9, InteractionCounts())]
    report = aggregate_account(records, "acct")
    mean_e = sum(u.assessment.effectiveness for u in report.units) / len(report.units)
    assert report.effectiveness == 10.0
    assert mean_e == 50.0
    assert report.effectiveness != mean_e


def _oracle_grade(counts: InteractionCounts, t: int):
    post = {"views": counts["view"], "likes": counts["like"],
            "comments": counts["comment"], "shares": counts["share"]}
    e = reference_script.calculate_engagement_effectiveness(post) / t
    return reference_script.assign_grade(e), e


@pytest.mark.acceptance("AC7 Replay determinism: 100 appends over 10 series; one event per upward crossing")
def test_ac7_replay_determinism(tmp_path):
    rng = random.Random(SEED)
    root = tmp_path / "store"
    store = SnapshotStore(root)
    t0 = datetime(2024, 9, 18, tzinfo=timezone.utc)
    clock = {f"series-{i}": t0 for i in range(10)}
    scale = {cid: rng.choice([1, 10, 100, 1000, 10_000]) for cid in clock}
    live_events = []
    for _ in range(100):
        cid = rng.choice(sorted(clock))
        clock[cid] += timedelta(hours=rng.randint(1, 48))
        counts = InteractionCounts(
            view=rng.randint(0, 30) * scale[cid], like=rng.randint(0, 30) * scale[cid],
            comment=rng.randint(0, 10) * scale[cid], share=rng.randint(0, 10) * scale[cid],
        )
        _, event = store.append_snapshot(
            EngagementRecord(cid, "generic", clock[cid], rng.randint(1, 3), counts)
        )
        if event is not None:
            live_events.append(event)

    rebuilt = SnapshotStore(root)
    replayed, replayed_events = rebuilt.replay()
    assert rebuilt.events() == live_events
    assert replayed_events == live_events
    for cid in store.content_ids():
        assert rebuilt.series(cid) == store.series(cid)
        assert replayed[cid] == store.series(cid)

    # independent count of upward crossings and viral step-ups, graded by the reference script
    crossings = viral_steps = 0
    for cid in store.content_ids():
        was_flagged, viral_before = False, 0
        for snap in store.series(cid):
            (grade, flag), e = _oracle_grade(snap.counts, snap.transmissions)
            assert snap.assessment.grade.value == grade
            mult = math.floor(e / 10_000)
            if flag and not was_flagged:
                crossings += 1
            elif grade == "A+" and mult > viral_before:
                viral_steps += 1
            was_flagged, viral_before = flag, mult
    upward = [e for e in live_events if e.from_grade not in (Grade.A, Grade.A_PLUS)]
    assert len(upward) == crossings
    assert len(live_events) == crossings + viral_steps
    assert crossings > 0


@pytest.mark.acceptance("AC8 Ingestion round-trip over all default adapters, exclusions and flat legacy JSON")
def test_ac8_round_trip(data_dir, tmp_path):
    ds = load_dataset([data_dir / "round_trip.json"])
    assert not ds.errors
    assert {r.platform for r in ds.records} == {"instagram", "youtube", "facebook", "generic"}
    assert [d.message for d in ds.warnings] == ["saves excluded", "plays excluded"]
    assert sum(r.captured_at is None for r in ds.records) == 3

    text = serialize_records(ds.records, "json")
    parsed = parse_rows(text.encode("utf-8"), "json")
    assert not parsed.errors
    again = [normalize(row, DEFAULT_ADAPTERS[row.platform]) for row in parsed.rows]
    assert again == ds.records
    assert serialize_records(again, "json") == text

    timed = [r for r in ds.records if r.captured_at is not None]
    path = tmp_path / "timed.csv"
    path.write_text(serialize_records(timed, "csv"), encoding="utf-8")
    assert load_dataset([path]).records == timed
