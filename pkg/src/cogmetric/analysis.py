"""Batch scoring, account-level aggregation and ranking."""

from __future__ import annotations

import json
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import NamedTuple

from .errors import CogmetricError
from .ingest import EngagementRecord
from .metric import (
    COMMENT,
    GRADE_BANDS,
    LIKE,
    Assessment,
    Grade,
    InteractionCounts,
    WeightScheme,
    assess,
    viral_label,
)


class EmptyGroup(CogmetricError, ValueError):
    pass


class ScoringError(CogmetricError):
    """A metric error raised while scoring one record."""

    def __init__(self, content_id: str, cause: Exception):
        super().__init__(f"{content_id}: {cause}")
        self.content_id = content_id
        self.cause = cause


@dataclass(frozen=True)
class SelfInteractionPolicy:
    """Optional removal of the attacker's own interactions before scoring.

    When enabled, ``deductions[type] * transmissions`` is subtracted from each
    count, clamped at zero. Off by default: the grade thresholds already
    budget for the attacker's own like and comment.
    """

    deductions: Mapping[str, int] = field(
        default_factory=lambda: MappingProxyType({LIKE: 1, COMMENT: 1})
    )
    enabled: bool = False

    def __post_init__(self):
        for name, d in self.deductions.items():
            if isinstance(d, bool) or not isinstance(d, int) or d < 0:
                raise ValueError(f"deduction for {name!r} must be a non-negative integer")
        object.__setattr__(self, "deductions", MappingProxyType(dict(self.deductions)))


def apply_self_interaction_deduction(
    counts: InteractionCounts, policy: SelfInteractionPolicy, transmissions: int
) -> InteractionCounts:
    if not policy.enabled:
        return counts
    reduced = counts.to_dict()
    for name, per_transmission in policy.deductions.items():
        if name in reduced:
            reduced[name] = max(0, reduced[name] - per_transmission * transmissions)
    return InteractionCounts(reduced)


class ScoredRecord(NamedTuple):
    record: EngagementRecord
    assessment: Assessment


def _assess_record(
    record: EngagementRecord,
    scheme: WeightScheme,
    policy: SelfInteractionPolicy,
    flag_grade: Grade,
) -> Assessment:
    counts = apply_self_interaction_deduction(record.counts, policy, record.transmissions)
    try:
        return assess(counts, record.transmissions, scheme, flag_grade=flag_grade)
    except CogmetricError as exc:
        raise ScoringError(record.content_id, exc) from exc


def score_records(
    records: Iterable[EngagementRecord],
    scheme: WeightScheme | None = None,
    policy: SelfInteractionPolicy | None = None,
    *,
    flag_grade: Grade = Grade.A,
) -> list[ScoredRecord]:
    """Assess every record; output order follows input order."""
    scheme = WeightScheme.default() if scheme is None else scheme
    policy = SelfInteractionPolicy() if policy is None else policy
    return [ScoredRecord(r, _assess_record(r, scheme, policy, flag_grade)) for r in records]


@dataclass(frozen=True)
class CampaignReport:
    key: str
    units: tuple[ScoredRecord, ...]
    counts: InteractionCounts
    aggregate: Assessment
    distribution: Mapping[Grade, int]
    flagged_ids: tuple[str, ...]
    excluded_ids: tuple[str, ...] = ()

    @property
    def transmissions(self) -> int:
        return self.aggregate.transmissions

    @property
    def effectiveness(self) -> float:
        return self.aggregate.effectiveness

    @property
    def viral_multiplier(self) -> int:
        return self.aggregate.viral_multiplier

    def to_dict(self) -> dict:
        return {
            "key": self.key,
            "counts": self.counts.to_dict(),
            "aggregate": self.aggregate.to_dict(),
            "distribution": {g.value: n for g, n in self.distribution.items()},
            "flagged_ids": list(self.flagged_ids),
            "excluded_ids": list(self.excluded_ids),
            "units": [
                {"record": s.record.to_dict(), "assessment": s.assessment.to_dict()}
                for s in self.units
            ],
        }


def aggregate_account(
    records: Sequence[EngagementRecord],
    key: str | None = None,
    scheme: WeightScheme | None = None,
    policy: SelfInteractionPolicy | None = None,
    *,
    exclude: Callable[[EngagementRecord], bool] | None = None,
    flag_grade: Grade = Grade.A,
) -> CampaignReport:
    """Score a group of records as one account or campaign.

    Counts and transmissions are summed first and the aggregate assessment is
    computed from the totals, so the aggregate ``E`` is ``sum(I) / sum(t)``
    rather than a mean of per-record ``E``. *exclude* is a hook for dropping
    records (e.g. suspected bot activity) before aggregation.
    """
    scheme = WeightScheme.default() if scheme is None else scheme
    policy = SelfInteractionPolicy() if policy is None else policy
    records = list(records)
    excluded = [r for r in records if exclude is not None and exclude(r)]
    kept = [r for r in records if not (exclude is not None and exclude(r))]
    if not kept:
        raise EmptyGroup(f"no records to aggregate for {key!r}")
    if key is None:
        key = kept[0].content_id if len(kept) == 1 else kept[0].platform

    units = tuple(score_records(kept, scheme, policy, flag_grade=flag_grade))
    total = InteractionCounts()
    transmissions = 0
    for r in kept:
        total = total + apply_self_interaction_deduction(r.counts, policy, r.transmissions)
        transmissions += r.transmissions
    try:
        aggregate = assess(total, transmissions, scheme, flag_grade=flag_grade)
    except CogmetricError as exc:
        raise ScoringError(key, exc) from exc

    distribution = {g: 0 for g, _, _ in GRADE_BANDS}
    for unit in units:
        distribution[unit.assessment.grade] += 1
    return CampaignReport(
        key=key,
        units=units,
        counts=total,
        aggregate=aggregate,
        distribution=MappingProxyType(distribution),
        flagged_ids=tuple(u.record.content_id for u in units if u.assessment.flagged),
        excluded_ids=tuple(r.content_id for r in excluded),
    )


def aggregate_by(
    records: Iterable[EngagementRecord],
    key: Callable[[EngagementRecord], str] = lambda r: r.platform,
    scheme: WeightScheme | None = None,
    policy: SelfInteractionPolicy | None = None,
    **kwargs,
) -> list[CampaignReport]:
    """One report per group, groups in order of first appearance."""
    groups: dict[str, list[EngagementRecord]] = {}
    for r in records:
        groups.setdefault(key(r), []).append(r)
    return [aggregate_account(rs, k, scheme, policy, **kwargs) for k, rs in groups.items()]


RANK_KEYS = ("effectiveness", "viral_multiplier")


def rank_reports(reports: Iterable[CampaignReport], key: str = "effectiveness") -> list[CampaignReport]:
    """Descending by *key*; ties ordered by report key, then input order."""
    if key not in RANK_KEYS:
        raise ValueError(f"rank key must be one of {RANK_KEYS}, got {key!r}")
    return sorted(reports, key=lambda r: (-getattr(r.aggregate, key), r.key))


def reports_to_json(reports: Iterable[CampaignReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, ensure_ascii=False)


def render_table(rows: Iterable[tuple[str, Assessment]]) -> str:
    """Plain-text table with the grading-scale columns: E, grade, description."""
    lines = [f"{'id':<24} {'E':>16}  {'grade':<5} description"]
    for name, a in rows:
        desc = a.description
        if a.viral_multiplier:
            desc += f" ({viral_label(a.viral_multiplier)})"
        if not a.canonical_scheme:
            desc += " [non-canonical scheme]"
        lines.append(f"{name:<24} {a.effectiveness:>16.2f}  {a.grade.value:<5} {desc}")
    return "\n".join(lines)


def grade_scale_table() -> str:
    """The grading scale itself, one band per line."""
    lines = [f"{'E range':<18} {'grade':<5} description"]
    upper = None
    for grade, lower, desc in GRADE_BANDS:
        span = f"[{lower:g}, inf)" if upper is None else f"[{lower:g}, {upper:g})"
        lines.append(f"{span:<18} {grade.value:<5} {desc}")
        upper = lower
    return "\n".join(lines)
