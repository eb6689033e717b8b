"""Engagement effectiveness scoring for disinformation content."""

from .analysis import (
    CampaignReport,
    SelfInteractionPolicy,
    aggregate_account,
    aggregate_by,
    apply_self_interaction_deduction,
    rank_reports,
    score_records,
)
from .errors import CogmetricError
from .ingest import (
    AdapterRegistry,
    EngagementRecord,
    PlatformAdapter,
    load_dataset,
    normalize,
    parse_rows,
    serialize_records,
)
from .metric import (
    CANONICAL_TYPES,
    Assessment,
    Grade,
    InteractionCounts,
    WeightScheme,
    assess,
    assign_grade,
    compute_effectiveness,
    compute_weighted_score,
    viral_multiplier,
)
from .monitor import FlagEvent, Snapshot, SnapshotStore

__version__ = "0.1.0"

__all__ = [
    "AdapterRegistry",
    "Assessment",
    "CANONICAL_TYPES",
    "CampaignReport",
    "CogmetricError",
    "EngagementRecord",
    "FlagEvent",
    "Grade",
    "InteractionCounts",
    "PlatformAdapter",
    "SelfInteractionPolicy",
    "Snapshot",
    "SnapshotStore",
    "WeightScheme",
    "aggregate_account",
    "aggregate_by",
    "apply_self_interaction_deduction",
    "assess",
    "assign_grade",
    "compute_effectiveness",
    "compute_weighted_score",
    "load_dataset",
    "normalize",
    "parse_rows",
    "rank_reports",
    "score_records",
    "serialize_records",
    "viral_multiplier",
]
