"""
Batch ingestion, flagging and ranking
=====================================

Exported files are parsed, normalized per platform and scored in one pass.
Records can then be aggregated into accounts and ranked.
"""

import tempfile
from pathlib import Path

from cogmetric import SelfInteractionPolicy, load_dataset, rank_reports, score_records
from cogmetric.analysis import aggregate_by, render_table

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"

###############################################################################
# Mixed-platform export. ``saves`` and ``plays`` are dropped with a warning
# unless a custom weight is configured for them.

csv_text = """content_id,platform,captured_at,transmissions,likes,comments,reactions,shares,saves
ig-1,instagram,2024-09-18T00:00:00Z,1,37908,650,,,1200
ig-2,instagram,2024-09-18T00:00:00Z,1,420,31,,,
fb-1,facebook,2024-09-20T00:00:00Z,1,,7,137,6,
fb-2,facebook,2024-09-20T00:00:00Z,1,,2,14,0,
"""
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "export.csv"
    path.write_text(csv_text, encoding="utf-8")
    dataset = load_dataset([path, DATA / "reference_posts.json"])

for diagnostic in dataset.diagnostics:
    print(diagnostic)

scored = score_records(dataset.records)
print(render_table((s.record.content_id, s.assessment) for s in scored))
print("flag for review:", [s.record.content_id for s in scored if s.assessment.flagged])

###############################################################################
# Account view: counts and transmissions are summed per platform before
# grading, so the account E is total weighted score over total posts.

reports = aggregate_by(dataset.records, key=lambda r: r.platform)
print()
for report in rank_reports(reports):
    print(f"{report.key:<10} t={report.transmissions:<3} E={report.effectiveness:10.2f} "
          f"grade={report.aggregate.grade.value:<3} grades={ {g.value: n for g, n in report.distribution.items() if n} }")

###############################################################################
# Removing the attacker's own like and comment per transmission can only
# lower the result. It is off by default because the grade bands already
# allow for those two interactions.

policy = SelfInteractionPolicy(enabled=True)
print()
for plain, deducted in zip(scored, score_records(dataset.records, policy=policy)):
    print(f"{plain.record.content_id:<6} {plain.assessment.effectiveness:10.2f} -> "
          f"{deducted.assessment.effectiveness:10.2f}")
