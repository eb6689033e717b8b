"""Command-line entry point: ``cogmetric score|watch|report``.

Exit codes: 0 on success (flagged content is not an error), 1 on I/O, format
or store failures and out-of-order snapshots, 2 when input rows were rejected.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

from .analysis import aggregate_account, grade_scale_table, rank_reports, score_records
from .errors import CogmetricError
from .ingest import AdapterRegistry, Dataset, EngagementRecord, format_timestamp, load_dataset
from .metric import Grade, WeightScheme, viral_label
from .monitor import OutOfOrderSnapshot, SnapshotStore

STORE_ENV = "COGMETRIC_STORE"
NON_CANONICAL = " [non-canonical scheme]"

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "array",
    "items": {
        "type": "object",
        "required": [
            "rank",
            "content_id",
            "platform",
            "effectiveness",
            "grade",
            "description",
            "viral_multiplier",
            "flagged",
            "canonical_scheme",
            "trend",
        ],
        "properties": {
            "rank": {"type": "integer", "minimum": 1},
            "content_id": {"type": "string"},
            "platform": {"type": "string"},
            "effectiveness": {"type": "number", "minimum": 0},
            "grade": {"enum": [g.value for g in Grade]},
            "description": {"type": "string"},
            "viral_multiplier": {"type": "integer", "minimum": 0},
            "flagged": {"type": "boolean"},
            "canonical_scheme": {"type": "boolean"},
            "trend": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["captured_at", "effectiveness", "grade", "delta"],
                    "properties": {
                        "captured_at": {"type": "string"},
                        "effectiveness": {"type": "number"},
                        "grade": {"enum": [g.value for g in Grade]},
                        "delta": {"type": "number"},
                    },
                },
            },
            "reevaluated": {
                "type": "object",
                "required": ["effectiveness", "grade", "canonical_scheme"],
            },
        },
    },
}


class CliError(Exception):
    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


def _load_scheme(path) -> WeightScheme | None:
    if path is None:
        return None
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(f"cannot read weights file {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON: {exc}")
    if not isinstance(data, dict):
        raise CliError(f"{path}: weights file must be a JSON object of name -> weight")
    try:
        return WeightScheme.from_overrides(data)
    except (TypeError, ValueError) as exc:
        raise CliError(f"{path}: {exc}")


def _load_dataset(args, scheme: WeightScheme) -> Dataset:
    adapters = AdapterRegistry.load(args.adapters) if args.adapters else AdapterRegistry()
    return load_dataset(args.inputs, adapters, scheme.custom_types)


def _report_diagnostics(dataset: Dataset, err) -> int:
    for d in dataset.diagnostics:
        print(d, file=err)
    return 2 if dataset.errors else 0


def cmd_score(args, out, err) -> int:
    scheme = _load_scheme(args.weights) or WeightScheme.default()
    dataset = _load_dataset(args, scheme)
    scored = score_records(dataset.records, scheme, flag_grade=args.flag_grade)
    marker = "" if scheme.is_canonical else NON_CANONICAL

    if args.format == "json":
        payload = []
        for record, a in scored:
            payload.append({
                "content_id": record.content_id,
                "platform": record.platform,
                "captured_at": None if record.captured_at is None else format_timestamp(record.captured_at),
                "scoring_unit": record.scoring_unit,
                "counts": record.counts.to_dict(),
                **a.to_dict(),
            })
        print(json.dumps(payload, indent=2, ensure_ascii=False), file=out)
    elif args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["content_id", "platform", "captured_at", "transmissions", "weighted_score",
             "effectiveness", "grade", "viral_multiplier", "flagged", "canonical_scheme"]
        )
        for record, a in scored:
            writer.writerow(
                [record.content_id, record.platform,
                 "" if record.captured_at is None else format_timestamp(record.captured_at),
                 record.transmissions, repr(a.weighted_score), repr(a.effectiveness),
                 a.grade.value, a.viral_multiplier, str(a.flagged).lower(),
                 str(a.canonical_scheme).lower()]
            )
        out.write(buf.getvalue())
    else:
        flagged = []
        for record, a in scored:
            unit = record.scoring_unit
            print(f"{unit.capitalize()} {record.content_id} - E of {a.effectiveness:.2f} "
                  f"graded {a.grade.value}{marker}", file=out)
            if a.flagged:
                flagged.append(record.content_id)
                print(f"Flagging {unit} {record.content_id} for review.", file=out)
        if flagged:
            print(f"These posts are flagged for review: [{', '.join(flagged)}]", file=out)
        else:
            print("No posts are flagged for review.", file=out)
    return _report_diagnostics(dataset, err)


def _store_root(args) -> str:
    root = args.store or os.environ.get(STORE_ENV)
    if not root:
        raise CliError(f"no store given; pass --store or set {STORE_ENV}")
    return root


def cmd_watch(args, out, err) -> int:
    scheme = _load_scheme(args.weights)
    store = SnapshotStore(_store_root(args), scheme, flag_grade=args.flag_grade)
    dataset = _load_dataset(args, store.scheme)
    code = _report_diagnostics(dataset, err)
    rejected = []
    for record in dataset.records:
        try:
            _, event = store.append_snapshot(record)
        except OutOfOrderSnapshot as exc:
            rejected.append(record.content_id)
            print(f"error: {exc}", file=err)
            continue
        except ValueError as exc:
            print(f"error: {exc}", file=err)
            code = 2
            continue
        if event is not None:
            print(event, file=out)
    if rejected:
        print(f"out-of-order snapshots for: {', '.join(rejected)}", file=err)
        return 1
    return code


def cmd_report(args, out, err) -> int:
    store = SnapshotStore(_store_root(args), create=False)
    alt = _load_scheme(args.weights)
    reevaluated = {}
    if alt is not None and alt != store.scheme:
        reevaluated = {r.content_id: r for r in store.reevaluate_all(alt)}

    reports = []
    for content_id in store.content_ids():
        snap = store.latest(content_id)
        reports.append(aggregate_account([_snapshot_record(snap)], content_id, store.scheme,
                                         flag_grade=store.flag_grade))
    ranking = rank_reports(reports)

    entries = []
    for rank, report in enumerate(ranking, 1):
        a = report.aggregate
        cid = report.key
        entry = {
            "rank": rank,
            "content_id": cid,
            "platform": store.latest(cid).platform,
            "effectiveness": a.effectiveness,
            "grade": a.grade.value,
            "description": a.description,
            "viral_multiplier": a.viral_multiplier,
            "flagged": a.flagged,
            "canonical_scheme": a.canonical_scheme,
            "trend": [p.to_dict() for p in store.series_trend(cid)],
        }
        if cid in reevaluated:
            r = reevaluated[cid]
            entry["reevaluated"] = {
                "effectiveness": r.new_effectiveness,
                "grade": r.new_grade.value,
                "canonical_scheme": r.canonical_scheme,
            }
        entries.append(entry)

    if args.format == "json":
        print(json.dumps(entries, indent=2, ensure_ascii=False), file=out)
    elif args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["rank", "content_id", "captured_at", "effectiveness", "grade", "delta"])
        for e in entries:
            for p in e["trend"]:
                writer.writerow([e["rank"], e["content_id"], p["captured_at"],
                                 repr(p["effectiveness"]), p["grade"], repr(p["delta"])])
        out.write(buf.getvalue())
    else:
        if not entries:
            print("Store is empty.", file=out)
        for e in entries:
            desc = e["description"]
            if e["viral_multiplier"]:
                desc += f" ({viral_label(e['viral_multiplier'])})"
            if not e["canonical_scheme"]:
                desc += NON_CANONICAL
            print(f"{e['rank']:>3}. {e['content_id']} [{e['platform']}] "
                  f"E {e['effectiveness']:.2f} grade {e['grade']} {desc}", file=out)
            if "reevaluated" in e:
                r = e["reevaluated"]
                tag = "" if r["canonical_scheme"] else NON_CANONICAL
                print(f"     reevaluated: E {r['effectiveness']:.2f} grade {r['grade']}{tag}", file=out)
            for p in e["trend"]:
                print(f"     {p['captured_at']}  E {p['effectiveness']:.2f}  "
                      f"{p['grade']:<2}  {p['delta']:+.2f}", file=out)
    return 0


def _snapshot_record(snap) -> EngagementRecord:
    return EngagementRecord(snap.content_id, snap.platform, snap.captured_at,
                            snap.transmissions, snap.counts)


def defaults_text() -> str:
    scheme = WeightScheme.default()
    lines = ["weights:"]
    lines += [f"  {name:<8} {w:g}" for name, w in scheme.items()]
    lines += ["", "grades (first matching band from the top):", grade_scale_table(),
              "", "flag for review at grade A or above; viral xN = floor(E / 10000)"]
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("table", "json", "csv"), default="table")
    common.add_argument("--weights", metavar="FILE", help="JSON object of interaction type -> weight")
    common.add_argument("--adapters", metavar="FILE", help="JSON adapter registry")
    common.add_argument("--store", metavar="DIR", help=f"snapshot store (default ${STORE_ENV})")
    common.add_argument("--flag-grade", choices=("A", "A+"), default="A", type=str)

    parser = argparse.ArgumentParser(
        prog="cogmetric", description="Engagement effectiveness scoring for disinformation content."
    )
    parser.add_argument("--paper-defaults", action="store_true",
                        help="print the default weights and grade bands and exit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("score", parents=[common], help="score exported engagement files")
    p.add_argument("inputs", nargs="*", metavar="FILE")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("watch", parents=[common], help="append snapshots to a store")
    p.add_argument("inputs", nargs="*", metavar="FILE")
    p.set_defaults(func=cmd_watch)

    p = sub.add_parser("report", parents=[common], help="trends and ranking from a store")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.paper_defaults:
        print(defaults_text(), file=out)
        return 0
    if args.command is None:
        parser.print_usage(err)
        return 1
    args.flag_grade = Grade(args.flag_grade)
    try:
        return args.func(args, out, err)
    except CliError as exc:
        print(f"error: {exc}", file=err)
        return exc.code
    except (CogmetricError, OSError) as exc:
        print(f"error: {exc}", file=err)
        return 1


if __name__ == "__main__":
    sys.exit(main())
