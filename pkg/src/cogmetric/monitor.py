"""Append-only snapshot store for re-evaluating content over time.

Layout of a store directory::

    <root>/store.json             weight scheme and flag grade of the store
    <root>/<content_id>.ndjson    one snapshot per line, oldest first
    <root>/events.ndjson          flag events, in append order

Content ids are percent-encoded to form file names. Every snapshot line
carries a store-wide sequence number so the cross-series append order (and
therefore the event sequence) can be replayed exactly from the logs.
"""

from __future__ import annotations

import json
import os
import threading
from collections.abc import Iterator
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from urllib.parse import quote

from .errors import CogmetricError
from .ingest import EngagementRecord, format_timestamp, parse_timestamp
from .metric import Assessment, Grade, InteractionCounts, WeightScheme, assess, assign_grade

META_FILE = "store.json"
EVENTS_FILE = "events.ndjson"
SERIES_SUFFIX = ".ndjson"


class StorageError(CogmetricError):
    pass


class OutOfOrderSnapshot(CogmetricError, ValueError):
    def __init__(self, content_id: str, captured_at, latest):
        super().__init__(
            f"{content_id}: snapshot at {captured_at} is not after latest snapshot at {latest}"
        )
        self.content_id = content_id


class UnknownContentId(CogmetricError, KeyError):
    def __str__(self) -> str:
        return f"no snapshot series for content id {self.args[0]!r}"


@dataclass(frozen=True)
class Snapshot:
    seq: int
    content_id: str
    platform: str
    captured_at: datetime
    transmissions: int
    counts: InteractionCounts
    assessment: Assessment

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "content_id": self.content_id,
            "platform": self.platform,
            "captured_at": format_timestamp(self.captured_at),
            "transmissions": self.transmissions,
            "counts": self.counts.to_dict(),
            "assessment": self.assessment.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> Snapshot:
        return cls(
            seq=int(data["seq"]),
            content_id=data["content_id"],
            platform=data["platform"],
            captured_at=parse_timestamp(data["captured_at"]),
            transmissions=int(data["transmissions"]),
            counts=InteractionCounts(data["counts"]),
            assessment=Assessment.from_dict(data["assessment"]),
        )


@dataclass(frozen=True)
class FlagEvent:
    content_id: str
    at: datetime
    from_grade: Grade | None
    to_grade: Grade
    effectiveness_before: float | None
    effectiveness_after: float
    viral_before: int
    viral_after: int

    def to_dict(self) -> dict:
        return {
            "content_id": self.content_id,
            "at": format_timestamp(self.at),
            "from_grade": None if self.from_grade is None else self.from_grade.value,
            "to_grade": self.to_grade.value,
            "effectiveness_before": self.effectiveness_before,
            "effectiveness_after": self.effectiveness_after,
            "viral_before": self.viral_before,
            "viral_after": self.viral_after,
        }

    @classmethod
    def from_dict(cls, data: dict) -> FlagEvent:
        return cls(
            content_id=data["content_id"],
            at=parse_timestamp(data["at"]),
            from_grade=None if data["from_grade"] is None else Grade(data["from_grade"]),
            to_grade=Grade(data["to_grade"]),
            effectiveness_before=data["effectiveness_before"],
            effectiveness_after=data["effectiveness_after"],
            viral_before=int(data["viral_before"]),
            viral_after=int(data["viral_after"]),
        )

    def __str__(self) -> str:
        before = "-" if self.from_grade is None else self.from_grade.value
        prev = "-" if self.effectiveness_before is None else f"{self.effectiveness_before:.2f}"
        line = (
            f"FLAG {self.content_id} at {format_timestamp(self.at)}: "
            f"{before} -> {self.to_grade.value} (E {prev} -> {self.effectiveness_after:.2f})"
        )
        if self.viral_after > self.viral_before:
            line += f" viral x{self.viral_after}"
        return line


def flag_event(prev: Snapshot | None, cur: Snapshot) -> FlagEvent | None:
    """Event for *cur* following *prev*, if any.

    Fires on an upward crossing of the flag threshold, or when the viral
    multiplier grows while the content is graded A+. Downward moves never fire.
    """
    a = cur.assessment
    was_flagged = prev is not None and prev.assessment.flagged
    viral_before = 0 if prev is None else prev.assessment.viral_multiplier
    newly_flagged = a.flagged and not was_flagged
    went_viral = a.grade is Grade.A_PLUS and a.viral_multiplier > viral_before
    if not (newly_flagged or went_viral):
        return None
    return FlagEvent(
        content_id=cur.content_id,
        at=cur.captured_at,
        from_grade=None if prev is None else prev.assessment.grade,
        to_grade=a.grade,
        effectiveness_before=None if prev is None else prev.assessment.effectiveness,
        effectiveness_after=a.effectiveness,
        viral_before=viral_before,
        viral_after=a.viral_multiplier,
    )


@dataclass(frozen=True)
class TrendPoint:
    captured_at: datetime
    effectiveness: float
    grade: Grade
    delta: float

    def to_dict(self) -> dict:
        return {
            "captured_at": format_timestamp(self.captured_at),
            "effectiveness": self.effectiveness,
            "grade": self.grade.value,
            "delta": self.delta,
        }


@dataclass(frozen=True)
class Reevaluation:
    content_id: str
    old_effectiveness: float
    new_effectiveness: float
    old_grade: Grade
    new_grade: Grade
    canonical_scheme: bool

    @property
    def grade_changed(self) -> bool:
        return self.old_grade is not self.new_grade


def _file_stem(content_id: str) -> str:
    stem = quote(content_id, safe="")
    if stem == "events" or stem.startswith("."):
        # keep series files clear of the reserved names
        stem = "%{:02X}".format(ord(stem[0])) + stem[1:]
    return stem


def _write_line(path: Path, obj: dict) -> None:
    line = json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n"
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(line)
        fh.flush()
        os.fsync(fh.fileno())


def _read_lines(path: Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise StorageError(f"{path}:{n}: corrupt log line: {exc}") from None


class SnapshotStore:
    """Snapshot series keyed by content id, persisted as NDJSON logs.

    The scheme a store is created with is saved in ``store.json``; reopening
    with a different scheme is an error (use :meth:`reevaluate_all` to look at
    alternative weights without touching history).
    """

    def __init__(
        self,
        root,
        scheme: WeightScheme | None = None,
        *,
        flag_grade: Grade | None = None,
        create: bool = True,
    ):
        self.root = Path(root)
        self._lock = threading.Lock()
        if not create and not self.root.is_dir():
            raise StorageError(f"no store at {self.root}")
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StorageError(f"cannot create store at {self.root}: {exc}") from exc
        meta_path = self.root / META_FILE
        if not create and not meta_path.exists():
            # read-only view of an empty directory
            self.scheme = WeightScheme.default() if scheme is None else scheme
            self.flag_grade = Grade.A if flag_grade is None else Grade(flag_grade)
        elif meta_path.exists():
            try:
                meta = json.loads(meta_path.read_text(encoding="utf-8"))
                stored_scheme = WeightScheme(meta["scheme"])
                stored_flag = Grade(meta["flag_grade"])
            except (OSError, ValueError, KeyError, TypeError) as exc:
                raise StorageError(f"unreadable store metadata {meta_path}: {exc}") from exc
            if scheme is not None and scheme != stored_scheme:
                raise StorageError(f"{self.root} was created with a different weight scheme")
            if flag_grade is not None and Grade(flag_grade) is not stored_flag:
                raise StorageError(f"{self.root} was created with flag grade {stored_flag.value}")
            self.scheme, self.flag_grade = stored_scheme, stored_flag
        else:
            self.scheme = WeightScheme.default() if scheme is None else scheme
            self.flag_grade = Grade.A if flag_grade is None else Grade(flag_grade)
            meta = {"scheme": self.scheme.to_dict(), "flag_grade": self.flag_grade.value}
            tmp = meta_path.with_suffix(".tmp")
            try:
                tmp.write_text(json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8")
                os.replace(tmp, meta_path)
            except OSError as exc:
                raise StorageError(f"cannot write {meta_path}: {exc}") from exc
        self._series: dict[str, list[Snapshot]] = {}
        self._next_seq = 0
        self._load()

    def _series_path(self, content_id: str) -> Path:
        return self.root / (_file_stem(content_id) + SERIES_SUFFIX)

    def _load(self) -> None:
        for path in sorted(self.root.glob("*" + SERIES_SUFFIX)):
            if path.name == EVENTS_FILE:
                continue
            try:
                snaps = [Snapshot.from_dict(d) for d in _read_lines(path)]
            except (KeyError, ValueError, TypeError) as exc:
                raise StorageError(f"{path}: invalid snapshot: {exc}") from exc
            if not snaps:
                continue
            content_id = snaps[0].content_id
            if _file_stem(content_id) + SERIES_SUFFIX != path.name:
                raise StorageError(f"{path}: holds content id {content_id!r}")
            self._series[content_id] = snaps
            self._next_seq = max(self._next_seq, snaps[-1].seq + 1)

    def content_ids(self) -> list[str]:
        return sorted(self._series)

    def series(self, content_id: str) -> list[Snapshot]:
        try:
            return list(self._series[content_id])
        except KeyError:
            raise UnknownContentId(content_id) from None

    def latest(self, content_id: str) -> Snapshot:
        return self.series(content_id)[-1]

    def events(self) -> list[FlagEvent]:
        path = self.root / EVENTS_FILE
        if not path.exists():
            return []
        try:
            return [FlagEvent.from_dict(d) for d in _read_lines(path)]
        except (KeyError, ValueError, TypeError) as exc:
            raise StorageError(f"{path}: invalid event: {exc}") from exc

    def append_snapshot(self, record: EngagementRecord) -> tuple[Snapshot, FlagEvent | None]:
        if record.captured_at is None:
            raise ValueError(f"{record.content_id}: snapshots need a captured_at timestamp")
        assessment = assess(record.counts, record.transmissions, self.scheme, flag_grade=self.flag_grade)
        with self._lock:
            history = self._series.get(record.content_id, [])
            prev = history[-1] if history else None
            if prev is not None and record.captured_at <= prev.captured_at:
                raise OutOfOrderSnapshot(
                    record.content_id,
                    format_timestamp(record.captured_at),
                    format_timestamp(prev.captured_at),
                )
            snap = Snapshot(
                seq=self._next_seq,
                content_id=record.content_id,
                platform=record.platform,
                captured_at=record.captured_at,
                transmissions=record.transmissions,
                counts=record.counts,
                assessment=assessment,
            )
            event = flag_event(prev, snap)
            try:
                _write_line(self._series_path(record.content_id), snap.to_dict())
                if event is not None:
                    _write_line(self.root / EVENTS_FILE, event.to_dict())
            except OSError as exc:
                raise StorageError(f"cannot append to store {self.root}: {exc}") from exc
            self._series.setdefault(record.content_id, []).append(snap)
            self._next_seq += 1
        return snap, event

    def series_trend(self, content_id: str) -> list[TrendPoint]:
        points = []
        prev_e = None
        for snap in self.series(content_id):
            a = snap.assessment
            if assign_grade(a.effectiveness) is not a.grade:
                raise StorageError(
                    f"{content_id}: stored grade {a.grade.value} does not match E={a.effectiveness}"
                )
            delta = 0.0 if prev_e is None else a.effectiveness - prev_e
            points.append(TrendPoint(snap.captured_at, a.effectiveness, a.grade, delta))
            prev_e = a.effectiveness
        return points

    def reevaluate_all(self, scheme: WeightScheme) -> list[Reevaluation]:
        """Score each series' latest snapshot under *scheme*; history is untouched."""
        out = []
        for content_id in self.content_ids():
            snap = self._series[content_id][-1]
            new = assess(snap.counts, snap.transmissions, scheme, flag_grade=self.flag_grade)
            out.append(
                Reevaluation(
                    content_id=content_id,
                    old_effectiveness=snap.assessment.effectiveness,
                    new_effectiveness=new.effectiveness,
                    old_grade=snap.assessment.grade,
                    new_grade=new.grade,
                    canonical_scheme=scheme.is_canonical,
                )
            )
        return out

    def replay(self) -> tuple[dict[str, list[Snapshot]], list[FlagEvent]]:
        """Recompute every assessment and event from the raw logged counts."""
        all_snaps = sorted(
            (s for snaps in self._series.values() for s in snaps), key=lambda s: s.seq
        )
        rebuilt: dict[str, list[Snapshot]] = {}
        events: list[FlagEvent] = []
        for s in all_snaps:
            a = assess(s.counts, s.transmissions, self.scheme, flag_grade=self.flag_grade)
            snap = Snapshot(s.seq, s.content_id, s.platform, s.captured_at, s.transmissions, s.counts, a)
            history = rebuilt.setdefault(s.content_id, [])
            event = flag_event(history[-1] if history else None, snap)
            if event is not None:
                events.append(event)
            history.append(snap)
        return rebuilt, events
