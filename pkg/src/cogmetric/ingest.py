"""Loading exported engagement data into normalized records.

Two file formats are understood.

CSV, UTF-8, RFC 4180 quoting::

    content_id,platform,captured_at,transmissions,<interaction columns...>

Every column outside the fixed set (and the optional ``scoring_unit``) is a
platform-native interaction name. Empty cells are treated as absent.

JSON, an array of objects::

    {"content_id": ..., "platform": ..., "captured_at": ..., "transmissions": ...,
     "counts": {"<native name>": <int>, ...}}

The flat legacy shape ``{"post_id": 1, "views": 5000, "likes": 200, ...}`` is
accepted too; it has ``transmissions`` 1, platform ``generic`` and no capture
time unless given.

Native names are mapped onto interaction types by a per-platform
:class:`PlatformAdapter`.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from types import MappingProxyType

from .errors import CogmetricError
from .metric import CANONICAL_TYPES, COMMENT, LIKE, SHARE, VIEW, InteractionCounts

log = logging.getLogger(__name__)

FIXED_FIELDS = ("content_id", "platform", "captured_at", "transmissions")
SCORING_UNITS = ("post", "account")
DEFAULT_EXCLUDED = frozenset({"plays", "saves"})


class FormatError(CogmetricError):
    """Input cannot be decoded or does not have the expected overall shape."""


class RowError(CogmetricError):
    """A single row violates the schema. Processing of other rows continues."""

    def __init__(self, message: str, source: str = "<input>", location: str | None = None):
        super().__init__(message)
        self.message = message
        self.source = source
        self.location = location

    def __str__(self) -> str:
        where = self.source if self.location is None else f"{self.source}:{self.location}"
        return f"{where}: {self.message}"


class UnknownNativeInteraction(CogmetricError, KeyError):
    def __init__(self, name: str, platform: str = ""):
        super().__init__(name)
        self.name = name
        self.platform = platform

    def __str__(self) -> str:
        suffix = f" for platform {self.platform!r}" if self.platform else ""
        return f"unknown native interaction {self.name!r}{suffix}"


class DatasetIOError(CogmetricError, OSError):
    pass


_FRACTION = re.compile(r"\.(\d+)")


def parse_timestamp(value) -> datetime:
    """Parse an RFC 3339 timestamp into an aware UTC datetime."""
    if isinstance(value, datetime):
        dt = value
    else:
        if not isinstance(value, str) or not value.strip():
            raise ValueError(f"captured_at must be an RFC 3339 timestamp, got {value!r}")
        text = value.strip()
        if text[-1] in "zZ":
            text = text[:-1] + "+00:00"
        # fromisoformat wants exactly 3 or 6 fractional digits
        text = _FRACTION.sub(lambda m: "." + m.group(1)[:6].ljust(6, "0"), text, count=1)
        try:
            dt = datetime.fromisoformat(text)
        except ValueError:
            raise ValueError(f"captured_at is not an RFC 3339 timestamp: {value!r}") from None
    if dt.tzinfo is None:
        raise ValueError(f"captured_at must carry a UTC offset: {value!r}")
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    dt = dt.astimezone(timezone.utc)
    fmt = "%Y-%m-%dT%H:%M:%S.%fZ" if dt.microsecond else "%Y-%m-%dT%H:%M:%SZ"
    return dt.strftime(fmt)


def _parse_count(name: str, value) -> int:
    if value is None or value == "":
        return 0
    if isinstance(value, bool):
        raise ValueError(f"count {name!r} must be a non-negative integer, got {value!r}")
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError(f"count {name!r} must be a non-negative integer, got {value!r}")
        value = int(value)
    if isinstance(value, str):
        try:
            value = int(value.strip())
        except ValueError:
            raise ValueError(f"count {name!r} must be a non-negative integer, got {value!r}") from None
    if not isinstance(value, int):
        raise ValueError(f"count {name!r} must be a non-negative integer, got {value!r}")
    if value < 0:
        raise ValueError(f"count {name!r} must be >= 0, got {value}")
    return value


def _parse_transmissions(value) -> int:
    t = _parse_count("transmissions", value)
    if t < 1:
        raise ValueError("transmissions must be ≥ 1")
    return t


@dataclass(frozen=True)
class RawEngagementRow:
    content_id: str
    platform: str
    captured_at: datetime | None
    transmissions: int
    raw_counts: Mapping[str, int]
    source: str = "<input>"
    scoring_unit: str = "post"
    location: str | None = None


@dataclass
class ParseResult:
    rows: list[RawEngagementRow] = field(default_factory=list)
    errors: list[RowError] = field(default_factory=list)


def _build_row(
    *,
    content_id,
    platform,
    captured_at,
    transmissions,
    counts: Mapping,
    scoring_unit,
    source: str,
    location: str,
    require_time: bool = True,
) -> RawEngagementRow:
    if content_id is None or str(content_id).strip() == "":
        raise ValueError("content_id must be non-empty")
    if isinstance(content_id, bool) or not isinstance(content_id, (str, int)):
        raise ValueError(f"content_id must be a string, got {content_id!r}")
    platform = "generic" if platform in (None, "") else platform
    if not isinstance(platform, str):
        raise ValueError(f"platform must be a string, got {platform!r}")
    if captured_at in (None, ""):
        if require_time:
            raise ValueError("captured_at is required")
        ts = None
    else:
        ts = parse_timestamp(captured_at)
    scoring_unit = "post" if scoring_unit in (None, "") else scoring_unit
    if scoring_unit not in SCORING_UNITS:
        raise ValueError(f"scoring_unit must be one of {SCORING_UNITS}, got {scoring_unit!r}")
    raw = {}
    for name, value in counts.items():
        if not isinstance(name, str) or not name:
            raise ValueError(f"interaction name must be a non-empty string, got {name!r}")
        raw[name] = _parse_count(name, value)
    return RawEngagementRow(
        content_id=str(content_id),
        platform=platform.strip().lower(),
        captured_at=ts,
        transmissions=_parse_transmissions(transmissions),
        raw_counts=MappingProxyType(raw),
        source=source,
        scoring_unit=scoring_unit,
        location=location,
    )


def _decode(data) -> str:
    if isinstance(data, str):
        return data
    if hasattr(data, "read"):
        data = data.read()
        if isinstance(data, str):
            return data
    try:
        return bytes(data).decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise FormatError(f"input is not valid UTF-8: {exc}") from None


def _parse_csv(text: str, source: str) -> ParseResult:
    result = ParseResult()
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        return result
    except csv.Error as exc:
        raise FormatError(f"{source}: malformed CSV header: {exc}") from None
    header = [h.strip() for h in header]
    missing = [f for f in FIXED_FIELDS if f not in header]
    if missing:
        raise FormatError(f"{source}: CSV header is missing required columns {missing}")
    if len(set(header)) != len(header):
        raise FormatError(f"{source}: CSV header has duplicate columns")
    reserved = set(FIXED_FIELDS) | {"scoring_unit"}
    interaction_cols = [h for h in header if h not in reserved]
    while True:
        try:
            values = next(reader)
        except StopIteration:
            break
        except csv.Error as exc:
            result.errors.append(RowError(f"malformed CSV: {exc}", source, f"line {reader.line_num}"))
            continue
        location = f"line {reader.line_num}"
        if not values or all(not v.strip() for v in values):
            continue
        if len(values) != len(header):
            result.errors.append(
                RowError(f"expected {len(header)} fields, got {len(values)}", source, location)
            )
            continue
        cells = dict(zip(header, values))
        try:
            row = _build_row(
                content_id=cells["content_id"].strip(),
                platform=cells["platform"].strip(),
                captured_at=cells["captured_at"].strip(),
                transmissions=cells["transmissions"],
                counts={c: cells[c] for c in interaction_cols if cells[c].strip()},
                scoring_unit=cells.get("scoring_unit", "").strip(),
                source=source,
                location=location,
            )
        except ValueError as exc:
            result.errors.append(RowError(str(exc), source, location))
            continue
        result.rows.append(row)
    return result


_LEGACY_RESERVED = {"post_id", "platform", "captured_at", "transmissions", "scoring_unit"}


def _parse_json(text: str, source: str) -> ParseResult:
    result = ParseResult()
    if not text.strip():
        return result
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{source}: invalid JSON: {exc}") from None
    if not isinstance(payload, list):
        raise FormatError(f"{source}: top-level JSON value must be an array")
    for index, item in enumerate(payload):
        location = f"element {index}"
        try:
            if not isinstance(item, dict):
                raise ValueError("record must be a JSON object")
            if "counts" in item:
                counts = item["counts"]
                if not isinstance(counts, dict):
                    raise ValueError("counts must be a JSON object")
                extra = set(item) - set(FIXED_FIELDS) - {"counts", "scoring_unit"}
                if extra:
                    raise ValueError(f"unexpected keys {sorted(extra)}")
                row = _build_row(
                    content_id=item.get("content_id"),
                    platform=item.get("platform"),
                    captured_at=item.get("captured_at"),
                    transmissions=item.get("transmissions"),
                    counts=counts,
                    scoring_unit=item.get("scoring_unit"),
                    source=source,
                    location=location,
                )
            elif "post_id" in item:
                row = _build_row(
                    content_id=item["post_id"],
                    platform=item.get("platform"),
                    captured_at=item.get("captured_at"),
                    transmissions=item.get("transmissions", 1),
                    counts={k: v for k, v in item.items() if k not in _LEGACY_RESERVED},
                    scoring_unit=item.get("scoring_unit"),
                    source=source,
                    location=location,
                    require_time=False,
                )
            else:
                raise ValueError("record needs either 'counts' or a legacy 'post_id'")
        except ValueError as exc:
            result.errors.append(RowError(str(exc), source, location))
            continue
        result.rows.append(row)
    return result


def parse_rows(data, format: str, source: str = "<input>") -> ParseResult:
    """Parse CSV or JSON engagement data (bytes, str or a binary stream).

    Raises :class:`FormatError` when the input as a whole is unusable;
    per-row problems are collected in ``ParseResult.errors``.
    """
    text = _decode(data)
    if format == "csv":
        return _parse_csv(text, source)
    if format == "json":
        return _parse_json(text, source)
    raise ValueError(f"unsupported format {format!r}; expected 'csv' or 'json'")


@dataclass(frozen=True)
class PlatformAdapter:
    """Maps one platform's native interaction names onto interaction types.

    Canonical names (``view``, ``like``, ...) are always accepted unchanged.
    """

    platform: str
    rename: Mapping[str, str] = field(default_factory=dict)
    exclude: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "rename", MappingProxyType(dict(self.rename)))
        object.__setattr__(self, "exclude", frozenset(self.exclude))
        bad = {k: v for k, v in self.rename.items() if v not in CANONICAL_TYPES}
        if bad:
            raise ValueError(f"{self.platform}: rename targets must be interaction types, got {bad}")
        both = sorted(set(self.rename) & self.exclude)
        if both:
            raise ValueError(f"{self.platform}: names both renamed and excluded: {both}")
        canon_excluded = sorted(self.exclude & set(CANONICAL_TYPES))
        if canon_excluded:
            raise ValueError(f"{self.platform}: canonical types cannot be excluded: {canon_excluded}")

    def to_dict(self) -> dict:
        return {"rename": dict(self.rename), "exclude": sorted(self.exclude)}


DEFAULT_ADAPTERS: Mapping[str, PlatformAdapter] = MappingProxyType(
    {
        "generic": PlatformAdapter(
            "generic",
            {"views": VIEW, "likes": LIKE, "comments": COMMENT, "shares": SHARE},
            DEFAULT_EXCLUDED,
        ),
        "instagram": PlatformAdapter(
            "instagram", {"likes": LIKE, "comments": COMMENT}, DEFAULT_EXCLUDED
        ),
        "youtube": PlatformAdapter(
            "youtube", {"views": VIEW, "likes": LIKE, "comments": COMMENT}, DEFAULT_EXCLUDED
        ),
        "facebook": PlatformAdapter(
            "facebook",
            {"reactions": LIKE, "comments": COMMENT, "shares": SHARE},
            DEFAULT_EXCLUDED,
        ),
    }
)


class AdapterRegistry(Mapping):
    """Platform tag -> adapter. Unknown platforms fall back to ``generic``."""

    def __init__(self, adapters: Mapping[str, PlatformAdapter] | None = None):
        merged = dict(DEFAULT_ADAPTERS)
        merged.update(adapters or {})
        self._adapters = MappingProxyType(merged)

    def __getitem__(self, platform: str) -> PlatformAdapter:
        return self._adapters[platform]

    def __iter__(self):
        return iter(self._adapters)

    def __len__(self) -> int:
        return len(self._adapters)

    def for_platform(self, platform: str) -> PlatformAdapter:
        return self._adapters.get(platform, self._adapters["generic"])

    @classmethod
    def from_dict(cls, data: Mapping) -> AdapterRegistry:
        if not isinstance(data, Mapping):
            raise FormatError("adapter registry must be a JSON object")
        adapters = {}
        for platform, spec in data.items():
            if not isinstance(spec, Mapping):
                raise FormatError(f"adapter {platform!r} must be a JSON object")
            unexpected = set(spec) - {"rename", "exclude"}
            if unexpected:
                raise FormatError(f"adapter {platform!r} has unexpected keys {sorted(unexpected)}")
            try:
                adapters[platform] = PlatformAdapter(
                    platform, spec.get("rename", {}), frozenset(spec.get("exclude", []))
                )
            except (TypeError, ValueError) as exc:
                raise FormatError(str(exc)) from None
        return cls(adapters)

    @classmethod
    def load(cls, path) -> AdapterRegistry:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise DatasetIOError(f"cannot read adapter registry {path}: {exc}") from exc
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON: {exc}") from None


@dataclass(frozen=True)
class EngagementRecord:
    content_id: str
    platform: str
    captured_at: datetime | None
    transmissions: int
    counts: InteractionCounts
    scoring_unit: str = "post"
    warnings: tuple[str, ...] = field(default=(), compare=False)
    source: str = field(default="<input>", compare=False)

    def __post_init__(self):
        if not isinstance(self.counts, InteractionCounts):
            object.__setattr__(self, "counts", InteractionCounts(self.counts))
        object.__setattr__(self, "warnings", tuple(self.warnings))
        if self.transmissions < 1:
            raise ValueError("transmissions must be ≥ 1")
        if self.scoring_unit not in SCORING_UNITS:
            raise ValueError(f"scoring_unit must be one of {SCORING_UNITS}")

    def to_dict(self) -> dict:
        """JSON form; records without a capture time use the flat legacy shape."""
        if self.captured_at is None:
            data = {"post_id": self.content_id, "platform": self.platform,
                    "transmissions": self.transmissions, **self.counts.to_dict()}
        else:
            data = {
                "content_id": self.content_id,
                "platform": self.platform,
                "captured_at": format_timestamp(self.captured_at),
                "transmissions": self.transmissions,
                "counts": self.counts.to_dict(),
            }
        if self.scoring_unit != "post":
            data["scoring_unit"] = self.scoring_unit
        return data


def normalize(
    row: RawEngagementRow,
    adapter: PlatformAdapter | None = None,
    custom_types: Iterable[str] = (),
) -> EngagementRecord:
    """Map a raw row's native counts onto interaction types.

    Names in *custom_types* (types that carry a custom weight) are kept as-is,
    even if the adapter would otherwise exclude them.
    """
    adapter = DEFAULT_ADAPTERS["generic"] if adapter is None else adapter
    custom = frozenset(custom_types)
    counts: dict[str, int] = {}
    warnings: list[str] = []
    for name, value in row.raw_counts.items():
        if name in CANONICAL_TYPES or name in custom:
            target = name
        elif name in adapter.rename:
            target = adapter.rename[name]
        elif name in adapter.exclude:
            warnings.append(f"{name} excluded")
            log.debug("%s: dropping excluded interaction %r", row.content_id, name)
            continue
        else:
            raise UnknownNativeInteraction(name, adapter.platform)
        counts[target] = counts.get(target, 0) + value
    return EngagementRecord(
        content_id=row.content_id,
        platform=row.platform,
        captured_at=row.captured_at,
        transmissions=row.transmissions,
        counts=InteractionCounts(counts),
        scoring_unit=row.scoring_unit,
        warnings=tuple(warnings),
        source=row.source,
    )


def serialize_records(records: Iterable[EngagementRecord], format: str = "json") -> str:
    """Write records in the canonical file schema (inverse of :func:`parse_rows`)."""
    records = list(records)
    if format == "json":
        return json.dumps([r.to_dict() for r in records], indent=2, ensure_ascii=False) + "\n"
    if format == "csv":
        names = []
        for r in records:
            for n in r.counts:
                if n not in names:
                    names.append(n)
        with_unit = any(r.scoring_unit != "post" for r in records)
        header = list(FIXED_FIELDS) + (["scoring_unit"] if with_unit else []) + names
        buf = io.StringIO(newline="")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for r in records:
            if r.captured_at is None:
                raise ValueError(f"{r.content_id}: CSV rows need a captured_at timestamp")
            line = [r.content_id, r.platform, format_timestamp(r.captured_at), r.transmissions]
            if with_unit:
                line.append(r.scoring_unit)
            line += [r.counts[n] for n in names]
            writer.writerow(line)
        return buf.getvalue()
    raise ValueError(f"unsupported format {format!r}")


@dataclass(frozen=True)
class Diagnostic:
    kind: str  # "error" | "warning"
    source: str
    location: str | None
    message: str

    def __str__(self) -> str:
        where = self.source if self.location is None else f"{self.source}:{self.location}"
        return f"{self.kind}: {where}: {self.message}"


@dataclass
class Dataset:
    records: list[EngagementRecord] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)
    rows_in: int = 0
    duplicates: int = 0

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.kind == "error"]

    @property
    def warnings(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.kind == "warning"]


def format_for_path(path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return "csv"
    if suffix == ".json":
        return "json"
    raise FormatError(f"{path}: cannot infer format from extension {suffix!r} (use .csv or .json)")


def load_dataset(
    paths: Iterable,
    adapters: AdapterRegistry | None = None,
    custom_types: Iterable[str] = (),
) -> Dataset:
    """Parse and normalize every file, in order, into one deduplicated dataset.

    Records sharing ``(content_id, captured_at)`` with an earlier record are
    dropped with a warning. Every dropped row shows up in ``diagnostics``.
    """
    adapters = AdapterRegistry() if adapters is None else adapters
    custom = frozenset(custom_types)
    out = Dataset()
    seen: set = set()
    for path in paths:
        fmt = format_for_path(path)
        try:
            data = Path(path).read_bytes()
        except OSError as exc:
            raise DatasetIOError(f"cannot read {path}: {exc}") from exc
        parsed = parse_rows(data, fmt, source=str(path))
        out.rows_in += len(parsed.rows) + len(parsed.errors)
        for err in parsed.errors:
            out.diagnostics.append(Diagnostic("error", err.source, err.location, err.message))
        for row in parsed.rows:
            try:
                record = normalize(row, adapters.for_platform(row.platform), custom)
            except UnknownNativeInteraction as exc:
                out.diagnostics.append(Diagnostic("error", row.source, row.location, str(exc)))
                continue
            for w in record.warnings:
                out.diagnostics.append(Diagnostic("warning", row.source, row.location, w))
            key = (record.content_id, record.captured_at)
            if key in seen:
                out.duplicates += 1
                when = "no timestamp" if record.captured_at is None else format_timestamp(record.captured_at)
                out.diagnostics.append(
                    Diagnostic(
                        "warning",
                        row.source,
                        row.location,
                        f"duplicate record {record.content_id!r} at {when} dropped",
                    )
                )
                continue
            seen.add(key)
            out.records.append(record)
    return out
