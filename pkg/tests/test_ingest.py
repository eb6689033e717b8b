import io
import json
from datetime import datetime, timezone

import pytest

from cogmetric.ingest import (
    DEFAULT_ADAPTERS,
    AdapterRegistry,
    DatasetIOError,
    EngagementRecord,
    FormatError,
    PlatformAdapter,
    UnknownNativeInteraction,
    format_timestamp,
    load_dataset,
    normalize,
    parse_rows,
    parse_timestamp,
    serialize_records,
)
from cogmetric.metric import InteractionCounts


def test_minimal_csv():
    data = b"content_id,platform,captured_at,transmissions,likes,comments\np1,instagram,2024-09-18T00:00:00Z,1,10,2\n"
    result = parse_rows(data, "csv")
    assert len(result.rows) == 1 and not result.errors
    row = result.rows[0]
    assert row.raw_counts == {"likes": 10, "comments": 2}
    assert row.captured_at == datetime(2024, 9, 18, tzinfo=timezone.utc)


def test_csv_accepts_binary_stream():
    data = io.BytesIO(b"content_id,platform,captured_at,transmissions\np1,x,2024-01-01T00:00:00Z,3\n")
    assert parse_rows(data, "csv").rows[0].transmissions == 3


def test_csv_zero_transmissions_is_row_error():
    data = (
        "content_id,platform,captured_at,transmissions,likes\n"
        "p1,instagram,2024-09-18T00:00:00Z,0,10\n"
        "p2,instagram,2024-09-18T00:00:00Z,1,10\n"
    )
    result = parse_rows(data, "csv", source="f.csv")
    assert [r.content_id for r in result.rows] == ["p2"]
    (err,) = result.errors
    assert err.message == "transmissions must be ≥ 1"
    assert err.location == "line 2" and err.source == "f.csv"


@pytest.mark.parametrize(
    "line, fragment",
    [
        (",instagram,2024-09-18T00:00:00Z,1,1", "content_id"),
        ("p,instagram,yesterday,1,1", "RFC 3339"),
        ("p,instagram,2024-09-18T00:00:00,1,1", "UTC offset"),
        ("p,instagram,2024-09-18T00:00:00Z,1,-4", ">= 0"),
        ("p,instagram,2024-09-18T00:00:00Z,1,lots", "non-negative integer"),
        ("p,instagram,2024-09-18T00:00:00Z,1", "expected 5 fields"),
    ],
)
def test_csv_row_errors(line, fragment):
    data = "content_id,platform,captured_at,transmissions,likes\n" + line + "\n"
    result = parse_rows(data, "csv")
    assert not result.rows
    assert fragment in result.errors[0].message


def test_csv_header_missing_columns():
    with pytest.raises(FormatError):
        parse_rows("content_id,likes\np,1\n", "csv")


def test_undecodable_input():
    with pytest.raises(FormatError):
        parse_rows(b"\xff\xfe\x00bad", "csv")


def test_json_legacy_shape(data_dir):
    result = parse_rows((data_dir / "reference_posts.json").read_bytes(), "json")
    assert len(result.rows) == 3 and not result.errors
    first = result.rows[0]
    assert first.content_id == "1" and first.transmissions == 1 and first.platform == "generic"
    assert first.captured_at is None
    assert dict(first.raw_counts) == {"views": 5000, "likes": 200, "comments": 50, "shares": 10}


def test_json_canonical_shape(data_dir):
    result = parse_rows((data_dir / "case_studies.json").read_bytes(), "json")
    assert [r.platform for r in result.rows] == ["instagram", "youtube", "facebook"]
    assert result.rows[1].scoring_unit == "account"


def test_json_element_errors():
    payload = json.dumps([{"content_id": "a"}, 3, {"foo": 1},
                          {"content_id": "b", "platform": "x", "captured_at": "2024-01-01T00:00:00Z",
                           "transmissions": 1, "counts": {"likes": 1}}])
    result = parse_rows(payload, "json")
    assert len(result.rows) == 1
    assert [e.location for e in result.errors] == ["element 0", "element 1", "element 2"]


def test_json_not_array():
    with pytest.raises(FormatError):
        parse_rows('{"a": 1}', "json")
    with pytest.raises(FormatError):
        parse_rows("[1,", "json")


def test_timestamps():
    dt = parse_timestamp("2024-09-18T02:00:00+02:00")
    assert format_timestamp(dt) == "2024-09-18T00:00:00Z"
    assert format_timestamp(parse_timestamp("2024-09-18T00:00:00.5Z")) == "2024-09-18T00:00:00.500000Z"


def _row(platform, counts):
    payload = [{"content_id": "c", "platform": platform, "captured_at": "2024-01-01T00:00:00Z",
                "transmissions": 1, "counts": counts}]
    return parse_rows(json.dumps(payload), "json").rows[0]


def test_normalize_facebook_reactions():
    rec = normalize(_row("facebook", {"reactions": 137, "comments": 7, "shares": 6}), DEFAULT_ADAPTERS["facebook"])
    assert rec.counts == InteractionCounts(like=137, comment=7, share=6)
    assert rec.warnings == ()


def test_normalize_excludes_saves_with_warning():
    rec = normalize(_row("generic", {"views": 1000, "saves": 50}), DEFAULT_ADAPTERS["generic"])
    assert rec.counts == InteractionCounts(view=1000)
    assert rec.warnings == ("saves excluded",)


def test_normalize_custom_type_opt_in():
    rec = normalize(_row("generic", {"views": 1000, "saves": 50}), DEFAULT_ADAPTERS["generic"], {"saves"})
    assert rec.counts == InteractionCounts(view=1000, saves=50)


def test_normalize_unknown_native_name():
    with pytest.raises(UnknownNativeInteraction) as info:
        normalize(_row("generic", {"upvotes": 10}), DEFAULT_ADAPTERS["generic"])
    assert info.value.name == "upvotes"


def test_normalize_sums_same_type():
    rec = normalize(_row("generic", {"likes": 3, "like": 2}), DEFAULT_ADAPTERS["generic"])
    assert rec.counts == InteractionCounts(like=5)


def test_adapter_invariants():
    with pytest.raises(ValueError):
        PlatformAdapter("x", {"hearts": "love"})
    with pytest.raises(ValueError):
        PlatformAdapter("x", {"hearts": "like"}, frozenset({"hearts"}))


def test_adapter_registry_file(tmp_path):
    path = tmp_path / "adapters.json"
    path.write_text(json.dumps({"reddit": {"rename": {"upvotes": "like"}, "exclude": ["awards"]}}))
    reg = AdapterRegistry.load(path)
    assert reg["reddit"].rename["upvotes"] == "like"
    assert "instagram" in reg
    assert reg.for_platform("tiktok") is reg["generic"]
    path.write_text(json.dumps({"bad": {"rename": {"a": "nope"}}}))
    with pytest.raises(FormatError):
        AdapterRegistry.load(path)


def test_load_dataset_case_studies(data_dir):
    ds = load_dataset([data_dir / "case_studies.json"])
    assert len(ds.records) == 3 and not ds.errors and not ds.diagnostics
    assert ds.records[0].counts == InteractionCounts(like=37908, comment=650)
    assert ds.records[1].counts == InteractionCounts(view=86604097)


def test_load_dataset_csv_matches_json(data_dir):
    a = load_dataset([data_dir / "case_studies.json"]).records
    b = load_dataset([data_dir / "case_studies.csv"]).records
    assert a == b


def test_load_dataset_dedups(data_dir):
    path = data_dir / "case_studies.json"
    ds = load_dataset([path, path])
    assert len(ds.records) == 3
    assert len(ds.warnings) == 3 and ds.duplicates == 3
    assert all("duplicate" in d.message for d in ds.warnings)


def test_load_dataset_empty():
    ds = load_dataset([])
    assert ds.records == [] and ds.diagnostics == []


def test_load_dataset_diagnostics_complete(tmp_path):
    path = tmp_path / "mixed.csv"
    path.write_text(
        "content_id,platform,captured_at,transmissions,likes,upvotes\n"
        "a,instagram,2024-01-01T00:00:00Z,1,5,\n"
        "b,instagram,2024-01-01T00:00:00Z,0,5,\n"
        "c,instagram,2024-01-01T00:00:00Z,1,5,3\n"
        "a,instagram,2024-01-01T00:00:00Z,1,5,\n"
    )
    ds = load_dataset([path])
    assert ds.rows_in == len(ds.records) + len(ds.errors) + ds.duplicates
    assert (len(ds.records), len(ds.errors), ds.duplicates) == (1, 2, 1)


def test_load_dataset_missing_file(tmp_path):
    with pytest.raises(DatasetIOError):
        load_dataset([tmp_path / "nope.csv"])
    with pytest.raises(FormatError):
        load_dataset([tmp_path / "data.txt"])


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_serialize_round_trip(data_dir, fmt, tmp_path):
    records = load_dataset([data_dir / "case_studies.json"]).records
    path = tmp_path / f"out.{fmt}"
    path.write_text(serialize_records(records, fmt))
    assert load_dataset([path]).records == records


def test_record_requires_positive_transmissions():
    with pytest.raises(ValueError):
        EngagementRecord("a", "generic", None, 0, InteractionCounts())
