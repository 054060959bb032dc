from datetime import datetime

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wsnmarkov.exceptions import DataError, EmptySeriesError
from wsnmarkov.ingestion import (RejectReason, Rejection, SensorRecord, build_series,
                                 parse_lines, parse_record, read_series_csv, series_to_csv_text,
                                 write_series_csv)

from .conftest import FIXTURES


def rec(ts, temp, mote=1, epoch=1):
    return SensorRecord(datetime.fromisoformat(ts), epoch, mote, temp, 40.0, 45.08, 2.69)


# ---------------------------------------------------------------------------
# parse_record
# ---------------------------------------------------------------------------

def test_parse_record_example_row():
    r = parse_record("2004-03-01 00:59:16.02785 2 1 19.98 37.09 45.08 2.69")
    assert isinstance(r, SensorRecord)
    assert r.timestamp == datetime(2004, 3, 1, 0, 59, 16, 27850)
    assert (r.epoch, r.mote_id) == (2, 1)
    assert (r.temperature, r.humidity, r.light, r.voltage) == (19.98, 37.09, 45.08, 2.69)


def test_parse_record_without_fraction():
    r = parse_record("2004-03-01 00:59:16 2 1 19.98 37.09 45.08 2.69")
    assert r.timestamp == datetime(2004, 3, 1, 0, 59, 16)


@pytest.mark.parametrize("line, reason", [
    ("2004-03-01 00:59:16.02785 2 1 19.98 37.09", RejectReason.MISSING_FIELD),
    ("2004-03-01 00:59:16.02785 2 1 19.98 37.09 45.08 2.69 7", RejectReason.EXTRA_FIELD),
    ("2004-13-01 00:59:16.02785 2 1 19.98 37.09 45.08 2.69", RejectReason.BAD_TIMESTAMP),
    ("2004-03-01 00:59:16.0x 2 1 19.98 37.09 45.08 2.69", RejectReason.BAD_TIMESTAMP),
    ("2004-03-01 00:59:16.02785 2 1 19.98 abc 45.08 2.69", RejectReason.BAD_NUMBER),
    ("2004-03-01 00:59:16.02785 -2 1 19.98 37.09 45.08 2.69", RejectReason.BAD_NUMBER),
    ("2004-03-01 00:59:16.02785 2 1 nan 37.09 45.08 2.69", RejectReason.NON_FINITE),
    ("2004-03-01 00:59:16.02785 2 1 inf 37.09 45.08 2.69", RejectReason.NON_FINITE),
    ("2004-03-01 00:59:16.02785 2 60 19.98 37.09 45.08 2.69", RejectReason.MOTE_OUT_OF_RANGE),
    ("2004-03-01 00:59:16.02785 2 0 19.98 37.09 45.08 2.69", RejectReason.MOTE_OUT_OF_RANGE),
])
def test_parse_record_rejections(line, reason):
    r = parse_record(line)
    assert isinstance(r, Rejection)
    assert r.reason is reason
    assert not r


def test_mote_range_is_configurable():
    line = "2004-03-01 00:59:16.02785 2 60 19.98 37.09 45.08 2.69"
    assert isinstance(parse_record(line, mote_range=(1, 64)), SensorRecord)


def test_malformed_fixture_summary():
    lines = (FIXTURES / "malformed.txt").read_text().splitlines()
    records, summary = parse_lines(lines + [""])
    assert records == []
    assert summary.to_dict() == {
        "rows_read": 6, "rows_accepted": 0,
        "rejections": {"extra_field": 1, "missing_field": 1, "mote_out_of_range": 1,
                       "non_finite_value": 1, "bad_timestamp": 1, "unparseable_number": 1},
    }


# ---------------------------------------------------------------------------
# build_series
# ---------------------------------------------------------------------------

def test_mean_of_two_readings_in_one_bucket():
    s = build_series([rec("2004-03-01 10:05:00", 20.0), rec("2004-03-01 10:55:00", 22.0)], 1)
    assert len(s) == 1
    assert s.values[0] == 21.0
    assert s.bucket_starts[0] == np.datetime64("2004-03-01T10:00:00")
    assert s.counts.tolist() == [2]


def test_single_reading_unchanged():
    s = build_series([rec("2004-03-01 10:05:00", 19.98)], 1)
    assert s.values.tolist() == [19.98]


def test_empty_hour_is_a_gap():
    s = build_series([rec("2004-03-01 10:05:00", 20.0), rec("2004-03-01 12:05:00", 22.0)], 1)
    assert s.values.tolist() == [20.0, 22.0]
    assert s.gaps.tolist() == [datetime(2004, 3, 1, 11)]


def test_other_motes_filtered_and_empty_selection_errors():
    records = [rec("2004-03-01 10:05:00", 20.0, mote=2), rec("2004-03-01 10:06:00", 30.0, mote=3)]
    assert build_series(records, 3).values.tolist() == [30.0]
    with pytest.raises(EmptySeriesError):
        build_series(records, 6)


def test_custom_interval():
    records = [rec("2004-03-01 10:05:00", 1.0), rec("2004-03-01 10:20:00", 3.0),
               rec("2004-03-01 10:35:00", 5.0)]
    s = build_series(records, 1, interval=900)
    assert s.values.tolist() == [1.0, 3.0, 5.0]
    assert s.gaps.size == 0


def test_duplicates_both_enter_the_mean():
    records = [rec("2004-03-01 10:05:00", 20.0), rec("2004-03-01 10:05:00", 21.0)]
    assert build_series(records, 1).values.tolist() == [20.5]


def test_series_is_immutable():
    s = build_series([rec("2004-03-01 10:05:00", 20.0)], 1)
    with pytest.raises(ValueError):
        s.values[0] = 1.0


def test_split_fraction_and_between():
    records = [rec(f"2004-03-01 {h:02d}:05:00", float(h)) for h in range(10) if h != 4]
    s = build_series(records, 1)
    train, test = s.split_fraction(0.5)
    assert len(train) == 4 and len(test) == 5
    assert train.gaps.size == 0
    assert test.values.tolist() == [5.0, 6.0, 7.0, 8.0, 9.0]
    mid = s.between(datetime(2004, 3, 1, 2), datetime(2004, 3, 1, 7))
    assert mid.values.tolist() == [2.0, 3.0, 5.0, 6.0]
    assert mid.gaps.tolist() == [datetime(2004, 3, 1, 4)]


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_series_csv_round_trip(tmp_path):
    records = [rec("2004-03-01 10:05:00", 20.1), rec("2004-03-01 12:05:00", 22.3)]
    s = build_series(records, 1)
    text = series_to_csv_text(s)
    assert text.splitlines() == ["bucket_start,value", "2004-03-01T10:00:00Z,20.1",
                                 "2004-03-01T12:00:00Z,22.3"]
    write_series_csv(s, tmp_path / "s.csv")
    back = read_series_csv(tmp_path / "s.csv", 1)
    assert np.array_equal(back.bucket_starts, s.bucket_starts)
    assert np.array_equal(back.values, s.values)
    assert np.array_equal(back.gaps, s.gaps)


def test_read_series_rejects_bad_rows(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("bucket_start,value\n2004-03-01T10:00:00Z,abc\n")
    with pytest.raises(DataError):
        read_series_csv(p, 1)
    p.write_text("bucket_start,value\n")
    with pytest.raises(EmptySeriesError):
        read_series_csv(p, 1)


def test_ingest_summary_counts_synthetic_log(synthetic_log):
    from wsnmarkov.ingestion import read_log
    records, summary = read_log(synthetic_log)
    assert summary.rows_read == summary.rows_accepted + 2
    assert summary.rejections[RejectReason.MISSING_FIELD] == 1
    assert summary.rejections[RejectReason.MOTE_OUT_OF_RANGE] == 1
    s = build_series(records, 6)
    assert s.gaps.size == 1


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

_rows = st.lists(
    st.tuples(st.integers(0, 6 * 3600 - 1), st.floats(-40, 120, allow_nan=False),
              st.sampled_from([1, 2])),
    min_size=1, max_size=60)


def _records(rows):
    base = np.datetime64("2004-03-01T00:00:00", "us")
    return [SensorRecord((base + np.timedelta64(sec, "s")).item(), i, mote, val, 40.0, 45.0, 2.7)
            for i, (sec, val, mote) in enumerate(rows)]


@settings(max_examples=150, deadline=None)
@given(_rows, st.randoms(use_true_random=False))
def test_order_independence(rows, rnd):
    records = _records(rows)
    motes = {r.mote_id for r in records}
    shuffled = list(records)
    rnd.shuffle(shuffled)
    for m in motes:
        assert build_series(records, m) == build_series(shuffled, m)


@settings(max_examples=150, deadline=None)
@given(_rows)
def test_mass_conservation(rows):
    records = _records(rows)
    for m in {r.mote_id for r in records}:
        s = build_series(records, m)
        mine = [r.temperature for r in records if r.mote_id == m]
        occupied = {int(np.datetime64(r.timestamp, "s").astype(np.int64)) // 3600
                    for r in records if r.mote_id == m}
        assert len(s) <= len(occupied)
        total = float(np.sum(s.counts * s.values))
        assert total == pytest.approx(sum(mine), rel=1e-9, abs=1e-9)
        assert np.all(np.diff(s.bucket_starts.astype(np.int64)) > 0)
