import logging
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from stlf_engine.errors import DataError
from stlf_engine.services.ingestion import load_csv, series_by_id, write_csv

MONDAY = datetime(2018, 1, 1, tzinfo=timezone.utc)


def csv_text(rows):
    lines = ["timestamp,series_id,load_mw"]
    for when, sid, load in rows:
        stamp = when if isinstance(when, str) else when.strftime("%Y-%m-%dT%H:%M:%SZ")
        lines.append(f"{stamp},{sid},{load}")
    return "\n".join(lines) + "\n"


def hourly_rows(sid="A", hours=48, start=MONDAY, value=lambda h: 1000.0 + h):
    return [(start + timedelta(hours=h), sid, value(h)) for h in range(hours)]


def test_clean_file_loads_as_is(csv_writer):
    path = csv_writer("loads.csv", csv_text(hourly_rows("A") + hourly_rows("B", value=lambda h: 500.0)))
    series = load_csv(path)
    assert [s.series_id for s in series] == ["A", "B"]
    a = series[0]
    assert a.start == MONDAY and len(a) == 48
    np.testing.assert_array_equal(a.values, 1000.0 + np.arange(48))


def test_short_gap_is_interpolated(csv_writer):
    rows = [r for r in hourly_rows() if r[0] != MONDAY + timedelta(hours=10)]
    series = load_csv(csv_writer("gap.csv", csv_text(rows)))[0]
    assert len(series) == 48
    assert series.values[10] == pytest.approx(1010.0)


def test_duplicates_are_averaged(csv_writer):
    rows = hourly_rows(value=lambda h: 1000.0)
    rows.insert(5, (MONDAY + timedelta(hours=4), "A", 1100.0))
    rows[4] = (MONDAY + timedelta(hours=4), "A", 900.0)
    series = load_csv(csv_writer("dup.csv", csv_text(rows)))[0]
    assert series.values[4] == pytest.approx(1000.0)
    assert len(series) == 48


def test_long_gap_names_its_start(csv_writer):
    rows = [r for r in hourly_rows(hours=96) if not (10 <= (r[0] - MONDAY).total_seconds() / 3600 < 35)]
    with pytest.raises(DataError) as info:
        load_csv(csv_writer("hole.csv", csv_text(rows)))
    assert "2018-01-01T10:00:00Z" in str(info.value)
    assert "25 hours" in str(info.value)


def test_gap_of_exactly_a_day_is_repaired(csv_writer):
    rows = [r for r in hourly_rows(hours=96) if not (10 <= (r[0] - MONDAY).total_seconds() / 3600 < 34)]
    assert len(load_csv(csv_writer("day.csv", csv_text(rows)))[0]) == 96


def test_bad_row_reports_line_number(csv_writer):
    rows = hourly_rows(hours=10)
    rows[3] = (rows[3][0], "A", "n/a")
    with pytest.raises(DataError) as info:
        load_csv(csv_writer("bad.csv", csv_text(rows)))
    assert "line 5" in str(info.value)


def test_off_grid_timestamp_rejected(csv_writer):
    rows = hourly_rows(hours=10)
    rows[2] = ("2018-01-01T02:30:00Z", "A", 1000.0)
    with pytest.raises(DataError) as info:
        load_csv(csv_writer("grid.csv", csv_text(rows)))
    assert "line 4" in str(info.value)


def test_missing_columns_and_file(csv_writer, tmp_path):
    with pytest.raises(DataError):
        load_csv(csv_writer("cols.csv", "timestamp,load_mw\n2018-01-01T00:00:00Z,1\n"))
    with pytest.raises(DataError):
        load_csv(tmp_path / "nope.csv")


def test_series_trimmed_to_first_monday(csv_writer):
    sunday = MONDAY - timedelta(hours=5)
    series = load_csv(csv_writer("trim.csv", csv_text(hourly_rows(hours=53, start=sunday))))[0]
    assert series.start == MONDAY
    assert len(series) == 48
    assert series.values[0] == pytest.approx(1005.0)


def test_nonpositive_loads_are_repaired(csv_writer, caplog):
    rows = hourly_rows(value=lambda h: 1000.0)
    rows[7] = (rows[7][0], "A", -5.0)
    rows[8] = (rows[8][0], "A", 0.0)
    with caplog.at_level(logging.WARNING):
        series = load_csv(csv_writer("neg.csv", csv_text(rows)))[0]
    assert np.all(series.values > 0)
    assert series.values[7] == pytest.approx(1000.0)
    assert any("nonpositive" in r.getMessage() for r in caplog.records)


def test_offset_timestamps_are_normalized_to_utc(csv_writer):
    rows = [((MONDAY + timedelta(hours=h + 1)).strftime("%Y-%m-%dT%H:%M:%S+01:00"), "A", 1000.0 + h)
            for h in range(30)]
    series = load_csv(csv_writer("tz.csv", csv_text(rows)))[0]
    assert series.start == MONDAY
    assert series.values[0] == 1000.0


def test_write_then_load_is_idempotent(tmp_path, synth_series):
    first = write_csv(synth_series, tmp_path / "a.csv")
    loaded = load_csv(first)
    second = write_csv(loaded, tmp_path / "b.csv")
    assert first.read_bytes() == second.read_bytes()
    by_id = series_by_id(loaded)
    assert np.array_equal(by_id["S0"].values, synth_series[0].values)
    assert by_id["S1"].start == synth_series[1].start


def test_seventeen_digit_loads_parse_exactly(csv_writer):
    texts = ["14210.300000000001", "1234.5678901234567", "987.65432109876538"]
    path = csv_writer("loads.csv", csv_text([(MONDAY + timedelta(hours=h), "A", t) for h, t in enumerate(texts)]))
    values = load_csv(path)[0].values
    assert values.tolist() == [float(t) for t in texts]
