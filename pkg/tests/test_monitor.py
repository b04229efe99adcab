import io
import json
import logging
from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edms_transparency.core import build_index
from edms_transparency.detectors import DetectionEvent, RuleConfig, RuleId
from edms_transparency.indicators import IndicatorId, single_version_pct
from edms_transparency.monitor import (
    ALL_UNITS,
    Granularity,
    MetricSeries,
    SeriesPoint,
    abandoned_series,
    bucket_detections,
    bucket_edges,
    bucket_indicator,
    compare_units,
    monitor_events,
    read_series_csv,
    resample,
    series_from_json,
    series_to_json,
    write_series_csv,
)

from factories import DAY, T0, doc, folder, random_corpus

Y, M, W = Granularity.YEARLY, Granularity.MONTHLY, Granularity.WEEKLY


def ts(y, m=1, d=1):
    return int(datetime(y, m, d, tzinfo=timezone.utc).timestamp())


def batch_event(t, unit="A", rid=None):
    return DetectionEvent(RuleId.BATCH_DOCUMENTATION, (rid or f"r{t}",), "u", unit, t)


def calendar_key(t, granularity):
    d = datetime.fromtimestamp(t, tz=timezone.utc)
    if granularity is Y:
        return ts(d.year)
    if granularity is M:
        return ts(d.year, d.month)
    monday = d.toordinal() - d.weekday()
    return int(datetime.fromordinal(monday).replace(tzinfo=timezone.utc).timestamp())


# -- edges --------------------------------------------------------------------------


def test_edges_calendar_aligned():
    assert list(bucket_edges(ts(2019, 5, 3), ts(2021, 2, 1), Y)) == [ts(2019), ts(2020), ts(2021), ts(2022)]
    assert list(bucket_edges(ts(2020, 11, 15), ts(2021, 1, 1), M)) == [ts(2020, 11), ts(2020, 12), ts(2021), ts(2021, 2)]
    # 2020-01-01 is a Wednesday; the bucket starts on Monday 2019-12-30
    assert bucket_edges(ts(2020), ts(2020, 1, 2), W)[0] == ts(2019, 12, 30)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 40 * 365 * DAY), st.integers(0, 3 * 365 * DAY), st.sampled_from(list(Granularity)))
def test_edges_contiguous_and_covering(a, span, g):
    lo = ts(1990) + a
    hi = lo + span
    e = bucket_edges(lo, hi, g)
    assert np.all(np.diff(e) > 0)
    assert e[0] <= lo < e[1] and e[-2] <= hi < e[-1]
    assert {calendar_key(int(x), g) for x in e} == {int(x) for x in e}


# -- counting -----------------------------------------------------------------------------


def test_three_batches_in_2012():
    idx = build_index([doc(created=ts(2010)), doc(created=ts(2014, 6))])
    events = [batch_event(ts(2012, m), rid=f"b{m}") for m in (2, 5, 9)]
    s = bucket_detections(events, Y, idx)
    assert {p.bucket_start: p.value for p in s.points} == {ts(y): (3.0 if y == 2012 else 0.0) for y in range(2010, 2015)}


def test_normalized_by_existing_records():
    recs = [doc(f"d{i:03d}", created=ts(2020, 1, 2)) for i in range(100)]
    idx = build_index(recs)
    events = [DetectionEvent(RuleId.ABANDONED_DOCUMENTATION, (f"d{i:03d}",), "u", "A", ts(2020, 12, 31)) for i in range(10)]
    s = bucket_detections(events, Y, idx, normalize=True)
    assert s.points[0].value == pytest.approx(0.10) and s.points[0].denominator == 100


def test_state_rule_keeps_latest_sample():
    idx = build_index([doc(created=ts(2020))])
    ab = RuleId.ABANDONED_DOCUMENTATION
    events = [DetectionEvent(ab, ("a",), "u", "A", ts(2020, 3)), DetectionEvent(ab, ("b",), "u", "A", ts(2020, 3)),
              DetectionEvent(ab, ("a",), "u", "A", ts(2020, 9))]
    assert bucket_detections(events, Y, idx).points[0].value == 1


def test_mixed_rules_rejected():
    idx = build_index([doc()])
    mixed = [batch_event(T0), DetectionEvent(RuleId.OPAQUE_LANGUAGE, ("x",), "u", "A", T0)]
    with pytest.raises(ValueError):
        bucket_detections(mixed, Y, idx)


def test_single_bucket_warns(caplog):
    idx = build_index([doc(created=ts(2020, 3))])
    with caplog.at_level(logging.WARNING):
        s = bucket_detections([batch_event(ts(2020, 4))], Y, idx)
    assert len(s.points) == 1 and "single yearly bucket" in caplog.text


def test_empty_unit_normalized_is_gap():
    idx = build_index([doc(created=ts(2020), unit="A"), doc(created=ts(2022), unit="B")])
    s = bucket_detections([batch_event(ts(2022), unit="B")], Y, idx, unit="B", normalize=True)
    assert [p.value for p in s.points] == [None, None, 1.0]


def _random_events(rng, recs, n):
    """Events backed by distinct records, dated at the record's creation."""
    chosen = rng.choice(len(recs), size=min(n, len(recs)), replace=False)
    return [batch_event(recs[i].created_at, recs[i].org_unit, recs[i].record_id) for i in sorted(chosen)]


@pytest.mark.parametrize("seed", range(5))
def test_recount_oracle(seed):
    rng = np.random.default_rng(seed)
    recs = random_corpus(rng, 200, span_days=900)
    idx = build_index(recs)
    events = _random_events(rng, recs, 300)
    for g in Granularity:
        for unit in (None, "A", "A/X", "B"):
            s = bucket_detections(events, g, idx, unit)
            want = {}
            for ev in events:
                if unit is None or ev.org_unit == unit or ev.org_unit.startswith(unit + "/"):
                    k = calendar_key(ev.occurred_at, g)
                    want[k] = want.get(k, 0) + 1
            got = {p.bucket_start: p.value for p in s.points if p.value}
            assert got == want
            norm = bucket_detections(events, g, idx, unit, normalize=True)
            ends = [p.bucket_start for p in s.points[1:]]
            for p, q, end in zip(s.points, norm.points, ends):
                existing = sum(1 for r in recs if r.created_at < end
                               and (unit is None or r.org_unit == unit or r.org_unit.startswith(unit + "/")))
                assert q.denominator == p.denominator == existing
                if q.value is not None:
                    assert q.value == pytest.approx(p.value / p.denominator)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_conservation_and_subtree(seed):
    rng = np.random.default_rng(seed)
    recs = random_corpus(rng, 60, span_days=1200)
    idx = build_index(recs)
    events = _random_events(rng, recs, int(rng.integers(0, 80)))
    span = (min(r.created_at for r in recs), max(r.last_updated_at for r in recs))
    for unit in (None, "A", "B"):
        relevant = sum(1 for e in events if unit is None or e.org_unit.split("/")[0] == unit)
        totals = {g: bucket_detections(events, g, idx, unit, span=span).total() for g in Granularity}
        assert set(totals.values()) == {relevant}
    for g in (M, Y):
        parent = bucket_detections(events, g, idx, "A", span=span)
        child = bucket_detections(events, g, idx, "A/X", span=span)
        assert all(p.value >= c.value for p, c in zip(parent.points, child.points))
        whole = bucket_detections(events, g, idx, None, normalize=True, span=span)
        assert all(p.value is None or 0 <= p.value <= 1 for p in whole.points) or len(events) > len(recs)


def test_abandoned_series_samples_bucket_end():
    idx = build_index([doc("d", created=ts(2019, 1, 1)), folder("f", created=ts(2021, 6, 1))])
    s = abandoned_series(idx, RuleConfig(), Y)
    assert [p.value for p in s.points] == [0.0, 1.0, 1.0]
    n = abandoned_series(idx, RuleConfig(), Y, normalize=True)
    assert [p.value for p in n.points] == [0.0, 1.0, 0.5]


# -- indicators and resampling --------------------------------------------------------------


def test_bucket_indicator_matches_direct_calls():
    rng = np.random.default_rng(4)
    recs = random_corpus(rng, 300, span_days=1000)
    idx = build_index(recs)
    s = bucket_indicator(idx, IndicatorId.SINGLE_VERSION_PCT, Y, "A")
    edges = bucket_edges(*idx.time_bounds, Y)
    for p, lo, hi in zip(s.points, edges[:-1], edges[1:]):
        assert p.value == single_version_pct(idx, RuleConfig(), (int(lo), int(hi)), "A").value
    stats = bucket_indicator(idx, IndicatorId.DOCS_PER_PERSON_PER_DAY, M, stat="median")
    assert stats.metric_id == "DocsPerPersonPerDay:median"


def test_constant_dataset_is_flat():
    recs = [doc(created=ts(2018) + k * 40 * DAY, revisions=1) for k in range(30)]
    s = bucket_indicator(build_index(recs), IndicatorId.SINGLE_VERSION_PCT, Y)
    assert {p.value for p in s.points} == {100.0}


def test_one_bucket_dataset():
    s = bucket_indicator(build_index([doc(created=ts(2020, 2))]), IndicatorId.MEAN_VERSION_COUNT, Y)
    assert len(s.points) == 1


def test_text_indicator_has_no_time_axis():
    with pytest.raises(ValueError):
        bucket_indicator(build_index([doc()]), IndicatorId.JARGON_DENSITY, Y)


def _monthly(values, start=(2020, 1), kind="count", normalized=False):
    pts = []
    y, m = start
    for v in values:
        pts.append(SeriesPoint(ts(y, m), v, 10))
        y, m = (y + 1, 1) if m == 12 else (y, m + 1)
    return MetricSeries("I4_1", None, M, tuple(pts), normalized, kind)


def test_resample_reductions():
    s = _monthly([1.0] * 12 + [2.0, None, 4.0])
    assert [p.value for p in resample(s, Y).points] == [12.0, 6.0]
    assert [p.value for p in resample(s, Y, "mean").points] == [1.0, 3.0]
    assert [p.value for p in resample(s, Y, "last").points] == [1.0, 4.0]
    assert [p.value for p in resample(_monthly([0.1, 0.2], kind="state"), Y).points] == [0.2]
    with pytest.raises(ValueError):
        resample(s, W)
    with pytest.raises(ValueError):
        resample(_monthly([0.1], normalized=True), Y, "sum")


def test_compare_units():
    flat = [MetricSeries("I4_1", u, M, tuple(SeriesPoint(ts(2020, m), 5.0, 1) for m in range(1, 13))) for u in "AB"]
    assert compare_units(flat).flags == ()
    spike = [SeriesPoint(ts(2020, m), 50.0 if m == 7 else 5.0, 1) for m in range(1, 13)]
    table = compare_units(flat + [MetricSeries("I4_1", "C", M, tuple(spike))])
    assert table.flags == (("C", ts(2020, 7), 50.0),)
    assert table.units == ("A", "B", "C")
    empty = compare_units([])
    assert empty.rows() == [] and empty.flags == ()


# -- serialization ------------------------------------------------------------------------------


def test_csv_and_json_roundtrip():
    series = [_monthly([1.0, None, 2.5]), MetricSeries("EmptyFolderPct", "A/B", Y, (SeriesPoint(ts(2020), 33.3, 3),),
                                                       False, "indicator")]
    buf = io.StringIO()
    write_series_csv(series, buf)
    text = buf.getvalue()
    assert text.splitlines()[0] == "metric,unit,granularity,bucket_start,value,denominator,normalized"
    assert "I4_1,*,monthly,2020-02-01T00:00:00Z,,10,false" in text
    assert read_series_csv(io.StringIO(text)) == series
    assert series_from_json(json.loads(json.dumps(series_to_json(series)))) == series


def test_monitor_events_layout():
    idx = build_index([doc(created=ts(2019)), doc(created=ts(2021), unit="B")])
    events = [batch_event(ts(2020), unit="B")]
    out = monitor_events(idx, events, Y, [None, "B"])
    assert [(s.metric_id, s.unit_label) for s in out] == [("I4_1", ALL_UNITS), ("I4_1", "B"), ("I4_2", ALL_UNITS),
                                                         ("I4_2", "B")]
    assert len({len(s.points) for s in out}) == 1
