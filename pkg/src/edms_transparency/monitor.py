"""Time-bucketed, per-unit monitoring series."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Callable, Iterable, Mapping, Sequence

import numpy as np

from . import indicators as ind
from .core import RepositoryIndex, count_existing_at, format_timestamp, parse_timestamp
from .detectors import STATE_RULES, DetectionEvent, RuleConfig, RuleId, abandoned_mask
from .indicators import IndicatorId, Stats

logger = logging.getLogger(__name__)

ALL_UNITS = "*"
CSV_HEADER = ["metric", "unit", "granularity", "bucket_start", "value", "denominator", "normalized"]


class Granularity(str, Enum):
    WEEKLY = "weekly"
    MONTHLY = "monthly"
    YEARLY = "yearly"


def bucket_edges(start: int, end: int, granularity: Granularity) -> np.ndarray:
    """Bucket boundaries (UTC, epoch seconds) covering ``[start, end]``.

    Weeks start on Monday.  Consecutive edges delimit half-open buckets.
    """
    granularity = Granularity(granularity)
    if granularity is Granularity.WEEKLY:
        first_day = start // 86400
        first_day -= (first_day + 3) % 7  # 1970-01-01 was a Thursday
        last_day = end // 86400
        days = np.arange(first_day, last_day + 8, 7, dtype=np.int64)
        edges = days * 86400
    else:
        unit = "M" if granularity is Granularity.MONTHLY else "Y"
        lo = np.datetime64(int(start), "s").astype(f"datetime64[{unit}]")
        hi = np.datetime64(int(end), "s").astype(f"datetime64[{unit}]")
        edges = np.arange(lo, hi + 2).astype("datetime64[s]").astype(np.int64)
    return edges[: np.searchsorted(edges, end, side="right") + 1]


def bucket_of(times, edges: np.ndarray) -> np.ndarray:
    return np.searchsorted(edges, np.asarray(times, dtype=np.int64), side="right") - 1


@dataclass(frozen=True)
class SeriesPoint:
    bucket_start: int
    value: float | None
    denominator: int


@dataclass(frozen=True)
class MetricSeries:
    metric_id: str
    unit: str | None
    granularity: Granularity
    points: tuple[SeriesPoint, ...]
    normalized: bool = False
    # "count" (summable events), "state" (point-in-time samples) or "indicator"
    kind: str = "count"

    @property
    def unit_label(self) -> str:
        return self.unit or ALL_UNITS

    def values(self) -> list[float | None]:
        return [p.value for p in self.points]

    def total(self) -> float:
        return float(sum(p.value for p in self.points if p.value is not None))


def _unit_match(candidate: str, unit: str | None) -> bool:
    return not unit or candidate == unit or candidate.startswith(unit + "/")


def _span(index: RepositoryIndex, extra_times=()) -> tuple[int, int]:
    times = list(extra_times)
    if index.time_bounds is not None:
        times += list(index.time_bounds)
    if not times:
        raise ValueError("no data to bucket")
    return int(min(times)), int(max(times))


def _warn_single(edges: np.ndarray, granularity: Granularity) -> None:
    if len(edges) <= 2:
        logger.warning("data span fits in a single %s bucket", granularity.value)


def bucket_detections(
    events: Sequence[DetectionEvent],
    granularity: Granularity,
    index: RepositoryIndex,
    unit: str | None = None,
    normalize: bool = False,
    span: tuple[int, int] | None = None,
) -> MetricSeries:
    """Count events of one rule per time bucket.

    Event rules are counted by ``occurred_at``.  For state rules the events
    are measurement samples: each bucket reports the latest sample taken
    inside it.  With ``normalize`` the count is divided by the number of
    records existing at the bucket end in the unit subtree.
    """
    granularity = Granularity(granularity)
    rules = {ev.rule_id for ev in events}
    if len(rules) > 1:
        raise ValueError(f"events from several rules: {sorted(r.value for r in rules)}")
    rule = rules.pop() if rules else None
    selected = [ev for ev in events if _unit_match(ev.org_unit, unit)]
    times = np.array([ev.occurred_at for ev in selected], dtype=np.int64)

    lo, hi = span or _span(index, [int(times.min()), int(times.max())] if len(times) else [])
    edges = bucket_edges(lo, hi, granularity)
    _warn_single(edges, granularity)
    nb = len(edges) - 1
    which = bucket_of(times, edges)
    if rule in STATE_RULES:
        latest = np.full(nb, np.iinfo(np.int64).min)
        np.maximum.at(latest, which, times)
        counts = np.bincount(which[times == latest[which]], minlength=nb)
    else:
        counts = np.bincount(which, minlength=nb)

    existing = count_existing_at(index, edges[1:] - 1, unit)
    points = []
    for b in range(nb):
        value: float | None = float(counts[b])
        if normalize:
            value = value / existing[b] if existing[b] else None
        points.append(SeriesPoint(int(edges[b]), value, int(existing[b])))
    metric = rule.value if rule is not None else "events"
    kind = "state" if rule in STATE_RULES else "count"
    return MetricSeries(metric, unit, granularity, tuple(points), normalize, kind)


def abandoned_series(
    index: RepositoryIndex,
    cfg: RuleConfig,
    granularity: Granularity,
    unit: str | None = None,
    normalize: bool = False,
) -> MetricSeries:
    """Abandoned-record counts sampled at the last second of every bucket."""
    granularity = Granularity(granularity)
    lo, hi = _span(index)
    edges = bucket_edges(lo, hi, granularity)
    _warn_single(edges, granularity)
    in_unit = index.unit_mask(unit)
    samples = edges[1:] - 1
    existing = count_existing_at(index, samples, unit)
    points = []
    for b, t in enumerate(samples):
        mask, _ = abandoned_mask(index, cfg, int(t))
        n = int((mask & in_unit).sum())
        value: float | None = float(n)
        if normalize:
            value = n / existing[b] if existing[b] else None
        points.append(SeriesPoint(int(edges[b]), value, int(existing[b])))
    return MetricSeries(RuleId.ABANDONED_DOCUMENTATION.value, unit, granularity, tuple(points), normalize, "state")


def evaluate_indicator(
    index: RepositoryIndex,
    indicator: IndicatorId,
    bucket: tuple[int, int],
    unit: str | None = None,
    cfg: RuleConfig | None = None,
    calendar=None,
    project_map: Mapping[str, str] | None = None,
    batches: Sequence[DetectionEvent] | None = None,
) -> ind.IndicatorValue | None:
    """One indicator for one bucket: cohort indicators over the bucket, instant ones at its last second."""
    cfg = cfg or RuleConfig()
    indicator = IndicatorId(indicator)
    t = bucket[1] - 1
    if indicator is IndicatorId.SINGLE_VERSION_PCT:
        return ind.single_version_pct(index, cfg, bucket, unit)
    if indicator is IndicatorId.MEAN_VERSION_COUNT:
        return ind.mean_version_count(index, cfg, bucket, unit)
    if indicator is IndicatorId.DOCS_PER_PERSON_PER_DAY:
        return ind.docs_per_person_per_day(index, bucket, unit, batches)
    if indicator is IndicatorId.NAME_LENGTH_STATS:
        return ind.name_length_stats(index, unit, bucket)
    if indicator is IndicatorId.DOCS_PER_CALENDAR_EVENT:
        return ind.docs_per_calendar_event(index, calendar, cfg, bucket, unit)
    if indicator is IndicatorId.DOCS_PER_PROJECT:
        return ind.docs_per_project(index, project_map, bucket)
    if indicator is IndicatorId.EMPTY_FOLDER_PCT:
        return ind.empty_folder_pct(index, t, unit)
    if indicator is IndicatorId.DOCS_PER_LEAF_FOLDER:
        return ind.folder_fill_distribution(index, t, unit)[0]
    if indicator is IndicatorId.FOLDER_DISTRIBUTION_GINI:
        return ind.folder_fill_distribution(index, t, unit)[1]
    if indicator is IndicatorId.ARCHIVED_TOTAL:
        return ind.archival_totals(index, t, unit)[0]
    if indicator is IndicatorId.TO_DESTROY_TOTAL:
        return ind.archival_totals(index, t, unit)[1]
    raise ValueError(f"{indicator.value} needs text input and has no time axis")


def bucket_indicator(
    index: RepositoryIndex,
    indicator: IndicatorId,
    granularity: Granularity,
    unit: str | None = None,
    stat: str = "mean",
    **inputs,
) -> MetricSeries:
    """Evaluate an indicator in every bucket.  Undefined buckets stay gaps."""
    granularity = Granularity(granularity)
    indicator = IndicatorId(indicator)
    lo, hi = _span(index)
    edges = bucket_edges(lo, hi, granularity)
    _warn_single(edges, granularity)
    points = []
    stats_valued = False
    for b in range(len(edges) - 1):
        iv = evaluate_indicator(index, indicator, (int(edges[b]), int(edges[b + 1])), unit, **inputs)
        if iv is None:
            raise ValueError(f"{indicator.value} needs optional input that was not supplied")
        value = iv.value
        if isinstance(value, Stats):
            stats_valued = True
            value = value.get(stat)
        points.append(SeriesPoint(int(edges[b]), value, iv.denominator))
    metric = f"{indicator.value}:{stat}" if stats_valued else indicator.value
    return MetricSeries(metric, unit, granularity, tuple(points), False, "indicator")


_DEFAULT_REDUCE = {"count": "sum", "state": "last", "indicator": "mean"}


def resample(series: MetricSeries, granularity: Granularity, reduce: str | None = None) -> MetricSeries:
    """Re-aggregate a series to a coarser granularity.

    ``reduce`` is ``sum`` (event counts), ``mean`` (average of the defined
    finer values) or ``last`` (latest defined sample).  The default depends on
    the series kind.
    """
    granularity = Granularity(granularity)
    # weeks straddle month and year boundaries, so only month -> year is exact
    if granularity is not series.granularity and (series.granularity, granularity) != (
        Granularity.MONTHLY, Granularity.YEARLY
    ):
        raise ValueError(f"cannot resample {series.granularity.value} to {granularity.value}")
    reduce = reduce or _DEFAULT_REDUCE[series.kind]
    if reduce == "sum" and series.normalized:
        raise ValueError("normalized values cannot be summed")
    if not series.points:
        return MetricSeries(series.metric_id, series.unit, granularity, (), series.normalized, series.kind)
    starts = np.array([p.bucket_start for p in series.points], dtype=np.int64)
    edges = bucket_edges(int(starts[0]), int(starts[-1]), granularity)
    which = bucket_of(starts, edges)
    points = []
    for b in range(len(edges) - 1):
        members = [series.points[i] for i in np.flatnonzero(which == b)]
        defined = [p for p in members if p.value is not None]
        if reduce == "sum":
            value = float(sum(p.value for p in defined)) if defined else None
            denom = members[-1].denominator if members else 0
        elif reduce == "mean":
            value = float(np.mean([p.value for p in defined])) if defined else None
            denom = len(defined)
        elif reduce == "last":
            value = defined[-1].value if defined else None
            denom = members[-1].denominator if members else 0
        else:
            raise ValueError(f"unknown reduction {reduce!r}")
        points.append(SeriesPoint(int(edges[b]), value, denom))
    return MetricSeries(series.metric_id, series.unit, granularity, tuple(points), series.normalized, series.kind)


@dataclass(frozen=True)
class UnitComparison:
    metric_id: str
    granularity: Granularity | None
    bucket_starts: tuple[int, ...]
    units: tuple[str, ...]
    values: tuple[tuple[float | None, ...], ...]  # [bucket][unit]
    flags: tuple[tuple[str, int, float], ...] = field(default=())

    def rows(self) -> list[dict]:
        return [
            {"bucket_start": format_timestamp(b), **{u: v for u, v in zip(self.units, row)}}
            for b, row in zip(self.bucket_starts, self.values)
        ]


def compare_units(series_set: Sequence[MetricSeries], threshold_sd: float = 3.0) -> UnitComparison:
    """Align per-unit series of one metric and flag spikes.

    A point is flagged when it exceeds the unit's own mean by more than
    ``threshold_sd`` population standard deviations.
    """
    if not series_set:
        return UnitComparison("", None, (), (), ())
    metrics = {(s.metric_id, s.granularity, s.normalized) for s in series_set}
    if len(metrics) > 1:
        raise ValueError("series differ in metric, granularity or normalization")
    starts = sorted({p.bucket_start for s in series_set for p in s.points})
    ordered = sorted(series_set, key=lambda s: s.unit_label)
    units = tuple(s.unit_label for s in ordered)
    col = {b: i for i, b in enumerate(starts)}
    grid: list[list[float | None]] = [[None] * len(units) for _ in starts]
    flags = []
    for j, s in enumerate(ordered):
        for p in s.points:
            grid[col[p.bucket_start]][j] = p.value
        vals = np.array([p.value for p in s.points if p.value is not None], dtype=np.float64)
        if len(vals) < 2:
            continue
        mu, sd = vals.mean(), vals.std()
        if sd == 0:
            continue
        for p in s.points:
            if p.value is not None and p.value > mu + threshold_sd * sd:
                flags.append((s.unit_label, p.bucket_start, float(p.value)))
    metric_id, granularity, _ = metrics.pop()
    return UnitComparison(
        metric_id, granularity, tuple(starts), units, tuple(tuple(r) for r in grid), tuple(sorted(flags))
    )


# -- serialization -----------------------------------------------------------


def format_value(value: float | None) -> str:
    if value is None:
        return ""
    value = float(value)
    return str(int(value)) if value.is_integer() else repr(value)


def write_series_csv(series: Iterable[MetricSeries], stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for s in series:
        for p in s.points:
            writer.writerow(
                [s.metric_id, s.unit_label, s.granularity.value, format_timestamp(p.bucket_start),
                 format_value(p.value), p.denominator, "true" if s.normalized else "false"]
            )


def read_series_csv(stream: IO[str]) -> list[MetricSeries]:
    reader = csv.DictReader(stream)
    if reader.fieldnames != CSV_HEADER:
        raise ValueError(f"unexpected series header {reader.fieldnames}")
    groups: dict[tuple, list[SeriesPoint]] = {}
    for row in reader:
        key = (row["metric"], row["unit"], row["granularity"], row["normalized"] == "true")
        value = float(row["value"]) if row["value"] != "" else None
        groups.setdefault(key, []).append(SeriesPoint(parse_timestamp(row["bucket_start"]), value, int(row["denominator"])))
    out = []
    for (metric, unit, gran, normalized), points in groups.items():
        kind = "state" if metric in {r.value for r in STATE_RULES} else (
            "count" if metric in {r.value for r in RuleId} else "indicator"
        )
        out.append(
            MetricSeries(metric, None if unit == ALL_UNITS else unit, Granularity(gran),
                         tuple(sorted(points, key=lambda p: p.bucket_start)), normalized, kind)
        )
    return out


def series_to_json(series: Iterable[MetricSeries]) -> list[dict]:
    return [
        {
            "metric": s.metric_id,
            "unit": s.unit_label,
            "granularity": s.granularity.value,
            "normalized": s.normalized,
            "kind": s.kind,
            "points": [
                {"bucket_start": format_timestamp(p.bucket_start), "value": p.value, "denominator": p.denominator}
                for p in s.points
            ],
        }
        for s in series
    ]


def series_from_json(data: Sequence[Mapping]) -> list[MetricSeries]:
    return [
        MetricSeries(
            d["metric"],
            None if d["unit"] == ALL_UNITS else d["unit"],
            Granularity(d["granularity"]),
            tuple(SeriesPoint(parse_timestamp(p["bucket_start"]), p["value"], p["denominator"]) for p in d["points"]),
            d["normalized"],
            d.get("kind", "count"),
        )
        for d in data
    ]


def write_series_json(series: Iterable[MetricSeries], stream: IO[str]) -> None:
    json.dump(series_to_json(series), stream, indent=1, sort_keys=True)
    stream.write("\n")


def monitor_events(
    index: RepositoryIndex,
    events: Sequence[DetectionEvent],
    granularity: Granularity,
    units: Sequence[str | None] = (None,),
    normalize: bool = False,
    cfg: RuleConfig | None = None,
    include_abandoned: bool = True,
    progress: Callable[[str], None] | None = None,
) -> list[MetricSeries]:
    """Series for every event rule present in ``events`` and, optionally, sampled abandonment."""
    by_rule: dict[RuleId, list[DetectionEvent]] = {}
    for ev in events:
        if ev.rule_id not in STATE_RULES:
            by_rule.setdefault(ev.rule_id, []).append(ev)
    out = []
    times = [ev.occurred_at for ev in events]
    span = _span(index, [min(times), max(times)] if times else [])
    for rule in sorted(by_rule, key=lambda r: r.value):
        for unit in units:
            out.append(bucket_detections(by_rule[rule], granularity, index, unit, normalize, span=span))
    if include_abandoned:
        for unit in units:
            if progress:
                progress(f"sampling abandonment for {unit or ALL_UNITS}")
            out.append(abandoned_series(index, cfg or RuleConfig(), granularity, unit, normalize))
    return out
