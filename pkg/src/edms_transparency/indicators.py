"""Continuous indicators.

Every function returns :class:`IndicatorValue` objects whose ``value`` is
``None`` exactly when the population (``denominator``) is empty.  An empty
population is never reported as 0, since that would read as good behaviour.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .core import CalendarEvent, RepositoryIndex
from .detectors import DetectionEvent, RuleConfig, RuleId, is_abbreviation, linked_document_counts, tokenize

Bucket = tuple[int, int]  # [start, end) in epoch seconds

DAY = 86400


class IndicatorId(str, Enum):
    SINGLE_VERSION_PCT = "SingleVersionPct"
    MEAN_VERSION_COUNT = "MeanVersionCount"
    EMPTY_FOLDER_PCT = "EmptyFolderPct"
    DOCS_PER_PERSON_PER_DAY = "DocsPerPersonPerDay"
    NAME_LENGTH_STATS = "NameLengthStats"
    JARGON_DENSITY = "JargonDensity"
    DOCS_PER_LEAF_FOLDER = "DocsPerLeafFolder"
    FOLDER_DISTRIBUTION_GINI = "FolderDistributionGini"
    ARCHIVED_TOTAL = "ArchivedTotal"
    TO_DESTROY_TOTAL = "ToDestroyTotal"
    DOCS_PER_CALENDAR_EVENT = "DocsPerCalendarEvent"
    DOCS_PER_PROJECT = "DocsPerProject"


@dataclass(frozen=True)
class Stats:
    mean: float
    median: float
    p90: float
    max: float | None = None

    @classmethod
    def of(cls, values, with_max: bool = False) -> "Stats":
        arr = np.asarray(values, dtype=np.float64)
        return cls(
            mean=float(arr.mean()),
            median=float(np.median(arr)),
            p90=float(np.percentile(arr, 90)),
            max=float(arr.max()) if with_max else None,
        )

    def get(self, name: str) -> float:
        value = getattr(self, name)
        if value is None:
            raise KeyError(name)
        return value


@dataclass(frozen=True)
class IndicatorValue:
    indicator_id: IndicatorId
    unit: str | None
    scope: tuple[int | None, int | None]
    value: float | Stats | None
    denominator: int
    details: Mapping = field(default_factory=dict)

    @property
    def defined(self) -> bool:
        return self.value is not None


def _undefined(iid, unit, scope, **details) -> IndicatorValue:
    return IndicatorValue(iid, unit, scope, None, 0, details)


def _in_bucket(times: np.ndarray, bucket: Bucket | None) -> np.ndarray:
    if bucket is None:
        return np.ones(len(times), dtype=bool)
    return (times >= bucket[0]) & (times < bucket[1])


def _scope(bucket: Bucket | None) -> tuple[int | None, int | None]:
    return (None, None) if bucket is None else (int(bucket[0]), int(bucket[1]))


def version_cohort(index: RepositoryIndex, cfg: RuleConfig, bucket: Bucket | None, unit: str | None) -> np.ndarray:
    """Documents created in ``bucket`` whose type is not expected to be single-version."""
    mask = ~index.is_folder & _in_bucket(index.created, bucket) & index.unit_mask(unit)
    if cfg.single_version_excluded_types:
        excluded = np.fromiter(
            (index.records[index.ids[i]].doc_type in cfg.single_version_excluded_types for i in np.flatnonzero(mask)),
            dtype=bool,
        )
        hits = np.flatnonzero(mask)
        mask[hits[excluded]] = False
    return mask


def single_version_pct(
    index: RepositoryIndex, cfg: RuleConfig, bucket: Bucket | None = None, unit: str | None = None
) -> IndicatorValue:
    cohort = version_cohort(index, cfg, bucket, unit)
    n = int(cohort.sum())
    if n == 0:
        return _undefined(IndicatorId.SINGLE_VERSION_PCT, unit, _scope(bucket))
    single = int((index.revisions[cohort] == 1).sum())
    return IndicatorValue(
        IndicatorId.SINGLE_VERSION_PCT, unit, _scope(bucket), 100.0 * single / n, n, {"single_version": single}
    )


def mean_version_count(
    index: RepositoryIndex, cfg: RuleConfig, bucket: Bucket | None = None, unit: str | None = None
) -> IndicatorValue:
    cohort = version_cohort(index, cfg, bucket, unit)
    n = int(cohort.sum())
    if n == 0:
        return _undefined(IndicatorId.MEAN_VERSION_COUNT, unit, _scope(bucket))
    return IndicatorValue(
        IndicatorId.MEAN_VERSION_COUNT, unit, _scope(bucket), float(index.revisions[cohort].mean()), n
    )


def _children_existing(index: RepositoryIndex, t: int, child_mask: np.ndarray) -> np.ndarray:
    """Per-record count of direct children (restricted by ``child_mask``) created at or before t."""
    sel = child_mask & (index.parent >= 0) & (index.created <= t)
    return np.bincount(index.parent[sel], minlength=len(index.ids))


def empty_folder_pct(index: RepositoryIndex, t: int, unit: str | None = None) -> IndicatorValue:
    """Share of folders existing at ``t`` with no child created on or before ``t``."""
    folders = index.is_folder & (index.created <= t) & index.unit_mask(unit)
    n = int(folders.sum())
    if n == 0:
        return _undefined(IndicatorId.EMPTY_FOLDER_PCT, unit, (t, t))
    kids = _children_existing(index, t, np.ones(len(index.ids), dtype=bool))
    empty = int((kids[folders] == 0).sum())
    return IndicatorValue(IndicatorId.EMPTY_FOLDER_PCT, unit, (t, t), 100.0 * empty / n, n, {"empty": empty})


def docs_per_person_per_day(
    index: RepositoryIndex,
    bucket: Bucket | None = None,
    unit: str | None = None,
    batches: Sequence[DetectionEvent] | None = None,
) -> IndicatorValue:
    """Distribution of per-(creator, UTC day) document creation counts.

    When batch events are supplied, ``details`` reports how many of those
    person-days contain batch uploads and the sizes of the batches that start
    in the bucket.
    """
    docs = ~index.is_folder & _in_bucket(index.created, bucket) & index.unit_mask(unit)
    pos = np.flatnonzero(docs)
    if len(pos) == 0:
        return _undefined(IndicatorId.DOCS_PER_PERSON_PER_DAY, unit, _scope(bucket))
    days = index.created[pos] // DAY
    pairs = index.creator_code[pos].astype(np.int64) * (int(days.max()) + 1) + days
    keys, counts = np.unique(pairs, return_counts=True)
    details: dict = {"person_days": len(keys)}
    if batches is not None:
        in_batch = np.zeros(len(index.ids), dtype=bool)
        sizes = []
        for ev in batches:
            if ev.rule_id is not RuleId.BATCH_DOCUMENTATION:
                continue
            in_batch[[index.position[r] for r in ev.record_ids]] = True
            if bucket is None or bucket[0] <= ev.occurred_at < bucket[1]:
                sizes.append(len(ev.record_ids))
        details["batch_person_days"] = int(np.unique(pairs[in_batch[pos]]).size)
        details["batch_sizes"] = sorted(sizes)
    return IndicatorValue(
        IndicatorId.DOCS_PER_PERSON_PER_DAY, unit, _scope(bucket), Stats.of(counts), len(keys), details
    )


def name_length_stats(index: RepositoryIndex, unit: str | None = None, bucket: Bucket | None = None) -> IndicatorValue:
    """Name length in code points over records in ``unit`` (optionally a creation cohort)."""
    sel = np.flatnonzero(index.unit_mask(unit) & _in_bucket(index.created, bucket))
    if len(sel) == 0:
        return _undefined(IndicatorId.NAME_LENGTH_STATS, unit, _scope(bucket))
    lengths = [len(index.records[index.ids[i]].name) for i in sel]
    return IndicatorValue(IndicatorId.NAME_LENGTH_STATS, unit, _scope(bucket), Stats.of(lengths), len(sel))


def jargon_density(texts: Mapping[str, str], cfg: RuleConfig, unit: str | None = None) -> IndicatorValue:
    """Unapproved abbreviation tokens over all word tokens, pooled across ``texts``."""
    words = 0
    jargon = 0
    for rid in sorted(texts):
        tokens = tokenize(texts[rid])
        words += len(tokens)
        jargon += sum(1 for tok in tokens if is_abbreviation(tok, cfg) and tok not in cfg.approved_abbreviations)
    if words == 0:
        return _undefined(IndicatorId.JARGON_DENSITY, unit, (None, None))
    return IndicatorValue(IndicatorId.JARGON_DENSITY, unit, (None, None), jargon / words, words, {"jargon": jargon})


def gini(values) -> float:
    """Gini coefficient of non-negative values; 0 when all values are equal (or all zero)."""
    xs = np.sort(np.asarray(values, dtype=np.float64))
    n = len(xs)
    total = xs.sum()
    if n == 0 or total <= 0:
        return 0.0
    ranks = 2.0 * np.arange(1, n + 1) - n - 1
    return float(max(np.dot(ranks, xs) / (n * total), 0.0))


def folder_fill_distribution(
    index: RepositoryIndex, t: int, unit: str | None = None
) -> tuple[IndicatorValue, IndicatorValue]:
    """Documents per leaf folder and the Gini spread of documents over all folders at ``t``.

    A leaf folder has no subfolder created on or before ``t``.
    """
    folders = index.is_folder & (index.created <= t) & index.unit_mask(unit)
    n = int(folders.sum())
    if n == 0:
        return (
            _undefined(IndicatorId.DOCS_PER_LEAF_FOLDER, unit, (t, t)),
            _undefined(IndicatorId.FOLDER_DISTRIBUTION_GINI, unit, (t, t)),
        )
    doc_counts = _children_existing(index, t, ~index.is_folder)
    sub_counts = _children_existing(index, t, index.is_folder)
    counts = doc_counts[folders]
    leaves = folders & (sub_counts == 0)
    leaf_counts = doc_counts[leaves]
    values, freq = np.unique(counts, return_counts=True)
    histogram = {int(v): int(f) for v, f in zip(values, freq)}
    leaf_value = (
        IndicatorValue(
            IndicatorId.DOCS_PER_LEAF_FOLDER, unit, (t, t), Stats.of(leaf_counts, with_max=True), len(leaf_counts)
        )
        if len(leaf_counts)
        else _undefined(IndicatorId.DOCS_PER_LEAF_FOLDER, unit, (t, t))
    )
    gini_value = IndicatorValue(
        IndicatorId.FOLDER_DISTRIBUTION_GINI, unit, (t, t), gini(counts), n, {"histogram": histogram}
    )
    return leaf_value, gini_value


def archival_totals(
    index: RepositoryIndex, t: int, unit: str | None = None, documents_only: bool = False
) -> tuple[IndicatorValue, IndicatorValue]:
    """Records archived and records marked for destruction, effective at or before ``t``."""
    sel = (index.created <= t) & index.unit_mask(unit)
    if documents_only:
        sel &= ~index.is_folder
    done = sel & (index.archived_eff <= t)
    population = int(sel.sum())
    archived = int((done & (index.state == 1)).sum())
    destroy = int((done & (index.state == 2)).sum())
    return (
        IndicatorValue(IndicatorId.ARCHIVED_TOTAL, unit, (t, t), float(archived), population),
        IndicatorValue(IndicatorId.TO_DESTROY_TOTAL, unit, (t, t), float(destroy), population),
    )


def _unit_match(candidate: str, unit: str | None) -> bool:
    return not unit or candidate == unit or candidate.startswith(unit + "/")


def docs_per_calendar_event(
    index: RepositoryIndex,
    calendar: Sequence[CalendarEvent] | None,
    cfg: RuleConfig,
    bucket: Bucket | None = None,
    unit: str | None = None,
) -> IndicatorValue | None:
    """Mean number of linked documents per documentation-requiring event starting in ``bucket``.

    Returns ``None`` when no calendar was supplied.
    """
    if calendar is None:
        return None
    qualifying = [
        ev for ev in calendar
        if ev.requires_documentation
        and (bucket is None or bucket[0] <= ev.starts_at < bucket[1])
        and _unit_match(ev.org_unit, unit)
    ]
    if not qualifying:
        return _undefined(IndicatorId.DOCS_PER_CALENDAR_EVENT, unit, _scope(bucket))
    counts = linked_document_counts(index, cfg, qualifying)
    return IndicatorValue(
        IndicatorId.DOCS_PER_CALENDAR_EVENT, unit, _scope(bucket), float(counts.mean()), len(qualifying)
    )


def docs_per_project(
    index: RepositoryIndex, project_map: Mapping[str, str] | None, bucket: Bucket | None = None
) -> IndicatorValue | None:
    """Mean documents created in ``bucket`` per known project.

    Every project named in ``project_map`` is in the population, including
    projects with no documents in the bucket.  Returns ``None`` without a map.
    """
    if project_map is None:
        return None
    projects = set(project_map.values())
    if not projects:
        return _undefined(IndicatorId.DOCS_PER_PROJECT, None, _scope(bucket))
    per_project: Counter = Counter()
    for rid, project in project_map.items():
        pos = index.position.get(rid)
        if pos is None or index.is_folder[pos]:
            continue
        t = int(index.created[pos])
        if bucket is None or bucket[0] <= t < bucket[1]:
            per_project[project] += 1
    total = sum(per_project.values())
    return IndicatorValue(
        IndicatorId.DOCS_PER_PROJECT, None, _scope(bucket), total / len(projects), len(projects),
        {"per_project": dict(sorted(per_project.items()))},
    )
