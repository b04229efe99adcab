"""Binary detection rules.  Each detector returns countable DetectionEvents."""

from __future__ import annotations

import csv
import json
import logging
import re
import weakref
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import timedelta
from enum import Enum
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .core import CalendarEvent, RepositoryIndex, format_timestamp, parse_timestamp

logger = logging.getLogger(__name__)


class RuleId(str, Enum):
    DOCUMENTATION_AVOIDANCE = "I1_1"
    NONCOMPLIANT_STRUCTURE = "I2_2"
    NONSTANDARD_NAMING = "I2_3"
    OPAQUE_LANGUAGE = "I3_1"
    BATCH_DOCUMENTATION = "I4_1"
    ABANDONED_DOCUMENTATION = "I4_2"


# sampled at a measurement instant rather than dated by the behaviour itself
STATE_RULES = frozenset({RuleId.ABANDONED_DOCUMENTATION})


# -- rule predicates ---------------------------------------------------------

WORD_RE = re.compile(r"[^\W_]+")
ALPHA_WORD_RE = re.compile(r"[^\W\d_]+")


@dataclass(frozen=True)
class NamingRule:
    """A predicate a record name must satisfy.

    kind is one of ``min_words`` (alphabetic words), ``min_length`` (code
    points), ``regex`` (must match somewhere) or ``required_token``
    (case-insensitive word).
    """

    kind: str
    value: int | str
    applies_to: str = "any"

    def __post_init__(self):
        if self.kind not in ("min_words", "min_length", "regex", "required_token"):
            raise ValueError(f"unknown naming rule {self.kind!r}")
        if self.applies_to not in ("any", "Document", "Folder"):
            raise ValueError(f"bad applies_to {self.applies_to!r}")

    @property
    def label(self) -> str:
        return f"{self.kind}:{self.value}"

    def applies(self, is_folder: bool) -> bool:
        return self.applies_to == "any" or (self.applies_to == "Folder") == is_folder

    def check(self, name: str) -> bool:
        if self.kind == "min_words":
            return len(ALPHA_WORD_RE.findall(name)) >= int(self.value)
        if self.kind == "min_length":
            return len(name) >= int(self.value)
        if self.kind == "regex":
            return re.search(str(self.value), name) is not None
        wanted = str(self.value).casefold()
        return any(tok.casefold() == wanted for tok in WORD_RE.findall(name))


@dataclass(frozen=True)
class StructureRule:
    """A placement constraint on records.

    ``max_depth`` and ``max_docs_per_folder`` take an integer ``value``;
    ``forbidden_folder`` flags documents below any folder whose name matches
    ``value``; ``placement`` requires documents of ``doc_type`` to sit in a
    folder whose path matches ``value``.
    """

    kind: str
    value: int | str
    doc_type: str | None = None

    def __post_init__(self):
        if self.kind not in ("max_depth", "max_docs_per_folder", "forbidden_folder", "placement"):
            raise ValueError(f"unknown structure rule {self.kind!r}")
        if self.kind == "placement" and not self.doc_type:
            raise ValueError("placement rule needs doc_type")

    @property
    def label(self) -> str:
        return {
            "max_depth": "max_depth",
            "max_docs_per_folder": "catch-all",
            "forbidden_folder": "forbidden_location",
            "placement": "placement",
        }[self.kind]


# -- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class RuleConfig:
    batch_min_docs: int = 50
    batch_window: timedelta = timedelta(minutes=30)
    batch_gap: timedelta = timedelta(minutes=30)
    abandonment_period: timedelta = timedelta(days=365)
    single_version_excluded_types: frozenset[str] = frozenset()
    approved_abbreviations: frozenset[str] = frozenset()
    abbreviation_min_length: int = 2
    abbreviation_max_length: int = 6
    naming_rules: tuple[NamingRule, ...] = ()
    structure_rules: tuple[StructureRule, ...] = ()
    calendar_link_window: timedelta = timedelta(days=14)
    calendar_link_by: str = "organizer"

    def __post_init__(self):
        for name in ("batch_window", "batch_gap", "abandonment_period", "calendar_link_window"):
            if getattr(self, name) <= timedelta(0):
                raise ValueError(f"{name} must be positive")
        if self.batch_min_docs < 2:
            raise ValueError("batch_min_docs must be at least 2")
        if not 1 <= self.abbreviation_min_length <= self.abbreviation_max_length:
            raise ValueError("bad abbreviation length bounds")
        if self.calendar_link_by not in ("organizer", "unit"):
            raise ValueError("calendar_link_by must be 'organizer' or 'unit'")

    @classmethod
    def from_mapping(cls, data: Mapping) -> "RuleConfig":
        """Build a config from the documented key/value schema (see README)."""
        known = {
            "batch_min_docs", "batch_window_minutes", "batch_gap_minutes", "abandonment_days",
            "single_version_excluded_types", "approved_abbreviations", "abbreviation_min_length",
            "abbreviation_max_length", "naming_rules", "structure_rules", "calendar_link_days",
            "calendar_link_by",
        }
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        if "batch_min_docs" in data:
            kw["batch_min_docs"] = int(data["batch_min_docs"])
        if "batch_window_minutes" in data:
            kw["batch_window"] = timedelta(minutes=data["batch_window_minutes"])
        if "batch_gap_minutes" in data:
            kw["batch_gap"] = timedelta(minutes=data["batch_gap_minutes"])
        if "abandonment_days" in data:
            kw["abandonment_period"] = timedelta(days=data["abandonment_days"])
        if "calendar_link_days" in data:
            kw["calendar_link_window"] = timedelta(days=data["calendar_link_days"])
        for key in ("single_version_excluded_types", "approved_abbreviations"):
            if key in data:
                kw[key] = frozenset(data[key])
        for key in ("abbreviation_min_length", "abbreviation_max_length"):
            if key in data:
                kw[key] = int(data[key])
        if "calendar_link_by" in data:
            kw["calendar_link_by"] = data["calendar_link_by"]
        if "naming_rules" in data:
            kw["naming_rules"] = tuple(NamingRule(**r) for r in data["naming_rules"])
        if "structure_rules" in data:
            kw["structure_rules"] = tuple(StructureRule(**r) for r in data["structure_rules"])
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "RuleConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_mapping(json.load(fh))

    def override(self, **changes) -> "RuleConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_mapping(self) -> dict:
        minutes = lambda td: td.total_seconds() / 60  # noqa: E731
        return {
            "batch_min_docs": self.batch_min_docs,
            "batch_window_minutes": minutes(self.batch_window),
            "batch_gap_minutes": minutes(self.batch_gap),
            "abandonment_days": self.abandonment_period.total_seconds() / 86400,
            "single_version_excluded_types": sorted(self.single_version_excluded_types),
            "approved_abbreviations": sorted(self.approved_abbreviations),
            "abbreviation_min_length": self.abbreviation_min_length,
            "abbreviation_max_length": self.abbreviation_max_length,
            "naming_rules": [{"kind": r.kind, "value": r.value, "applies_to": r.applies_to} for r in self.naming_rules],
            "structure_rules": [
                {"kind": r.kind, "value": r.value, **({"doc_type": r.doc_type} if r.doc_type else {})}
                for r in self.structure_rules
            ],
            "calendar_link_days": self.calendar_link_window.total_seconds() / 86400,
            "calendar_link_by": self.calendar_link_by,
        }


def _seconds(td: timedelta) -> int:
    return int(td.total_seconds())


# -- events ------------------------------------------------------------------


@dataclass(frozen=True)
class DetectionEvent:
    rule_id: RuleId
    record_ids: tuple[str, ...]
    creator_id: str | None
    org_unit: str
    occurred_at: int
    details: Mapping = field(default_factory=dict)

    def sort_key(self):
        first = self.record_ids[0] if self.record_ids else str(self.details.get("event_id", ""))
        return (self.rule_id.value, self.occurred_at, first)

    def to_dict(self) -> dict:
        return {
            "rule_id": self.rule_id.value,
            "record_ids": list(self.record_ids),
            "creator_id": self.creator_id,
            "org_unit": self.org_unit,
            "occurred_at": format_timestamp(self.occurred_at),
            "details": dict(self.details),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "DetectionEvent":
        return cls(
            rule_id=RuleId(d["rule_id"]),
            record_ids=tuple(d["record_ids"]),
            creator_id=d.get("creator_id"),
            org_unit=d["org_unit"],
            occurred_at=parse_timestamp(d["occurred_at"]),
            details=d.get("details", {}),
        )


def sort_events(events: Iterable[DetectionEvent]) -> list[DetectionEvent]:
    return sorted(events, key=DetectionEvent.sort_key)


def write_events_jsonl(events: Iterable[DetectionEvent], stream: IO[str]) -> None:
    for ev in events:
        stream.write(json.dumps(ev.to_dict(), ensure_ascii=False, sort_keys=True))
        stream.write("\n")


def read_events_jsonl(stream: IO[str]) -> list[DetectionEvent]:
    return [DetectionEvent.from_dict(json.loads(line)) for line in stream if line.strip()]


def write_events_summary_csv(events: Iterable[DetectionEvent], stream: IO[str]) -> None:
    """One row per (rule, unit) with event and record counts."""
    counts: Counter = Counter()
    records: Counter = Counter()
    for ev in events:
        counts[ev.rule_id.value, ev.org_unit] += 1
        records[ev.rule_id.value, ev.org_unit] += len(ev.record_ids)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["rule_id", "org_unit", "events", "records"])
    for key in sorted(counts):
        writer.writerow([*key, counts[key], records[key]])


# -- I4.1 batch documentation ------------------------------------------------


def _modal(values: Sequence[str]) -> str:
    counts = Counter(values)
    best = max(counts.values())
    return min(v for v, n in counts.items() if n == best)


def detect_batch_documentation(index: RepositoryIndex, cfg: RuleConfig = RuleConfig()) -> list[DetectionEvent]:
    """Find upload batches per creator.

    A user's document creations are split into sessions wherever consecutive
    uploads are at least ``batch_gap`` apart.  A session is a batch when some
    window of ``batch_window`` (closed, first to last timestamp) holds
    ``batch_min_docs`` or more of its documents; the event then covers the
    whole session, so no document is counted in two batches.
    """
    docs = np.flatnonzero(~index.is_folder)
    if len(docs) == 0:
        return []
    created = index.created[docs]
    creators = index.creator_code[docs]
    # ids are id-sorted, so position breaks same-second ties by record_id
    order = np.lexsort((docs, created, creators))
    pos = docs[order]
    t = created[order]
    c = creators[order]
    n = len(pos)

    gap = _seconds(cfg.batch_gap)
    window = _seconds(cfg.batch_window)
    start = np.ones(n, dtype=bool)
    start[1:] = (c[1:] != c[:-1]) | (t[1:] - t[:-1] >= gap)
    sid = np.cumsum(start) - 1

    rel = t - t.min()
    offset = int(rel.max()) + window + 1
    if int(sid[-1]) * offset < 2**62:
        key = sid * offset + rel
        reach = np.searchsorted(key, key + window, side="right")
    else:  # pragma: no cover - only for absurd time spans
        reach = np.empty(n, dtype=np.int64)
        bounds = np.flatnonzero(start).tolist() + [n]
        for a, b in zip(bounds[:-1], bounds[1:]):
            reach[a:b] = a + np.searchsorted(t[a:b], t[a:b] + window, side="right")
    in_window = reach - np.arange(n)

    hits = in_window >= cfg.batch_min_docs
    if not hits.any():
        return []
    session_starts = np.flatnonzero(start)
    session_ends = np.append(session_starts[1:], n)
    max_in_window = np.maximum.reduceat(in_window, session_starts)

    events = []
    for s in np.unique(sid[hits]):
        a, b = int(session_starts[s]), int(session_ends[s])
        members = [index.ids[i] for i in pos[a:b]]
        first_hit = a + int(np.argmax(hits[a:b]))
        events.append(
            DetectionEvent(
                rule_id=RuleId.BATCH_DOCUMENTATION,
                record_ids=tuple(members),
                creator_id=index.creator_names[c[a]],
                org_unit=_modal([index.records[m].org_unit for m in members]),
                occurred_at=int(t[a]),
                details={
                    "batch_size": b - a,
                    "ended_at": format_timestamp(int(t[b - 1])),
                    "max_docs_in_window": int(max_in_window[s]),
                    "trigger_window_start": format_timestamp(int(t[first_hit])),
                },
            )
        )
    return sort_events(events)


# -- I4.2 abandoned documentation --------------------------------------------


class _SubtreeActivity:
    """Latest last_updated_at among a folder's descendants created up to t.

    Each (ancestor, descendant) pair is materialized once, sorted by
    descendant creation time, with a per-ancestor running max of update
    times; a query for any t is then one binary search per folder.
    """

    def __init__(self, index: RepositoryIndex):
        anc_parts, cre_parts, upd_parts = [], [], []
        cur = index.parent.copy()
        everyone = np.arange(len(cur))
        while True:
            live = cur >= 0
            if not live.any():
                break
            anc_parts.append(cur[live])
            cre_parts.append(index.created[everyone[live]])
            upd_parts.append(index.updated[everyone[live]])
            nxt = cur.copy()
            nxt[live] = index.parent[cur[live]]
            cur = nxt
        self.n = len(index.ids)
        if not anc_parts:
            self.keys = np.empty(0, dtype=np.int64)
            return
        anc = np.concatenate(anc_parts)
        cre = np.concatenate(cre_parts)
        upd = np.concatenate(upd_parts)
        self.tmin = int(index.created.min())
        span = int(max(index.updated.max(), index.created.max())) - self.tmin + 2
        self.span = span
        order = np.lexsort((cre, anc))
        anc, cre, upd = anc[order], cre[order], upd[order]
        self.anc = anc
        self.keys = anc * span + (cre - self.tmin)
        lifted = anc * span + (upd - self.tmin + 1)
        self.prefix_max = np.maximum.accumulate(lifted) - anc * span + self.tmin - 1

    def latest(self, folders: np.ndarray, t: int) -> np.ndarray:
        """Descendant max update time per folder, or int64 min if none exist at t."""
        out = np.full(len(folders), np.iinfo(np.int64).min, dtype=np.int64)
        if len(self.keys) == 0 or len(folders) == 0:
            return out
        q = min(max(t - self.tmin, -1), self.span - 1)
        idx = np.searchsorted(self.keys, folders * self.span + q, side="right") - 1
        ok = idx >= 0
        ok[ok] = self.anc[idx[ok]] == folders[ok]
        out[ok] = self.prefix_max[idx[ok]]
        return out


_activity_cache: "weakref.WeakKeyDictionary[RepositoryIndex, _SubtreeActivity]" = weakref.WeakKeyDictionary()


def _subtree_activity(index: RepositoryIndex) -> _SubtreeActivity:
    act = _activity_cache.get(index)
    if act is None:
        act = _activity_cache[index] = _SubtreeActivity(index)
    return act


def abandoned_mask(index: RepositoryIndex, cfg: RuleConfig, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Boolean mask of records abandoned at ``t`` plus their last activity times."""
    exists = index.created <= t
    unarchived = index.archived_eff > t
    last = index.updated.copy()
    folders = np.flatnonzero(index.is_folder & exists)
    if len(folders):
        last[folders] = np.maximum(last[folders], _subtree_activity(index).latest(folders, t))
    idle = (t - last) > _seconds(cfg.abandonment_period)
    return exists & unarchived & idle, last


def detect_abandoned(index: RepositoryIndex, cfg: RuleConfig, t: int) -> list[DetectionEvent]:
    """Records neither archived nor modified for longer than the abandonment period at ``t``.

    A folder counts as modified whenever anything below it that existed at
    ``t`` was modified.
    """
    mask, last = abandoned_mask(index, cfg, t)
    events = []
    for i in np.flatnonzero(mask):
        rec = index.records[index.ids[i]]
        events.append(
            DetectionEvent(
                rule_id=RuleId.ABANDONED_DOCUMENTATION,
                record_ids=(rec.record_id,),
                creator_id=rec.creator_id,
                org_unit=rec.org_unit,
                occurred_at=int(t),
                details={"kind": rec.kind.value, "idle_days": round((t - int(last[i])) / 86400, 3)},
            )
        )
    return sort_events(events)


# -- I2.2 non-compliant structure --------------------------------------------


def detect_noncompliant_structure(index: RepositoryIndex, cfg: RuleConfig) -> list[DetectionEvent]:
    """One event per record violating any configured structure rule (current state)."""
    if not cfg.structure_rules:
        logger.warning("structure rule set empty; I2_2 not evaluated")
        return []
    n = len(index.ids)
    violations: dict[int, list[str]] = {}

    def flag(mask: np.ndarray, label: str):
        for i in np.flatnonzero(mask):
            violations.setdefault(int(i), []).append(label)

    docs = ~index.is_folder
    has_parent = index.parent >= 0
    doc_counts = np.bincount(index.parent[docs & has_parent], minlength=n)
    path_cache: dict[int, str] = {}

    def folder_path(i: int) -> str:
        if i not in path_cache:
            path_cache[i] = index.path(index.ids[i])
        return path_cache[i]

    for rule in cfg.structure_rules:
        if rule.kind == "max_depth":
            flag(index.depth > int(rule.value), rule.label)
        elif rule.kind == "max_docs_per_folder":
            crowded = np.zeros(n, dtype=bool)
            crowded[has_parent] = doc_counts[index.parent[has_parent]] > int(rule.value)
            flag(docs & crowded, rule.label)
        elif rule.kind == "forbidden_folder":
            pattern = re.compile(str(rule.value))
            bad_folder = np.zeros(n, dtype=bool)
            for i in np.flatnonzero(index.is_folder):
                bad_folder[i] = pattern.search(index.records[index.ids[i]].name) is not None
            # propagate to every descendant
            below = np.zeros(n, dtype=bool)
            cur = index.parent.copy()
            while (cur >= 0).any():
                live = cur >= 0
                below[live] |= bad_folder[cur[live]]
                cur[live] = index.parent[cur[live]]
            flag(docs & below, rule.label)
        elif rule.kind == "placement":
            pattern = re.compile(str(rule.value))
            bad = np.zeros(n, dtype=bool)
            for i in np.flatnonzero(docs):
                rec = index.records[index.ids[i]]
                if rec.doc_type != rule.doc_type:
                    continue
                p = int(index.parent[i])
                bad[i] = p < 0 or pattern.search(folder_path(p)) is None
            flag(bad, rule.label)

    events = []
    for i, labels in violations.items():
        rec = index.records[index.ids[i]]
        events.append(
            DetectionEvent(
                rule_id=RuleId.NONCOMPLIANT_STRUCTURE,
                record_ids=(rec.record_id,),
                creator_id=rec.creator_id,
                org_unit=rec.org_unit,
                occurred_at=rec.created_at,
                details={"predicates": labels, "depth": int(index.depth[i])},
            )
        )
    return sort_events(events)


# -- I2.3 non-standard naming ------------------------------------------------


def naming_violations(name: str, is_folder: bool, rules: Sequence[NamingRule]) -> list[str]:
    applicable = [r for r in rules if r.applies(is_folder)]
    if not applicable:
        return []
    if not name.strip():
        return ["empty"]
    return [r.label for r in applicable if not r.check(name)]


def detect_nonstandard_naming(index: RepositoryIndex, cfg: RuleConfig) -> list[DetectionEvent]:
    """One event per record whose name fails a naming rule."""
    if not cfg.naming_rules:
        logger.warning("naming rule set empty; I2_3 not evaluated")
        return []
    events = []
    for rid in index.ids:
        rec = index.records[rid]
        failed = naming_violations(rec.name, rec.is_folder, cfg.naming_rules)
        if failed:
            events.append(
                DetectionEvent(
                    rule_id=RuleId.NONSTANDARD_NAMING,
                    record_ids=(rid,),
                    creator_id=rec.creator_id,
                    org_unit=rec.org_unit,
                    occurred_at=rec.created_at,
                    details={"failed_rules": failed, "name": rec.name},
                )
            )
    return sort_events(events)


# -- I3.1 opaque language ----------------------------------------------------


def tokenize(text: str) -> list[str]:
    return WORD_RE.findall(text)


def is_abbreviation(token: str, cfg: RuleConfig) -> bool:
    return (
        cfg.abbreviation_min_length <= len(token) <= cfg.abbreviation_max_length
        and token.isalpha()
        and token.isupper()
    )


def unknown_abbreviations(text: str, cfg: RuleConfig) -> list[str]:
    """Candidate abbreviations not in the approved list, with repeats, in text order."""
    return [tok for tok in tokenize(text) if is_abbreviation(tok, cfg) and tok not in cfg.approved_abbreviations]


def detect_opaque_language(
    index: RepositoryIndex, cfg: RuleConfig, texts: Mapping[str, str] | None = None
) -> list[DetectionEvent]:
    """Records whose name (or supplied full text) uses unapproved abbreviations."""
    if texts is None:
        source = ((rid, index.records[rid].name) for rid in index.ids)
    else:
        source = ((rid, texts[rid]) for rid in sorted(texts) if rid in index.records)
    events = []
    for rid, text in source:
        found = list(dict.fromkeys(unknown_abbreviations(text, cfg)))
        if found:
            rec = index.records[rid]
            events.append(
                DetectionEvent(
                    rule_id=RuleId.OPAQUE_LANGUAGE,
                    record_ids=(rid,),
                    creator_id=rec.creator_id,
                    org_unit=rec.org_unit,
                    occurred_at=rec.created_at,
                    details={"tokens": found},
                )
            )
    return sort_events(events)


# -- I1.1 documentation avoidance --------------------------------------------


def linked_document_counts(
    index: RepositoryIndex, cfg: RuleConfig, calendar: Sequence[CalendarEvent]
) -> np.ndarray:
    """Documents created within the link window of each calendar event."""
    window = _seconds(cfg.calendar_link_window)
    counts = np.zeros(len(calendar), dtype=np.int64)
    if cfg.calendar_link_by == "organizer":
        for k, ev in enumerate(calendar):
            times = index.user_timelines.get(ev.organizer_id)
            if times is not None:
                lo = np.searchsorted(times, ev.starts_at, side="left")
                hi = np.searchsorted(times, ev.starts_at + window, side="right")
                counts[k] = hi - lo
    else:
        docs = ~index.is_folder
        per_unit: dict[str, np.ndarray] = {}
        for k, ev in enumerate(calendar):
            times = per_unit.get(ev.org_unit)
            if times is None:
                times = per_unit[ev.org_unit] = np.sort(index.created[docs & index.unit_mask(ev.org_unit)])
            lo = np.searchsorted(times, ev.starts_at, side="left")
            hi = np.searchsorted(times, ev.starts_at + window, side="right")
            counts[k] = hi - lo
    return counts


def detect_documentation_avoidance(
    index: RepositoryIndex, cfg: RuleConfig, calendar: Sequence[CalendarEvent] | None
) -> list[DetectionEvent]:
    """Calendar events that require documentation but have none in the link window.

    The event has no records of its own (the point is their absence); the
    calendar event id is carried in ``details``.
    """
    if calendar is None:
        logger.info("no calendar supplied; I1_1 skipped")
        return []
    flagged = [ev for ev in calendar if ev.requires_documentation]
    counts = linked_document_counts(index, cfg, flagged)
    events = [
        DetectionEvent(
            rule_id=RuleId.DOCUMENTATION_AVOIDANCE,
            record_ids=(),
            creator_id=ev.organizer_id,
            org_unit=ev.org_unit,
            occurred_at=ev.starts_at,
            details={"event_id": ev.event_id, "event_type": ev.event_type},
        )
        for ev, n in zip(flagged, counts)
        if n == 0
    ]
    return sort_events(events)


def run_all(
    index: RepositoryIndex,
    cfg: RuleConfig,
    t: int | None = None,
    rules: Iterable[RuleId] | None = None,
    calendar: Sequence[CalendarEvent] | None = None,
    texts: Mapping[str, str] | None = None,
) -> list[DetectionEvent]:
    """Run the selected detectors; state rules are evaluated at ``t`` (default: end of data)."""
    rules = set(RuleId) if rules is None else set(rules)
    if t is None and index.time_bounds is not None:
        t = index.time_bounds[1]
    events: list[DetectionEvent] = []
    if RuleId.BATCH_DOCUMENTATION in rules:
        events += detect_batch_documentation(index, cfg)
    if RuleId.ABANDONED_DOCUMENTATION in rules and t is not None:
        events += detect_abandoned(index, cfg, t)
    if RuleId.NONCOMPLIANT_STRUCTURE in rules and cfg.structure_rules:
        events += detect_noncompliant_structure(index, cfg)
    if RuleId.NONSTANDARD_NAMING in rules and cfg.naming_rules:
        events += detect_nonstandard_naming(index, cfg)
    if RuleId.OPAQUE_LANGUAGE in rules:
        events += detect_opaque_language(index, cfg, texts)
    if RuleId.DOCUMENTATION_AVOIDANCE in rules:
        events += detect_documentation_avoidance(index, cfg, calendar)
    return sort_events(events)

