"""Synthetic EDMS corpora with planted anti-pattern occurrences.

The clean background is built so that no default rule can fire on it:

* every background user's uploads are at least ``batch_gap`` apart, so no
  session ever holds more than one document;
* every background record is archived within ``max_archive_lag_days`` of its
  last update (or was updated more recently than that before the horizon
  end), and that lag is shorter than the abandonment period;
* every documentation-requiring calendar event is derived from a document
  its organizer created inside the link window.

Planted batches belong to dedicated users that upload nothing else, and
planted abandoned documents are ordinary background documents whose last
update is pushed back and whose archiving is withheld.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from .core import ArchivalState, CalendarEvent, Kind, RecordEntry, format_timestamp, parse_timestamp
from .detectors import RuleConfig, RuleId

DAY = 86400

_TOPICS = (
    "Afsluitdijk", "Waddenzee", "Schiphol", "Maasvlakte", "Deltawerken", "Rijnmond", "Zuidas", "Betuweroute",
    "Lelystad", "Noordzee", "Markermeer", "Haringvliet", "Veluwe", "Twente", "Zeeland", "Flevoland",
)
_DOC_TYPES = ("memo", "report", "letter", "minutes", "email")
_DOC_WORDS = {"memo": "Memo", "report": "Report", "letter": "Letter", "minutes": "Minutes", "email": "Email"}
_FOLDER_WORDS = ("Project", "Dossier", "Programme", "Consultation", "Maintenance", "Policy")
_EVENT_TYPES = ("meeting", "steering committee", "consultation", "briefing")


class GenerationError(ValueError):
    """The spec cannot be realized without breaking the clean-background guarantees."""

    def __init__(self, message: str, parameters: tuple[str, ...]):
        super().__init__(f"{message} (check: {', '.join(parameters)})")
        self.parameters = parameters


@dataclass(frozen=True)
class GeneratorSpec:
    seed: int
    horizon: tuple[int, int]
    n_users: int
    n_units: int
    n_folders: int
    n_docs: int
    injection: Mapping[str, float] = field(default_factory=dict)
    n_calendar_events: int | None = None
    flagged_share: float = 0.7
    revision_p: float = 0.45
    max_archive_lag_days: int = 180
    destruction_share: float = 0.3
    batch_size: tuple[int, int] = (50, 200)

    def __post_init__(self):
        start, end = self.horizon
        if start >= end:
            raise ValueError("horizon start must precede end")
        for name in ("n_users", "n_units", "n_folders", "n_docs"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for rule, rate in self.injection.items():
            RuleId(rule)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"injection rate for {rule} outside [0, 1]")
        if not 0 < self.revision_p <= 1:
            raise ValueError("revision_p must be in (0, 1]")

    def rate(self, rule: RuleId) -> float:
        return float(self.injection.get(rule.value, 0.0))

    @classmethod
    def from_mapping(cls, data: Mapping) -> "GeneratorSpec":
        data = dict(data)
        if "horizon" in data:
            start, end = data.pop("horizon")
        else:
            start, end = data.pop("start"), data.pop("end")
        if "batch_size" in data:
            data["batch_size"] = tuple(data["batch_size"])
        return cls(horizon=(parse_timestamp(start), parse_timestamp(end)), **data)

    @classmethod
    def load(cls, path) -> "GeneratorSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_mapping(json.load(fh))

    def to_mapping(self) -> dict:
        d = asdict(self)
        d["horizon"] = [format_timestamp(self.horizon[0]), format_timestamp(self.horizon[1])]
        d["injection"] = dict(sorted(self.injection.items()))
        d["batch_size"] = list(self.batch_size)
        return d


@dataclass(frozen=True)
class PlantedBatch:
    creator_id: str
    record_ids: tuple[str, ...]
    start: int


@dataclass(frozen=True)
class GroundTruth:
    measured_at: int
    batches: tuple[PlantedBatch, ...] = ()
    abandoned: tuple[str, ...] = ()
    undocumented_events: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "measured_at": format_timestamp(self.measured_at),
            RuleId.BATCH_DOCUMENTATION.value: [
                {"creator_id": b.creator_id, "start": format_timestamp(b.start), "record_ids": list(b.record_ids)}
                for b in self.batches
            ],
            RuleId.ABANDONED_DOCUMENTATION.value: list(self.abandoned),
            RuleId.DOCUMENTATION_AVOIDANCE.value: list(self.undocumented_events),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "GroundTruth":
        return cls(
            measured_at=parse_timestamp(d["measured_at"]),
            batches=tuple(
                PlantedBatch(b["creator_id"], tuple(b["record_ids"]), parse_timestamp(b["start"]))
                for b in d[RuleId.BATCH_DOCUMENTATION.value]
            ),
            abandoned=tuple(d[RuleId.ABANDONED_DOCUMENTATION.value]),
            undocumented_events=tuple(d[RuleId.DOCUMENTATION_AVOIDANCE.value]),
        )


def _unit_names(n_units: int) -> list[str]:
    n_top = max(1, int(round(np.sqrt(n_units))))
    return [f"D{i + 1}" if i < n_top else f"D{i % n_top + 1}/S{i + 1}" for i in range(n_units)]


def generate(spec: GeneratorSpec, cfg: RuleConfig = RuleConfig()):
    """Generate ``(records, calendar, truth)`` deterministically from ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    start, end = spec.horizon
    gap = int(cfg.batch_gap.total_seconds())
    window = int(cfg.batch_window.total_seconds())
    period = int(cfg.abandonment_period.total_seconds())
    link = int(cfg.calendar_link_window.total_seconds())
    max_lag = spec.max_archive_lag_days * DAY
    if max_lag >= period:
        raise GenerationError("archive lag must stay below the abandonment period", ("max_archive_lag_days",))
    if spec.n_folders < spec.n_units:
        raise GenerationError("every unit needs a root folder", ("n_folders", "n_units"))

    units = _unit_names(spec.n_units)
    n_batches = int(round(spec.rate(RuleId.BATCH_DOCUMENTATION) * spec.n_users))
    n_batch_users = min(n_batches, max(1, spec.n_users // 4)) if n_batches else 0
    if n_batches and spec.n_users - n_batch_users < 1:
        raise GenerationError("batch injection leaves no background users", ("n_users", "injection.I4_1"))
    lo_size, hi_size = spec.batch_size
    if lo_size < cfg.batch_min_docs or hi_size < lo_size:
        raise GenerationError("planted batch sizes must reach batch_min_docs", ("batch_size",))

    user_unit = rng.integers(0, spec.n_units, size=spec.n_users)
    # unit roots exist from the start, other folders appear over the horizon
    folder_unit = np.concatenate([np.arange(spec.n_units), rng.integers(0, spec.n_units, spec.n_folders - spec.n_units)])
    folder_created = np.concatenate(
        [np.full(spec.n_units, start), rng.integers(start, end - DAY, spec.n_folders - spec.n_units, endpoint=True)]
    )

    # -- document timelines -------------------------------------------------
    batch_sizes = rng.integers(lo_size, hi_size, size=n_batches, endpoint=True)
    n_background = spec.n_docs - int(batch_sizes.sum())
    n_bg_users = spec.n_users - n_batch_users
    if n_background < 1:
        raise GenerationError("n_docs too small for the planted batches", ("n_docs", "injection.I4_1", "batch_size"))

    slot = 2 * gap
    n_slots = (end - DAY - start) // slot
    per_user = rng.multinomial(n_background, np.full(n_bg_users, 1.0 / n_bg_users))
    if per_user.max() > n_slots:
        raise GenerationError(
            "too many documents per user to keep uploads batch_gap apart", ("n_docs", "n_users", "horizon")
        )
    doc_creator = np.repeat(np.arange(n_batch_users, spec.n_users), per_user)
    doc_created = np.empty(n_background, dtype=np.int64)
    pos = 0
    for k in per_user:
        picks = np.sort(rng.choice(n_slots, size=k, replace=False))
        doc_created[pos:pos + k] = start + picks * slot + rng.integers(0, slot - gap, size=k, endpoint=True)
        pos += k

    batches_created = []
    batch_owner = np.arange(n_batches) % max(n_batch_users, 1)
    n_days = (end - start) // DAY - 2
    for u in range(n_batch_users):
        mine = np.flatnonzero(batch_owner == u)
        if len(mine) > n_days:
            raise GenerationError("too many batches for one user within the horizon", ("injection.I4_1", "horizon"))
        days = np.sort(rng.choice(n_days, size=len(mine), replace=False)) + 1
        for b, day in zip(mine, days):
            t0 = start + int(day) * DAY + int(rng.integers(0, DAY // 2))
            span = min(window, gap) - 1
            offsets = np.sort(rng.integers(0, span, size=batch_sizes[b] - 1, endpoint=True))
            batches_created.append((b, u, t0 + np.concatenate([[0], offsets])))
    batches_created.sort(key=lambda x: x[0])

    all_created = [doc_created] + [times for _, _, times in batches_created]
    all_creator = [doc_creator] + [np.full(len(times), u) for _, u, times in batches_created]
    created = np.concatenate(all_created).astype(np.int64)
    creator = np.concatenate(all_creator).astype(np.int64)
    n_docs = len(created)
    batch_of_doc = np.concatenate(
        [np.full(n_background, -1)] + [np.full(len(times), b) for b, _, times in batches_created]
    ).astype(np.int64)

    doc_unit = user_unit[creator]
    edits = rng.integers(0, 30 * DAY, size=n_docs)
    updated = np.minimum(created + edits, end)
    revisions = rng.geometric(spec.revision_p, size=n_docs)
    doc_type = rng.integers(0, len(_DOC_TYPES), size=n_docs)
    revisions[doc_type == _DOC_TYPES.index("email")] = 1

    # -- abandoned documents --------------------------------------------------
    n_abandoned = int(round(spec.rate(RuleId.ABANDONED_DOCUMENTATION) * n_background))
    cutoff = end - period - 2 * DAY
    eligible = np.flatnonzero((batch_of_doc < 0) & (created <= cutoff))
    if n_abandoned > len(eligible):
        raise GenerationError("not enough old documents to plant abandonment", ("injection.I4_2", "horizon"))
    abandoned = np.sort(rng.choice(eligible, size=n_abandoned, replace=False)) if n_abandoned else np.empty(0, int)
    updated[abandoned] = created[abandoned] + rng.integers(0, DAY, size=n_abandoned)

    # -- folder tree ----------------------------------------------------------
    folder_parent = np.full(spec.n_folders, -1, dtype=np.int64)
    unit_folders: list[np.ndarray] = []
    for u in range(spec.n_units):
        members = np.flatnonzero(folder_unit == u)
        members = members[np.lexsort((members, folder_created[members]))]
        unit_folders.append(members)
        for k in range(1, len(members)):
            folder_parent[members[k]] = members[int(rng.integers(0, k))]
    doc_folder = np.empty(n_docs, dtype=np.int64)
    for u in range(spec.n_units):
        docs_here = np.flatnonzero(doc_unit == u)
        if not len(docs_here):
            continue
        members = unit_folders[u]
        avail = np.searchsorted(folder_created[members], created[docs_here], side="right")
        doc_folder[docs_here] = members[(rng.random(len(docs_here)) * avail).astype(np.int64)]

    folder_updated = np.minimum(folder_created + rng.integers(0, 30 * DAY, size=spec.n_folders), end)
    folder_owner = np.empty(spec.n_folders, dtype=np.int64)
    bg_users = np.arange(n_batch_users, spec.n_users)
    for u in range(spec.n_units):
        members = unit_folders[u]
        pool = bg_users[user_unit[bg_users] == u]
        if not len(pool):
            pool = bg_users
        folder_owner[members] = pool[rng.integers(0, len(pool), size=len(members))]

    # -- archiving ------------------------------------------------------------
    def archive(last_update, exempt=None):
        lag = rng.integers(DAY, max_lag, size=len(last_update), endpoint=True)
        when = last_update + lag
        done = when <= end
        if exempt is not None:
            done[exempt] = False
        destroy = rng.random(len(last_update)) < spec.destruction_share
        return when, done, destroy

    doc_arch_at, doc_arch, doc_destroy = archive(updated, abandoned)
    fld_arch_at, fld_arch, fld_destroy = archive(folder_updated)

    # -- calendar -------------------------------------------------------------
    n_events = spec.n_calendar_events if spec.n_calendar_events is not None else 2 * spec.n_users
    n_flagged = int(round(n_events * spec.flagged_share))
    n_avoid = int(round(spec.rate(RuleId.DOCUMENTATION_AVOIDANCE) * n_flagged))
    calendar: list[CalendarEvent] = []
    background_docs = np.flatnonzero(batch_of_doc < 0)
    for k, d in enumerate(rng.choice(background_docs, size=n_flagged - n_avoid, replace=True) if n_flagged - n_avoid else []):
        u = int(creator[d])
        calendar.append(CalendarEvent(
            f"ev{k:06d}", int(created[d]) - int(rng.integers(0, link)), _EVENT_TYPES[k % len(_EVENT_TYPES)],
            f"u{u:05d}", units[user_unit[u]], True,
        ))
    if n_avoid and cfg.calendar_link_by != "organizer":
        # quiet periods are found per organizer; a unit-wide link would see colleagues' documents
        raise GenerationError("undocumented events can only be planted with organizer linking",
                              ("injection.I1_1", "calendar_link_by"))
    avoided = []
    order = np.argsort(creator[:n_background], kind="stable")
    timeline_times = created[:n_background][order]
    timeline_users = creator[:n_background][order]
    cuts = np.searchsorted(timeline_users, np.arange(spec.n_users + 1))
    for k in range(n_flagged - n_avoid, n_flagged):
        for _attempt in range(50):
            u = int(rng.integers(n_batch_users, spec.n_users))
            times = timeline_times[cuts[u]:cuts[u + 1]]
            anchors = np.concatenate([[start - 1], times])
            following = np.concatenate([times, [end + link + 2]])
            free = np.flatnonzero(following - anchors > link + 1)
            if len(free):
                at = int(anchors[free[int(rng.integers(0, len(free)))]]) + 1
                break
        else:
            raise GenerationError("no quiet period long enough for an undocumented event", ("injection.I1_1", "n_docs"))
        ev_id = f"ev{k:06d}"
        calendar.append(CalendarEvent(ev_id, at, _EVENT_TYPES[k % len(_EVENT_TYPES)], f"u{u:05d}", units[user_unit[u]], True))
        avoided.append(ev_id)
    for k in range(n_flagged, n_events):
        u = int(rng.integers(0, spec.n_users))
        calendar.append(CalendarEvent(
            f"ev{k:06d}", int(rng.integers(start, end)), _EVENT_TYPES[k % len(_EVENT_TYPES)],
            f"u{u:05d}", units[user_unit[u]], False,
        ))

    # -- materialize ----------------------------------------------------------
    records: list[RecordEntry] = []
    topic_idx = rng.integers(0, len(_TOPICS), size=spec.n_folders)
    word_idx = rng.integers(0, len(_FOLDER_WORDS), size=spec.n_folders)
    unit_labels = [units[u] for u in range(spec.n_units)]
    user_ids = [f"u{u:05d}" for u in range(spec.n_users)]
    folder_ids = [f"fld{i:06d}" for i in range(spec.n_folders)]
    folder_year = (folder_created.astype("datetime64[s]").astype("datetime64[Y]").astype(np.int64) + 1970).tolist()
    for i in range(spec.n_folders):
        state = ArchivalState.ACTIVE
        archived_at = None
        if fld_arch[i]:
            state = ArchivalState.MARKED_FOR_DESTRUCTION if fld_destroy[i] else ArchivalState.ARCHIVED
            archived_at = int(fld_arch_at[i])
        records.append(RecordEntry(
            record_id=folder_ids[i],
            kind=Kind.FOLDER,
            parent_id=None if folder_parent[i] < 0 else folder_ids[folder_parent[i]],
            name=f"{_FOLDER_WORDS[word_idx[i]]} {_TOPICS[topic_idx[i]]} {folder_year[i]}",
            doc_type="",
            created_at=int(folder_created[i]),
            last_updated_at=int(folder_updated[i]),
            creator_id=user_ids[folder_owner[i]],
            org_unit=unit_labels[folder_unit[i]],
            revision_count=None,
            archival_state=state,
            archived_at=archived_at,
        ))

    doc_ids = [f"doc{i:07d}" for i in range(n_docs)]
    for i in range(n_docs):
        state = ArchivalState.ACTIVE
        archived_at = None
        if doc_arch[i]:
            state = ArchivalState.MARKED_FOR_DESTRUCTION if doc_destroy[i] else ArchivalState.ARCHIVED
            archived_at = int(doc_arch_at[i])
        dtype = _DOC_TYPES[doc_type[i]]
        records.append(RecordEntry(
            record_id=doc_ids[i],
            kind=Kind.DOCUMENT,
            parent_id=folder_ids[doc_folder[i]],
            name=f"{_DOC_WORDS[dtype]} {_TOPICS[topic_idx[doc_folder[i]]]} {i % 9973:04d}",
            doc_type=dtype,
            created_at=int(created[i]),
            last_updated_at=int(updated[i]),
            creator_id=user_ids[creator[i]],
            org_unit=unit_labels[doc_unit[i]],
            revision_count=int(revisions[i]),
            archival_state=state,
            archived_at=archived_at,
        ))

    planted = []
    for b, u, times in batches_created:
        members = np.flatnonzero(batch_of_doc == b)
        order = np.lexsort((members, created[members]))
        planted.append(PlantedBatch(user_ids[u], tuple(doc_ids[m] for m in members[order]), int(times.min())))
    truth = GroundTruth(
        measured_at=end,
        batches=tuple(planted),
        abandoned=tuple(doc_ids[i] for i in abandoned),
        undocumented_events=tuple(avoided),
    )
    calendar.sort(key=lambda ev: ev.event_id)
    return records, calendar, truth
