"""EDMS metadata model, input parsing and the immutable repository index.

Timestamps are carried as integer UTC epoch seconds throughout the package.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import sys
import time
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from types import MappingProxyType
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

ORPHAN_ROOT = "_orphans"
# archival effective time of records that were never archived
NEVER = np.iinfo(np.int64).max

FIELDS = (
    "record_id",
    "kind",
    "parent_id",
    "name",
    "doc_type",
    "created_at",
    "last_updated_at",
    "creator_id",
    "org_unit",
    "revision_count",
    "archival_state",
    "archived_at",
)


class Kind(str, Enum):
    DOCUMENT = "Document"
    FOLDER = "Folder"


class ArchivalState(str, Enum):
    ACTIVE = "Active"
    ARCHIVED = "Archived"
    MARKED_FOR_DESTRUCTION = "MarkedForDestruction"


_STATE_CODES = {
    ArchivalState.ACTIVE: 0,
    ArchivalState.ARCHIVED: 1,
    ArchivalState.MARKED_FOR_DESTRUCTION: 2,
}


class EDMSError(Exception):
    """Base class for fatal input problems."""


class InputFormatError(EDMSError):
    """The input cannot be read as a record export at all."""


class ValidationError(EDMSError):
    """The records parse but violate repository-level invariants."""

    def __init__(self, message: str, offenders: Sequence[str] = ()):
        super().__init__(message)
        self.offenders = list(offenders)


@dataclass(frozen=True)
class RowError:
    line: int
    reason: str


@dataclass(frozen=True, slots=True)
class RecordEntry:
    record_id: str
    kind: Kind
    parent_id: str | None
    name: str
    doc_type: str
    created_at: int
    last_updated_at: int
    creator_id: str
    org_unit: str
    revision_count: int | None
    archival_state: ArchivalState
    archived_at: int | None = None

    @property
    def is_folder(self) -> bool:
        return self.kind is Kind.FOLDER

    def to_dict(self) -> dict:
        """Plain mapping in export form (ISO timestamps, enum values as text)."""
        return {
            "record_id": self.record_id,
            "kind": self.kind.value,
            "parent_id": self.parent_id,
            "name": self.name,
            "doc_type": self.doc_type,
            "created_at": format_timestamp(self.created_at),
            "last_updated_at": format_timestamp(self.last_updated_at),
            "creator_id": self.creator_id,
            "org_unit": self.org_unit,
            "revision_count": self.revision_count,
            "archival_state": self.archival_state.value,
            "archived_at": None if self.archived_at is None else format_timestamp(self.archived_at),
        }


@dataclass(frozen=True)
class CalendarEvent:
    event_id: str
    starts_at: int
    event_type: str
    organizer_id: str
    org_unit: str
    requires_documentation: bool


# -- timestamps ---------------------------------------------------------------


def parse_timestamp(value) -> int:
    """Parse an ISO-8601 timestamp with zone, or epoch seconds, to epoch seconds.

    Naive ISO strings are rejected: an export without zone information is
    ambiguous by up to a day.
    """
    if isinstance(value, bool):
        raise ValueError("boolean is not a timestamp")
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError(f"fractional epoch seconds: {value}")
        return int(value)
    text = str(value).strip()
    if not text:
        raise ValueError("empty timestamp")
    if text.lstrip("-").isdigit():
        return int(text)
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        raise ValueError(f"timestamp without zone: {value!r}")
    return int(dt.timestamp())


def format_timestamp(ts: int) -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(int(ts)))


# -- parsing ------------------------------------------------------------------


class _RowProblem(ValueError):
    pass


def _blank(value) -> bool:
    return value is None or (isinstance(value, str) and not value.strip())


def _text(value) -> str:
    return "" if value is None else str(value)


def record_from_mapping(row: Mapping) -> RecordEntry:
    """Build one validated RecordEntry from a field-name mapping.

    Raises ``ValueError`` with a short reason when the row is malformed.
    """
    rid = row.get("record_id")
    if _blank(rid):
        raise _RowProblem("missing record_id")
    try:
        kind = Kind(str(row.get("kind", "")).strip())
    except ValueError:
        raise _RowProblem(f"bad kind {row.get('kind')!r}") from None

    try:
        created = parse_timestamp(row.get("created_at"))
        updated = parse_timestamp(row.get("last_updated_at"))
    except (TypeError, ValueError) as exc:
        raise _RowProblem(f"bad timestamp: {exc}") from None
    if created > updated:
        raise _RowProblem("timestamp order")

    raw_rev = row.get("revision_count")
    if _blank(raw_rev):
        revisions = None
    else:
        try:
            revisions = int(raw_rev)
        except (TypeError, ValueError):
            raise _RowProblem(f"bad revision_count {raw_rev!r}") from None
        if revisions < 1:
            raise _RowProblem("revision_count < 1")
    if kind is Kind.DOCUMENT and revisions is None:
        raise _RowProblem("document without revision_count")

    raw_state = row.get("archival_state")
    try:
        state = ArchivalState.ACTIVE if _blank(raw_state) else ArchivalState(str(raw_state).strip())
    except ValueError:
        raise _RowProblem(f"bad archival_state {raw_state!r}") from None

    raw_archived = row.get("archived_at")
    archived_at = None
    if not _blank(raw_archived):
        try:
            archived_at = parse_timestamp(raw_archived)
        except (TypeError, ValueError) as exc:
            raise _RowProblem(f"bad archived_at: {exc}") from None
        if state is ArchivalState.ACTIVE:
            raise _RowProblem("archived_at on active record")
        if archived_at < created:
            raise _RowProblem("archived before creation")

    creator = row.get("creator_id")
    unit = row.get("org_unit")
    if _blank(creator):
        raise _RowProblem("missing creator_id")
    if _blank(unit):
        raise _RowProblem("missing org_unit")

    parent = row.get("parent_id")
    return RecordEntry(
        record_id=str(rid),
        kind=kind,
        parent_id=None if _blank(parent) else str(parent),
        name=_text(row.get("name")),
        doc_type=sys.intern(_text(row.get("doc_type"))),
        created_at=created,
        last_updated_at=updated,
        creator_id=sys.intern(str(creator)),
        org_unit=sys.intern(str(unit).strip("/")),
        revision_count=revisions,
        archival_state=state,
        archived_at=archived_at,
    )


def _csv_rows(stream: IO[str]):
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        return
    missing = {"record_id", "kind", "created_at", "last_updated_at"} - set(reader.fieldnames)
    if missing:
        raise InputFormatError(f"CSV header lacks required columns: {sorted(missing)}")
    for row in reader:
        if None in row:
            yield reader.line_num, _RowProblem("too many fields")
        else:
            yield reader.line_num, row


def _jsonl_rows(stream: IO[str]):
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            yield lineno, _RowProblem(f"invalid JSON: {exc.msg}")
            continue
        if not isinstance(obj, dict):
            yield lineno, _RowProblem("line is not a JSON object")
            continue
        yield lineno, obj


def _text_stream(source) -> IO[str]:
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def parse_records(source, fmt: str = "csv", max_error_ratio: float = 0.5) -> tuple[list[RecordEntry], list[RowError]]:
    """Parse a CSV or JSONL export into records plus per-row errors.

    ``source`` is a binary stream, raw bytes, or an already-decoded text
    stream.  Malformed rows are reported and skipped; if more than
    ``max_error_ratio`` of the rows are malformed the whole input is rejected
    with :class:`InputFormatError` since it is most likely the wrong file.
    """
    fmt = fmt.lower()
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"unknown format {fmt!r}")
    stream = _text_stream(source)
    rows = _csv_rows(stream) if fmt == "csv" else _jsonl_rows(stream)

    records: list[RecordEntry] = []
    errors: list[RowError] = []
    try:
        for lineno, row in rows:
            if isinstance(row, Exception):
                errors.append(RowError(lineno, str(row)))
                continue
            try:
                records.append(record_from_mapping(row))
            except _RowProblem as exc:
                errors.append(RowError(lineno, str(exc)))
    except UnicodeDecodeError as exc:
        raise InputFormatError(f"input is not UTF-8: {exc}") from exc
    except csv.Error as exc:
        raise InputFormatError(f"unreadable CSV: {exc}") from exc

    total = len(records) + len(errors)
    if total and len(errors) / total > max_error_ratio:
        raise InputFormatError(f"{len(errors)} of {total} rows malformed; first: line {errors[0].line}: {errors[0].reason}")
    return records, errors


def parse_file(path, fmt: str | None = None) -> tuple[list[RecordEntry], list[RowError]]:
    fmt = fmt or guess_format(path)
    with open(path, "rb") as fh:
        return parse_records(fh, fmt)


def guess_format(path) -> str:
    return "jsonl" if str(path).lower().endswith((".jsonl", ".ndjson", ".json")) else "csv"


def _csv_cell(value) -> str:
    return "" if value is None else str(value)


def write_records(records: Iterable[RecordEntry], stream: IO[str], fmt: str = "csv") -> None:
    """Serialize records in the same CSV/JSONL layout :func:`parse_records` reads."""
    if fmt == "csv":
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(FIELDS)
        for rec in records:
            d = rec.to_dict()
            writer.writerow([_csv_cell(d[f]) for f in FIELDS])
    elif fmt == "jsonl":
        for rec in records:
            stream.write(json.dumps(rec.to_dict(), ensure_ascii=False, sort_keys=True))
            stream.write("\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def parse_calendar(source, fmt: str = "csv") -> list[CalendarEvent]:
    """Parse calendar events.  Unlike records, any malformed row is fatal."""
    stream = _text_stream(source)
    if fmt == "csv":
        rows = list(csv.DictReader(stream))
    else:
        rows = [json.loads(line) for line in stream if line.strip()]
    events = []
    for i, row in enumerate(rows, start=1):
        try:
            flag = row.get("requires_documentation")
            if isinstance(flag, str):
                flag = flag.strip().lower() in ("1", "true", "yes", "y")
            events.append(
                CalendarEvent(
                    event_id=str(row["event_id"]),
                    starts_at=parse_timestamp(row["starts_at"]),
                    event_type=_text(row.get("event_type")),
                    organizer_id=str(row["organizer_id"]),
                    org_unit=_text(row.get("org_unit")).strip("/"),
                    requires_documentation=bool(flag),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputFormatError(f"calendar row {i}: {exc}") from exc
    return events


def write_calendar(events: Iterable[CalendarEvent], stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["event_id", "starts_at", "event_type", "organizer_id", "org_unit", "requires_documentation"])
    for ev in events:
        writer.writerow(
            [ev.event_id, format_timestamp(ev.starts_at), ev.event_type, ev.organizer_id, ev.org_unit,
             "true" if ev.requires_documentation else "false"]
        )


# -- index --------------------------------------------------------------------


@dataclass(frozen=True)
class BuildReport:
    parsed: int
    rejected: int
    orphaned: int
    archived_at_approximated: int = 0
    row_errors: tuple[RowError, ...] = ()

    def to_dict(self) -> dict:
        return {
            "counts": {"parsed": self.parsed, "rejected": self.rejected, "orphaned": self.orphaned},
            "approximations": {
                # archive time taken from last_updated_at where archived_at is missing
                "archived_at_from_last_updated": self.archived_at_approximated,
            },
            "row_errors": [{"line": e.line, "reason": e.reason} for e in self.row_errors[:100]],
        }


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class RepositoryIndex:
    """Immutable, query-oriented view over a validated record set.

    Besides the id-addressable mappings, the index carries column arrays
    aligned with :attr:`ids` (records sorted by id) so that detectors and
    indicators can work vectorized over millions of records.
    """

    records: Mapping[str, RecordEntry]
    children: Mapping[str, tuple[str, ...]]
    roots: tuple[str, ...]
    user_timelines: Mapping[str, np.ndarray]
    unit_members: Mapping[str, tuple[str, ...]]
    time_bounds: tuple[int, int] | None
    report: BuildReport

    ids: tuple[str, ...] = field(repr=False)
    position: Mapping[str, int] = field(repr=False)
    created: np.ndarray = field(repr=False)
    updated: np.ndarray = field(repr=False)
    archived_eff: np.ndarray = field(repr=False)
    state: np.ndarray = field(repr=False)
    is_folder: np.ndarray = field(repr=False)
    revisions: np.ndarray = field(repr=False)
    parent: np.ndarray = field(repr=False)
    depth: np.ndarray = field(repr=False)
    activity: np.ndarray = field(repr=False)
    unit_code: np.ndarray = field(repr=False)
    unit_names: tuple[str, ...] = field(repr=False)
    creator_code: np.ndarray = field(repr=False)
    creator_names: tuple[str, ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.ids)

    def get(self, record_id: str) -> RecordEntry:
        return self.records[record_id]

    def known_unit(self, unit: str | None) -> bool:
        return not unit or any(u == unit or u.startswith(unit + "/") for u in self.unit_names)

    def subtree_units(self, unit: str | None) -> list[str]:
        if not unit:
            return list(self.unit_names)
        unit = unit.strip("/")
        return [u for u in self.unit_names if u == unit or u.startswith(unit + "/")]

    def unit_mask(self, unit: str | None) -> np.ndarray:
        """Boolean mask over records in the subtree of ``unit`` (all if None)."""
        if not unit:
            return np.ones(len(self.ids), dtype=bool)
        unit = unit.strip("/")
        codes = [i for i, u in enumerate(self.unit_names) if u == unit or u.startswith(unit + "/")]
        lookup = np.zeros(len(self.unit_names) + 1, dtype=bool)
        lookup[codes] = True
        return lookup[self.unit_code]

    def path(self, record_id: str) -> str:
        """Slash-joined names from the root down to (and including) the record."""
        parts = []
        i = self.position[record_id]
        top = i
        while i >= 0:
            parts.append(self.records[self.ids[i]].name)
            top = i
            i = int(self.parent[i])
        if self.records[self.ids[top]].parent_id is not None:
            parts.append(ORPHAN_ROOT)
        return "/".join(reversed(parts))


def _detect_cycles(by_id: Mapping[str, RecordEntry]) -> list[str]:
    state: dict[str, int] = {}  # 1 = on current chain, 2 = settled
    for start in by_id:
        if start in state:
            continue
        chain = []
        node = start
        while node is not None and node in by_id and node not in state:
            state[node] = 1
            chain.append(node)
            node = by_id[node].parent_id
        if node is not None and state.get(node) == 1:
            cycle = chain[chain.index(node):]
            return cycle
        for n in chain:
            state[n] = 2
    return []


def build_index(records: Sequence[RecordEntry], row_errors: Sequence[RowError] = ()) -> RepositoryIndex:
    """Validate repository-level invariants and build the index.

    Raises :class:`ValidationError` on duplicate ids, parent cycles or parents
    that are documents.  Records whose parent is missing from the export are
    kept and attached under the synthetic ``_orphans`` root.
    """
    counts = Counter(r.record_id for r in records)
    dups = sorted(rid for rid, n in counts.items() if n > 1)
    if dups:
        raise ValidationError(f"duplicate record_id: {dups[:20]}", dups)

    ordered = sorted(records, key=lambda r: r.record_id)
    by_id = {r.record_id: r for r in ordered}

    bad_parents = sorted(
        r.record_id for r in ordered
        if r.parent_id is not None and r.parent_id in by_id and not by_id[r.parent_id].is_folder
    )
    if bad_parents:
        raise ValidationError(f"parent is not a folder for: {bad_parents[:20]}", bad_parents)
    cycle = _detect_cycles(by_id)
    if cycle:
        raise ValidationError(f"parent cycle: {' -> '.join(cycle)}", cycle)

    n = len(ordered)
    ids = tuple(by_id)
    position = {rid: i for i, rid in enumerate(ids)}

    created = np.fromiter((r.created_at for r in ordered), dtype=np.int64, count=n)
    updated = np.fromiter((r.last_updated_at for r in ordered), dtype=np.int64, count=n)
    state = np.fromiter((_STATE_CODES[r.archival_state] for r in ordered), dtype=np.int8, count=n)
    is_folder = np.fromiter((r.kind is Kind.FOLDER for r in ordered), dtype=bool, count=n)
    revisions = np.fromiter((r.revision_count or 0 for r in ordered), dtype=np.int64, count=n)

    explicit_archive = np.fromiter(
        (r.archived_at if r.archived_at is not None else NEVER for r in ordered), dtype=np.int64, count=n
    )
    approximated = (state != 0) & (explicit_archive == NEVER)
    archived_eff = np.where(approximated, updated, explicit_archive)

    parent = np.full(n, -1, dtype=np.int64)
    orphans = []
    for i, r in enumerate(ordered):
        if r.parent_id is None:
            continue
        j = position.get(r.parent_id)
        if j is None:
            orphans.append(r.record_id)
        else:
            parent[i] = j

    depth = np.ones(n, dtype=np.int64)
    cur = parent.copy()
    while True:
        live = cur >= 0
        if not live.any():
            break
        depth += live
        cur[live] = parent[cur[live]]

    # latest modification anywhere in a record's subtree
    activity = updated.copy()
    if n:
        for d in range(int(depth.max()), 1, -1):
            members = np.flatnonzero(depth == d)
            np.maximum.at(activity, parent[members], activity[members])

    unit_lookup: dict[str, int] = {}
    unit_code = np.fromiter((unit_lookup.setdefault(r.org_unit, len(unit_lookup)) for r in ordered), dtype=np.int32, count=n)
    creator_lookup: dict[str, int] = {}
    creator_code = np.fromiter(
        (creator_lookup.setdefault(r.creator_id, len(creator_lookup)) for r in ordered), dtype=np.int32, count=n
    )

    # children and timelines ordered by (created_at, record_id); ids are already id-sorted
    chrono = np.argsort(created, kind="stable")
    children: dict[str, list[str]] = {}
    for i in chrono:
        r = ordered[i]
        if r.parent_id is None:
            continue
        key = r.parent_id if r.parent_id in by_id else ORPHAN_ROOT
        children.setdefault(key, []).append(r.record_id)
    roots = tuple(ids[i] for i in chrono if ordered[i].parent_id is None)

    docs = chrono[~is_folder[chrono]]
    doc_creators = creator_code[docs]
    order = np.argsort(doc_creators, kind="stable")
    sorted_creators = doc_creators[order]
    sorted_times = created[docs][order]
    bounds = np.flatnonzero(np.diff(sorted_creators)) + 1
    creator_names = tuple(creator_lookup)
    timelines = {}
    for chunk_c, chunk_t in zip(np.split(sorted_creators, bounds), np.split(sorted_times, bounds)):
        if len(chunk_c):
            timelines[creator_names[chunk_c[0]]] = _frozen(chunk_t.copy())

    members: dict[str, list[str]] = {}
    for r in ordered:
        members.setdefault(r.org_unit, []).append(r.record_id)

    report = BuildReport(
        parsed=n,
        rejected=len(row_errors),
        orphaned=len(orphans),
        archived_at_approximated=int(approximated.sum()),
        row_errors=tuple(row_errors),
    )
    if orphans:
        logger.warning("%d records reference a missing parent; attached to %s", len(orphans), ORPHAN_ROOT)

    return RepositoryIndex(
        records=MappingProxyType(by_id),
        children=MappingProxyType({k: tuple(v) for k, v in sorted(children.items())}),
        roots=roots,
        user_timelines=MappingProxyType(dict(sorted(timelines.items()))),
        unit_members=MappingProxyType({k: tuple(v) for k, v in sorted(members.items())}),
        time_bounds=(int(created.min()), int(updated.max())) if n else None,
        report=report,
        ids=ids,
        position=MappingProxyType(position),
        created=_frozen(created),
        updated=_frozen(updated),
        archived_eff=_frozen(archived_eff),
        state=_frozen(state),
        is_folder=_frozen(is_folder),
        revisions=_frozen(revisions),
        parent=_frozen(parent),
        depth=_frozen(depth),
        activity=_frozen(activity),
        unit_code=_frozen(unit_code),
        unit_names=tuple(unit_lookup),
        creator_code=_frozen(creator_code),
        creator_names=creator_names,
    )


@dataclass(frozen=True)
class Existence:
    count: int
    ids: frozenset[str]
    unknown_unit: bool = False


def records_existing_at(index: RepositoryIndex, t: int, unit: str | None = None) -> Existence:
    """Records created on or before ``t``, optionally restricted to a unit subtree.

    Deletions are not modelled, so existence is monotone in ``t``.
    """
    if unit and not index.known_unit(unit):
        logger.warning("unknown org unit %r", unit)
        return Existence(0, frozenset(), unknown_unit=True)
    mask = (index.created <= t) & index.unit_mask(unit)
    hits = np.flatnonzero(mask)
    return Existence(len(hits), frozenset(index.ids[i] for i in hits))


def count_existing_at(index: RepositoryIndex, times, unit: str | None = None) -> np.ndarray:
    """Vectorized record counts at each of ``times`` (no id sets)."""
    created = np.sort(index.created[index.unit_mask(unit)])
    return np.searchsorted(created, np.asarray(times, dtype=np.int64), side="right")


# -- index artifact -------------------------------------------------------------

ARTIFACT_TAG = "edms-index"
ARTIFACT_VERSION = 1


def save_index(index: RepositoryIndex, path) -> None:
    """Write the canonical JSONL index artifact: a header line, then records by id."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        header = {"artifact": ARTIFACT_TAG, "version": ARTIFACT_VERSION, "build_report": index.report.to_dict()}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        write_records((index.records[rid] for rid in index.ids), fh, "jsonl")


def load_index(path) -> RepositoryIndex:
    with open(path, "rb") as fh:
        first = fh.readline()
        try:
            header = json.loads(first)
        except json.JSONDecodeError as exc:
            raise InputFormatError(f"{path}: not an index artifact") from exc
        if not isinstance(header, dict) or header.get("artifact") != ARTIFACT_TAG:
            raise InputFormatError(f"{path}: not an index artifact")
        records, errors = parse_records(fh, "jsonl", max_error_ratio=0.0)
    counts = header["build_report"]["counts"]
    rejected = [RowError(e["line"], e["reason"]) for e in header["build_report"].get("row_errors", [])]
    index = build_index(records, rejected)
    if counts["rejected"] != len(rejected):
        # only the first rows' errors are stored; keep the original count
        object.__setattr__(index, "report", BuildReport(
            parsed=index.report.parsed, rejected=counts["rejected"], orphaned=index.report.orphaned,
            archived_at_approximated=index.report.archived_at_approximated, row_errors=tuple(rejected),
        ))
    return index
