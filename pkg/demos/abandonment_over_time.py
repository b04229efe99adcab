"""
Abandoned records, measured over time
=====================================

Abandonment is a state, not an event: a record is abandoned at a given
moment when it has been neither modified nor archived for a year.  This
demo samples the state at each month end and shows how archiving clears it.
"""

from edms_transparency import ArchivalState, Kind, RecordEntry, RuleConfig, build_index
from edms_transparency.core import parse_timestamp
from edms_transparency.detectors import detect_abandoned
from edms_transparency.monitor import Granularity, abandoned_series

DAY = 86400
t0 = parse_timestamp("2019-01-15T00:00:00Z")


def rec(rid, kind, parent=None, created=t0, updated=None, state=ArchivalState.ACTIVE, archived_at=None):
    return RecordEntry(rid, kind, parent, rid, "" if kind is Kind.FOLDER else "report", created,
                       updated or created, "u-bob", "Roads", None if kind is Kind.FOLDER else 2, state, archived_at)


records = [
    rec("project", Kind.FOLDER),
    rec("plan.docx", Kind.DOCUMENT, "project"),
    # a late addition keeps the folder alive until a year after it
    rec("evaluation.docx", Kind.DOCUMENT, "project", created=t0 + 200 * DAY),
    # archived eighteen months in: abandoned for a while, then cleared
    rec("permit.pdf", Kind.DOCUMENT, created=t0, state=ArchivalState.ARCHIVED, archived_at=t0 + 540 * DAY),
]
index = build_index(records)
cfg = RuleConfig()

for days in (300, 400, 560, 600):
    t = t0 + days * DAY
    print(days, sorted(ev.record_ids[0] for ev in detect_abandoned(index, cfg, t)))

# %%
# The monitor samples the same state at the last second of every bucket.
series = abandoned_series(index, cfg, Granularity.MONTHLY)
for point in series.points[10:20]:
    print(point.bucket_start, point.value)
