"""
Spotting batch uploads
======================

One user uploads a trickle of documents over a morning, then dumps a
backlog of sixty files in twenty minutes.  The detector reports the dump as
one batch and leaves the trickle alone.
"""

from datetime import timedelta

from edms_transparency import ArchivalState, Kind, RecordEntry, RuleConfig, build_index
from edms_transparency.core import format_timestamp, parse_timestamp
from edms_transparency.detectors import detect_batch_documentation

start = parse_timestamp("2023-03-06T08:00:00Z")


def upload(i, t, creator="u-alice"):
    return RecordEntry(f"doc{i:03d}", Kind.DOCUMENT, None, f"Minutes meeting {i}", "minutes", t, t,
                       creator, "Water/North", 1, ArchivalState.ACTIVE)


# %%
# A trickle: one document every 45 minutes, always separated by more than
# the 30-minute gap, so every upload is its own session.
trickle = [upload(i, start + i * 45 * 60) for i in range(6)]

# %%
# The backlog: 60 documents twenty seconds apart, starting at 14:00.
dump_start = parse_timestamp("2023-03-06T14:00:00Z")
backlog = [upload(100 + i, dump_start + 20 * i) for i in range(60)]

index = build_index(trickle + backlog)
events = detect_batch_documentation(index, RuleConfig())
for ev in events:
    print(ev.rule_id.value, ev.creator_id, format_timestamp(ev.occurred_at), ev.details)

# %%
# Thresholds are configuration.  Demanding 100 documents makes the backlog
# ordinary; tightening the window to five minutes keeps it a batch since
# fifteen of its uploads still fit in any five-minute stretch.
print(len(detect_batch_documentation(index, RuleConfig(batch_min_docs=100))))
print(len(detect_batch_documentation(index, RuleConfig(batch_min_docs=15, batch_window=timedelta(minutes=5)))))
