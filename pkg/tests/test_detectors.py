import random
from datetime import timedelta

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edms_transparency.core import ArchivalState, CalendarEvent, build_index
from edms_transparency.detectors import (
    DetectionEvent,
    NamingRule,
    RuleConfig,
    RuleId,
    StructureRule,
    detect_abandoned,
    detect_batch_documentation,
    detect_documentation_avoidance,
    detect_noncompliant_structure,
    detect_nonstandard_naming,
    detect_opaque_language,
    naming_violations,
    read_events_jsonl,
    run_all,
    unknown_abbreviations,
    write_events_jsonl,
    write_events_summary_csv,
)

from factories import DAY, T0, doc, folder, random_timeline
from oracles import batch_oracle

DEFAULT = RuleConfig()


def uploads(times, creator="u1", prefix=None, unit="A"):
    prefix = prefix or creator
    return [doc(f"{prefix}-{i:04d}", created=t, creator=creator, unit=unit) for i, t in enumerate(times)]


def batch_sets(events):
    return {frozenset(ev.record_ids) for ev in events}


# -- batch documentation --------------------------------------------------------


def test_fifty_at_one_second():
    events = detect_batch_documentation(build_index(uploads([T0] * 50)))
    assert len(events) == 1
    assert events[0].details["batch_size"] == 50
    assert events[0].occurred_at == T0


def test_fortynine_is_not_a_batch():
    times = [T0 + i for i in range(49)]
    assert detect_batch_documentation(build_index(uploads(times))) == []


def test_gap_splits_batches():
    first = [T0 + i for i in range(50)]
    second = [first[-1] + 31 * 60 + i for i in range(50)]
    events = detect_batch_documentation(build_index(uploads(first + second)))
    assert [e.details["batch_size"] for e in events] == [50, 50]


def test_exact_gap_starts_new_session():
    # a pause of exactly the gap length already separates sessions
    first = [T0] * 50
    second = [T0 + 1800] * 50
    assert len(detect_batch_documentation(build_index(uploads(first + second)))) == 2
    joined = [T0] * 50 + [T0 + 1799] * 50
    events = detect_batch_documentation(build_index(uploads(joined)))
    assert len(events) == 1 and events[0].details["batch_size"] == 100


def test_window_is_closed():
    # 50 uploads spanning exactly 30 minutes qualify, 30 min + 1 s do not
    times = [T0 + round(i * 1800 / 49) for i in range(50)]
    assert len(detect_batch_documentation(build_index(uploads(times)))) == 1
    slow = [T0 + round(i * 1801 / 49) for i in range(50)]
    cfg = DEFAULT.override(batch_gap=timedelta(hours=2))
    assert detect_batch_documentation(build_index(uploads(slow)), cfg) == []


def test_session_members_all_included():
    lead = [T0 + 600 * i for i in range(3)]  # slow trickle, gaps < 30 min
    burst = [lead[-1] + 60] * 50
    events = detect_batch_documentation(build_index(uploads(lead + burst)))
    assert len(events) == 1 and events[0].details["batch_size"] == 53
    assert events[0].occurred_at == T0


def test_users_are_separate():
    recs = uploads([T0] * 30, "u1") + uploads([T0] * 30, "u2")
    assert detect_batch_documentation(build_index(recs)) == []


def test_folders_are_not_uploads():
    recs = [folder(f"f{i}", created=T0) for i in range(60)]
    assert detect_batch_documentation(build_index(recs)) == []


def test_modal_unit_and_tie_break():
    recs = uploads([T0] * 25, unit="B", prefix="x") + uploads([T0] * 25, unit="A", prefix="y")
    (ev,) = detect_batch_documentation(build_index(recs))
    assert ev.org_unit == "A"


def test_oracle_sample():
    rng = np.random.default_rng(11)
    records, expected = [], set()
    for u in range(150):
        times = random_timeline(rng, 200)
        recs = uploads(times, f"u{u:04d}")
        records += recs
        expected |= batch_oracle([(r.created_at, r.record_id) for r in recs], 50, 1800, 1800)
    got = batch_sets(detect_batch_documentation(build_index(records)))
    assert expected  # the sample must exercise the positive case
    assert got == expected


small_cfgs = st.builds(
    lambda m, w, g: RuleConfig(batch_min_docs=m, batch_window=timedelta(seconds=w), batch_gap=timedelta(seconds=g)),
    st.integers(2, 8), st.integers(1, 120), st.integers(1, 120),
)
timelines = st.lists(st.lists(st.integers(0, 400), min_size=1, max_size=40), min_size=1, max_size=4)


def _records(timeline_list):
    recs = []
    for u, gaps in enumerate(timeline_list):
        recs += uploads(list(np.cumsum(gaps) + T0), f"u{u}")
    return recs


@settings(max_examples=150, deadline=None)
@given(timelines, small_cfgs)
def test_matches_oracle(tls, cfg):
    recs = _records(tls)
    expected = set()
    for u in range(len(tls)):
        mine = [(r.created_at, r.record_id) for r in recs if r.creator_id == f"u{u}"]
        expected |= batch_oracle(mine, cfg.batch_min_docs, int(cfg.batch_window.total_seconds()),
                                 int(cfg.batch_gap.total_seconds()))
    assert batch_sets(detect_batch_documentation(build_index(recs), cfg)) == expected


@settings(max_examples=100, deadline=None)
@given(timelines, small_cfgs)
def test_batch_invariants(tls, cfg):
    idx = build_index(_records(tls))
    events = detect_batch_documentation(idx, cfg)
    seen = [r for ev in events for r in ev.record_ids]
    assert len(seen) == len(set(seen))
    window = int(cfg.batch_window.total_seconds())
    for ev in events:
        t = np.sort([idx.records[r].created_at for r in ev.record_ids])
        best = max(np.searchsorted(t, x + window, side="right") - i for i, x in enumerate(t))
        assert best >= cfg.batch_min_docs
        assert ev.details["max_docs_in_window"] == best
    higher = detect_batch_documentation(idx, cfg.override(batch_min_docs=cfg.batch_min_docs + 1))
    assert len(higher) <= len(events)
    assert detect_batch_documentation(idx, cfg) == events


# -- abandonment ----------------------------------------------------------------


def at(text):
    from edms_transparency.core import parse_timestamp

    return parse_timestamp(text)


def test_one_year_idle_is_abandoned():
    idx = build_index([doc("d", created=at("2020-01-01T00:00:00Z"))])
    (ev,) = detect_abandoned(idx, DEFAULT, at("2021-01-02T00:00:00Z"))
    assert ev.record_ids == ("d",) and ev.rule_id is RuleId.ABANDONED_DOCUMENTATION


def test_archived_is_not_abandoned():
    idx = build_index([doc("d", created=at("2020-01-01T00:00:00Z"), state=ArchivalState.ARCHIVED,
                           archived_at=at("2020-06-01T00:00:00Z"))])
    assert detect_abandoned(idx, DEFAULT, at("2021-01-02T00:00:00Z")) == []


def test_abandoned_then_archived():
    c = at("2020-01-01T00:00:00Z")
    t = c + 366 * DAY
    live = build_index([doc("d", created=c)])
    archived = build_index([doc("d", created=c, state=ArchivalState.ARCHIVED, archived_at=t + 1)])
    assert len(detect_abandoned(live, DEFAULT, t)) == 1
    assert len(detect_abandoned(archived, DEFAULT, t)) == 1
    assert detect_abandoned(archived, DEFAULT, t + 2) == []


def test_period_boundary_is_strict():
    idx = build_index([doc("d", created=T0)])
    assert detect_abandoned(idx, DEFAULT, T0 + 365 * DAY) == []
    assert len(detect_abandoned(idx, DEFAULT, T0 + 365 * DAY + 1)) == 1


def test_before_creation_nothing():
    idx = build_index([doc("d", created=T0)])
    assert detect_abandoned(idx, DEFAULT, T0 - 1) == []


def test_folder_kept_alive_by_descendants():
    recs = [
        folder("f", created=T0),
        folder("g", created=T0, parent="f"),
        doc("d", created=T0 + 400 * DAY, updated=T0 + 450 * DAY, parent="g"),
    ]
    idx = build_index(recs)
    # before the descendant exists, the folders are idle on their own
    assert {ev.record_ids[0] for ev in detect_abandoned(idx, DEFAULT, T0 + 390 * DAY)} == {"f", "g"}
    assert detect_abandoned(idx, DEFAULT, T0 + 500 * DAY) == []
    assert {ev.record_ids[0] for ev in detect_abandoned(idx, DEFAULT, T0 + 900 * DAY)} == {"f", "g", "d"}


def test_folder_activity_ignores_future_descendants():
    recs = [folder("f", created=T0), doc("d", created=T0 + 400 * DAY, parent="f")]
    idx = build_index(recs)
    assert {e.record_ids[0] for e in detect_abandoned(idx, DEFAULT, T0 + 380 * DAY)} == {"f"}


def _abandoned_scan(records, period, t):
    """Reference: walk each record's subtree by parent links."""
    by_id = {r.record_id: r for r in records}

    def under(r, f):
        p = r.parent_id
        while p is not None and p in by_id:
            if p == f:
                return True
            p = by_id[p].parent_id
        return False

    out = set()
    for r in records:
        if r.created_at > t:
            continue
        if r.archival_state is not ArchivalState.ACTIVE:
            eff = r.archived_at if r.archived_at is not None else r.last_updated_at
            if eff <= t:
                continue
        last = r.last_updated_at
        if r.is_folder:
            for o in records:
                if o.created_at <= t and under(o, r.record_id):
                    last = max(last, o.last_updated_at)
        if t - last > period:
            out.add(r.record_id)
    return out


def test_abandoned_matches_scan():
    rng = random.Random(5)
    for trial in range(20):
        recs = []
        for i in range(80):
            parents = [r.record_id for r in recs if r.is_folder]
            parent = rng.choice(parents) if parents and rng.random() < 0.8 else None
            c = T0 + rng.randrange(0, 800 * DAY)
            u = c + rng.choice([0, rng.randrange(0, 400 * DAY)])
            state = rng.choice(list(ArchivalState))
            arch = None
            if state is not ArchivalState.ACTIVE and rng.random() < 0.5:
                arch = u + rng.randrange(0, 300 * DAY)
            if rng.random() < 0.3:
                recs.append(folder(f"f{trial}-{i}", created=c, updated=u, parent=parent, state=state, archived_at=arch))
            else:
                recs.append(doc(f"d{trial}-{i}", created=c, updated=u, parent=parent, state=state, archived_at=arch))
        idx = build_index(recs)
        for t in (T0 + 300 * DAY, T0 + 700 * DAY, T0 + 1500 * DAY):
            got = {ev.record_ids[0] for ev in detect_abandoned(idx, DEFAULT, t)}
            assert got == _abandoned_scan(recs, 365 * DAY, t)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 1000 * DAY), st.integers(0, 1000 * DAY), st.integers(0, 600 * DAY))
def test_abandonment_persists_until_touched(created_off, t_off, later):
    c = T0 + created_off
    idx = build_index([doc("d", created=c), folder("f", created=c)])
    t = T0 + t_off
    now = {e.record_ids[0] for e in detect_abandoned(idx, DEFAULT, t)}
    after = {e.record_ids[0] for e in detect_abandoned(idx, DEFAULT, t + later)}
    assert now <= after


# -- structure -------------------------------------------------------------------


def test_catch_all_folder():
    recs = [folder("f")] + [doc(f"d{i:04d}", parent="f") for i in range(1001)]
    cfg = RuleConfig(structure_rules=(StructureRule("max_docs_per_folder", 1000),))
    events = detect_noncompliant_structure(build_index(recs), cfg)
    assert len(events) == 1001
    assert all(ev.details["predicates"] == ["catch-all"] for ev in events)
    ok = RuleConfig(structure_rules=(StructureRule("max_docs_per_folder", 1001),))
    assert detect_noncompliant_structure(build_index(recs), ok) == []


def test_empty_structure_rules_warn(caplog):
    assert detect_noncompliant_structure(build_index([doc("d")]), DEFAULT) == []
    assert "structure rule set empty" in caplog.text


def test_max_depth():
    recs = [folder("f1")] + [folder(f"f{i}", parent=f"f{i - 1}") for i in range(2, 7)] + [doc("d", parent="f6")]
    cfg = RuleConfig(structure_rules=(StructureRule("max_depth", 6),))
    events = detect_noncompliant_structure(build_index(recs), cfg)
    assert [ev.record_ids for ev in events] == [("d",)]
    assert events[0].details["depth"] == 7


def test_forbidden_and_placement():
    recs = [
        folder("root", name="Policy"),
        folder("tmp", name="Temp stuff", parent="root"),
        folder("sub", name="Deep", parent="tmp"),
        doc("a", parent="sub"),
        doc("b", parent="root", doc_type="minutes"),
        folder("mins", name="Minutes", parent="root"),
        doc("c", parent="mins", doc_type="minutes"),
    ]
    cfg = RuleConfig(structure_rules=(StructureRule("forbidden_folder", "^Temp"),
                                      StructureRule("placement", "/Minutes$", doc_type="minutes")))
    got = {ev.record_ids[0]: ev.details["predicates"] for ev in detect_noncompliant_structure(build_index(recs), cfg)}
    assert got == {"a": ["forbidden_location"], "b": ["placement"]}


# -- naming -----------------------------------------------------------------------

TWO_WORDS = (NamingRule("min_words", 2),)


def test_year_only_name_fails():
    assert naming_violations("2013", False, TWO_WORDS) == ["min_words:2"]
    assert naming_violations("Afsluitdijk maintenance 2024", False, TWO_WORDS) == []
    assert naming_violations("", False, TWO_WORDS) == ["empty"]
    assert naming_violations("  ", True, (NamingRule("regex", "x", "Folder"),)) == ["empty"]


def test_naming_events():
    recs = [doc("a", name="2013"), doc("b", name="Afsluitdijk maintenance 2024"), doc("c", name="")]
    events = detect_nonstandard_naming(build_index(recs), RuleConfig(naming_rules=TWO_WORDS))
    assert [e.record_ids[0] for e in events] == ["a", "c"]


def test_naming_rule_kinds():
    rules = (NamingRule("min_length", 5), NamingRule("regex", r"\d{4}"), NamingRule("required_token", "dossier", "Folder"))
    assert naming_violations("Dossier 2020", True, rules) == []
    assert naming_violations("abc", True, rules) == ["min_length:5", "regex:\\d{4}", "required_token:dossier"]
    assert naming_violations("abc", False, rules) == ["min_length:5", "regex:\\d{4}"]


# -- opaque language ----------------------------------------------------------------


def test_abbreviation_examples():
    idx = build_index([doc("a", name="Report on ABC")])
    (ev,) = detect_opaque_language(idx, DEFAULT)
    assert ev.details["tokens"] == ["ABC"]
    assert detect_opaque_language(idx, RuleConfig(approved_abbreviations=frozenset({"ABC"}))) == []


def test_three_unknown_acronyms():
    text = "The DG asked RWS and the MinFin team about NATO-ABC plans; ok, A and TOOLONGX stay out. EU"
    cfg = RuleConfig(approved_abbreviations=frozenset({"EU", "NATO"}))
    # hand-enumerated: tokens of 2-6 uppercase letters not approved
    assert unknown_abbreviations(text, cfg) == ["DG", "RWS", "ABC"]
    idx = build_index([doc("x", name="n")])
    (ev,) = detect_opaque_language(idx, cfg, texts={"x": text, "missing": "XYZ"})
    assert ev.details["tokens"] == ["DG", "RWS", "ABC"]


# -- documentation avoidance --------------------------------------------------------


def meeting(eid, start, organizer="u1", unit="A", flag=True):
    return CalendarEvent(eid, start, "meeting", organizer, unit, flag)


def test_meeting_without_documents():
    idx = build_index([doc("d", creator="someone-else")])
    (ev,) = detect_documentation_avoidance(idx, DEFAULT, [meeting("m", T0)])
    assert ev.record_ids == () and ev.details["event_id"] == "m"


def test_meeting_with_document_next_day():
    idx = build_index([doc("d", created=T0 + DAY)])
    assert detect_documentation_avoidance(idx, DEFAULT, [meeting("m", T0)]) == []


def test_no_calendar_skips():
    assert detect_documentation_avoidance(build_index([doc("d")]), DEFAULT, None) == []


def test_unflagged_meeting_ignored():
    assert detect_documentation_avoidance(build_index([doc("d", creator="x")]), DEFAULT, [meeting("m", T0, flag=False)]) == []


@pytest.mark.parametrize("link_by", ["organizer", "unit"])
def test_avoidance_cross_join(link_by):
    rng = random.Random(8)
    cfg = RuleConfig(calendar_link_by=link_by)
    window = 14 * DAY
    for layout in range(10):
        users = ["u1", "u2", "u3"]
        units = ["A", "A/B", "C"]
        recs = [doc(f"L{layout}-{i}", created=T0 + rng.randrange(0, 90 * DAY), creator=rng.choice(users),
                    unit=rng.choice(units)) for i in range(rng.randrange(0, 25))]
        cal = [meeting(f"e{k}", T0 + rng.randrange(0, 90 * DAY), rng.choice(users), rng.choice(units), rng.random() < 0.8)
               for k in range(15)]
        expected = set()
        for ev in cal:
            if not ev.requires_documentation:
                continue
            linked = [
                r for r in recs
                if ev.starts_at <= r.created_at <= ev.starts_at + window
                and (r.creator_id == ev.organizer_id if link_by == "organizer"
                     else r.org_unit == ev.org_unit or r.org_unit.startswith(ev.org_unit + "/"))
            ]
            if not linked:
                expected.add(ev.event_id)
        idx = build_index(recs) if recs else build_index([doc("pad", creator="nobody", unit="Z", created=T0 - 99 * DAY)])
        got = {e.details["event_id"] for e in detect_documentation_avoidance(idx, cfg, cal)}
        assert got == expected


# -- plumbing -----------------------------------------------------------------------


def test_run_all_order_and_io(tmp_path):
    recs = uploads([T0] * 50) + [doc("z", created=T0 - 400 * DAY, creator="u9", name="ABC")]
    idx = build_index(recs)
    events = run_all(idx, DEFAULT, calendar=[meeting("m", T0 - 500 * DAY, organizer="u7")])
    assert [e.rule_id.value for e in events] == ["I1_1", "I3_1", "I4_1", "I4_2"]
    assert events == run_all(idx, DEFAULT, calendar=[meeting("m", T0 - 500 * DAY, organizer="u7")])
    path = tmp_path / "ev.jsonl"
    with open(path, "w") as fh:
        write_events_jsonl(events, fh)
    with open(path) as fh:
        back = read_events_jsonl(fh)
    assert [e.to_dict() for e in back] == [e.to_dict() for e in events]
    import io

    buf = io.StringIO()
    write_events_summary_csv(events, buf)
    assert buf.getvalue().splitlines()[0] == "rule_id,org_unit,events,records"
    assert "I4_1,A,1,50" in buf.getvalue()


def test_rule_filter():
    idx = build_index(uploads([T0] * 50))
    assert {e.rule_id for e in run_all(idx, DEFAULT, rules=[RuleId.ABANDONED_DOCUMENTATION])} <= {RuleId.ABANDONED_DOCUMENTATION}


def test_config_mapping_roundtrip(tmp_path):
    cfg = RuleConfig(
        batch_min_docs=40, batch_window=timedelta(minutes=20), approved_abbreviations=frozenset({"EU"}),
        naming_rules=TWO_WORDS, structure_rules=(StructureRule("placement", "x", "memo"),),
    )
    assert RuleConfig.from_mapping(cfg.to_mapping()) == cfg
    with pytest.raises(ValueError):
        RuleConfig.from_mapping({"batch_size": 3})
    with pytest.raises(ValueError):
        RuleConfig(batch_min_docs=1)


def test_event_dict_roundtrip():
    ev = DetectionEvent(RuleId.BATCH_DOCUMENTATION, ("a", "b"), "u", "A", T0, {"batch_size": 2})
    assert DetectionEvent.from_dict(ev.to_dict()) == ev
