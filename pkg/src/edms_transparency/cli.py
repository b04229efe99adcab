"""Command-line pipeline: generate -> ingest -> detect -> monitor -> report.

Exit codes: 0 ok, 1 unreadable input or bad file format, 2 repository
validation failure (duplicate ids, parent cycles), 3 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import timedelta
from pathlib import Path

from . import core, monitor
from .detectors import (
    RuleConfig,
    RuleId,
    read_events_jsonl,
    run_all,
    write_events_jsonl,
    write_events_summary_csv,
)
from .indicators import IndicatorId
from .report import write_report
from .synth import GenerationError, GeneratorSpec, generate

EXIT_OK, EXIT_INPUT, EXIT_VALIDATION, EXIT_USAGE = 0, 1, 2, 3

log = logging.getLogger("edms_transparency")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv_list(text: str | None) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()] if text else []


def _load_config(args) -> RuleConfig:
    cfg = RuleConfig.load(args.config) if getattr(args, "config", None) else RuleConfig()

    def minutes(v):
        return None if v is None else timedelta(minutes=v)

    def days(v):
        return None if v is None else timedelta(days=v)

    return cfg.override(
        batch_min_docs=getattr(args, "batch_min_docs", None),
        batch_window=minutes(getattr(args, "batch_window_minutes", None)),
        batch_gap=minutes(getattr(args, "batch_gap_minutes", None)),
        abandonment_period=days(getattr(args, "abandonment_days", None)),
        calendar_link_window=days(getattr(args, "calendar_link_days", None)),
    )


def _out(args) -> str | None:
    return getattr(args, "out", None)


def _fmt(args, default: str) -> str:
    return (getattr(args, "format", None) or default).lower()


# -- commands ----------------------------------------------------------------


def cmd_ingest(args) -> int:
    fmt = _fmt(args, "auto")
    records, errors = [], []
    for path in args.paths:
        recs, errs = core.parse_file(path, None if fmt == "auto" else fmt)
        records += recs
        errors += errs
    index = core.build_index(records, errors)
    out = Path(_out(args) or "index.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    core.save_index(index, out)
    report = index.report.to_dict()
    out.with_name(out.stem + ".report.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    print(json.dumps(report["counts"], sort_keys=True))
    return EXIT_OK


def _parse_rules(text: str | None) -> list[RuleId] | None:
    if not text:
        return None
    try:
        return [RuleId(r) for r in _csv_list(text)]
    except ValueError as exc:
        raise UsageError(f"unknown rule id in {text!r}; choose from {[r.value for r in RuleId]}") from exc


def cmd_detect(args) -> int:
    rules = _parse_rules(args.rules)
    cfg = _load_config(args)
    index = core.load_index(args.index)
    calendar = None
    if args.calendar:
        with open(args.calendar, "rb") as fh:
            calendar = core.parse_calendar(fh, core.guess_format(args.calendar))
    texts = None
    if args.texts:
        with open(args.texts, encoding="utf-8") as fh:
            texts = json.load(fh)
    t = core.parse_timestamp(args.at) if args.at else None
    events = run_all(index, cfg, t=t, rules=rules, calendar=calendar, texts=texts)

    fmt = _fmt(args, "jsonl")
    out = Path(_out(args) or ("events.jsonl" if fmt == "jsonl" else "events_summary.csv"))
    out.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "jsonl":
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            write_events_jsonl(events, fh)
        summary = out.with_name(out.stem + "_summary.csv")
    elif fmt == "csv":
        summary = out
    else:
        raise UsageError(f"detect writes jsonl or csv, not {fmt!r}")
    with open(summary, "w", encoding="utf-8", newline="") as fh:
        write_events_summary_csv(events, fh)
    log.info("%d events written", len(events))
    return EXIT_OK


def cmd_monitor(args) -> int:
    try:
        granularity = monitor.Granularity(args.granularity)
        base = monitor.Granularity(args.base_granularity)
        indicators = [IndicatorId(i) for i in _csv_list(args.indicators)]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.reduce not in ("sum", "mean"):
        raise UsageError("--reduce must be sum or mean")
    cfg = _load_config(args)
    index = core.load_index(args.index)
    events = []
    if args.events:
        with open(args.events, encoding="utf-8") as fh:
            events = read_events_jsonl(fh)
    units: list[str | None] = [None]
    for u in _csv_list(args.units):
        if u == monitor.ALL_UNITS:
            continue
        if not index.known_unit(u):
            log.warning("unknown org unit %r", u)
        units.append(u)

    counted = [ev for ev in events if ev.rule_id is not RuleId.ABANDONED_DOCUMENTATION]
    step = base if args.reduce == "mean" else granularity
    series = monitor.monitor_events(
        index, counted, step, units, args.normalize, cfg, include_abandoned=not args.no_abandoned
    )
    if step is not granularity:
        series = [monitor.resample(s, granularity, "mean" if s.kind == "count" else None) for s in series]
    for indicator in indicators:
        for unit in units:
            series.append(monitor.bucket_indicator(index, indicator, granularity, unit, cfg=cfg, batches=counted))

    fmt = _fmt(args, "csv")
    out = Path(_out(args) or f"series.{fmt}")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        if fmt == "csv":
            monitor.write_series_csv(series, fh)
        elif fmt == "json":
            monitor.write_series_json(series, fh)
        else:
            raise UsageError(f"monitor writes csv or json, not {fmt!r}")
    return EXIT_OK


def _read_series(path: str) -> list[monitor.MetricSeries]:
    with open(path, encoding="utf-8") as fh:
        if path.endswith(".json"):
            return monitor.series_from_json(json.load(fh))
        return monitor.read_series_csv(fh)


def cmd_report(args) -> int:
    series = []
    for path in args.series:
        try:
            series += _read_series(path)
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            raise core.InputFormatError(f"{path}: {exc}") from exc
    written = write_report(series, _out(args) or "report")
    for path in written:
        print(path)
    return EXIT_OK


def cmd_generate(args) -> int:
    spec = GeneratorSpec.load(args.spec)
    cfg = _load_config(args)
    records, calendar, truth = generate(spec, cfg)
    out = Path(_out(args) or "corpus")
    out.mkdir(parents=True, exist_ok=True)
    fmt = _fmt(args, "csv")
    if fmt not in ("csv", "jsonl"):
        raise UsageError(f"generate writes csv or jsonl, not {fmt!r}")
    with open(out / f"records.{fmt}", "w", encoding="utf-8", newline="") as fh:
        core.write_records(records, fh, fmt)
    with open(out / "calendar.csv", "w", encoding="utf-8", newline="") as fh:
        core.write_calendar(calendar, fh)
    (out / "truth.json").write_text(json.dumps(truth.to_dict(), indent=1, sort_keys=True) + "\n")
    print(json.dumps({"records": len(records), "calendar_events": len(calendar)}, sort_keys=True))
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="rule configuration JSON file")
    common.add_argument("--format", default=argparse.SUPPRESS, help="input/output format for the command")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output file or directory")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return common


def _threshold_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--batch-min-docs", type=int)
    p.add_argument("--batch-window-minutes", type=float)
    p.add_argument("--batch-gap-minutes", type=float)
    p.add_argument("--abandonment-days", type=float)
    p.add_argument("--calendar-link-days", type=float)


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="edms-transparency", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", parents=[common], help="parse exports and build the index artifact")
    p.add_argument("paths", nargs="+")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("detect", parents=[common], help="run detection rules on an index artifact")
    p.add_argument("index")
    p.add_argument("--rules", help="comma-separated rule ids, e.g. I4_1,I4_2")
    p.add_argument("--at", help="measurement time for state rules (default: end of data)")
    p.add_argument("--calendar", help="calendar events CSV/JSONL (enables I1_1)")
    p.add_argument("--texts", help="JSON object record_id -> full text (for I3_1)")
    _threshold_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("monitor", parents=[common], help="bucket events and indicators into series")
    p.add_argument("index")
    p.add_argument("--events", help="events JSONL from detect")
    p.add_argument("--granularity", default="yearly")
    p.add_argument("--base-granularity", default="monthly", help="finer buckets averaged when --reduce mean")
    p.add_argument("--units", help="comma-separated org units (whole organization always included)")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--reduce", default="sum")
    p.add_argument("--indicators", help="comma-separated indicator ids")
    p.add_argument("--no-abandoned", action="store_true", help="skip sampling abandonment per bucket")
    _threshold_flags(p)
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("report", parents=[common], help="render series files as SVG + HTML")
    p.add_argument("series", nargs="+")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("generate", parents=[common], help="generate a synthetic corpus with ground truth")
    p.add_argument("spec")
    _threshold_flags(p)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except core.ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (core.InputFormatError, OSError, GenerationError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
