"""Transparency anti-pattern detection over EDMS metadata exports."""

from .core import (
    ArchivalState,
    CalendarEvent,
    Kind,
    RecordEntry,
    RepositoryIndex,
    build_index,
    parse_records,
    records_existing_at,
)
from .detectors import DetectionEvent, RuleConfig, RuleId

__version__ = "0.1.0"

__all__ = [
    "ArchivalState",
    "CalendarEvent",
    "DetectionEvent",
    "Kind",
    "RecordEntry",
    "RepositoryIndex",
    "RuleConfig",
    "RuleId",
    "build_index",
    "parse_records",
    "records_existing_at",
]
