"""Event-log loading, validation, and saving.

A corpus file is JSONL, one event per line. Loading drops byte-identical
duplicate lines (real exports contain retries), sorts events stably by
timestamp, and verifies the structural invariants: every diff has exactly
one DiffPublished and it precedes every other event for that diff.
"""

from __future__ import annotations

import logging
from pathlib import Path

from .errors import DuplicatePublish, OrphanEvent
from .events import EventLog, ReviewEvent, parse_event_line, serialize_log

log = logging.getLogger(__name__)


def sort_events(events: list[ReviewEvent]) -> list[ReviewEvent]:
    """Stable sort by timestamp, preserving input order within a tie."""
    return sorted(events, key=lambda ev: ev.ts)


def validate_events(events: list[ReviewEvent], line_nos: list[int] | None = None) -> None:
    """Check publish-first invariants on an already ts-sorted event list.

    Raises DuplicatePublish if a diff is published twice and OrphanEvent if
    any diff's earliest event is not its DiffPublished.
    """
    published: set[str] = set()
    for i, ev in enumerate(events):
        if ev.diff_id is None:
            continue
        where = f"line {line_nos[i]}" if line_nos is not None else f"event {i}"
        if ev.kind == "DiffPublished":
            if ev.diff_id in published:
                raise DuplicatePublish(f"{where}: diff {ev.diff_id!r} published twice")
            published.add(ev.diff_id)
        elif ev.diff_id not in published:
            raise OrphanEvent(
                f"{where}: {ev.kind} for diff {ev.diff_id!r} precedes its DiffPublished"
            )


def build_log(events: list[ReviewEvent]) -> EventLog:
    """Sort and validate in-memory events into an EventLog."""
    ordered = sort_events(events)
    validate_events(ordered)
    return EventLog(tuple(ordered))


def load_corpus(path: str | Path) -> tuple[EventLog, int]:
    """Load and validate a JSONL corpus.

    Returns the validated log and the count of dropped duplicate lines
    (identical byte content anywhere in the file).
    """
    seen: set[str] = set()
    events: list[ReviewEvent] = []
    line_nos: list[int] = []
    dropped = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            if line in seen:
                dropped += 1
                continue
            seen.add(line)
            events.append(parse_event_line(line, line_no))
            line_nos.append(line_no)
    if dropped:
        log.warning("dropped %d duplicate line(s) from %s", dropped, path)

    order = sorted(range(len(events)), key=lambda i: events[i].ts)
    ordered = [events[i] for i in order]
    ordered_lines = [line_nos[i] for i in order]
    validate_events(ordered, ordered_lines)
    return EventLog(tuple(ordered)), dropped


def save_corpus(log_: EventLog, path: str | Path) -> None:
    Path(path).write_text(serialize_log(log_), encoding="utf-8")
