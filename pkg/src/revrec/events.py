"""Review-event data model and JSONL (de)serialization.

One event is one timestamped fact about a diff or an engineer. The on-disk
format is UTF-8 JSONL, one event object per line, with the field names used
here verbatim: ``kind``, ``ts``, ``diff_id``, ``engineer``, ``files``,
``assigned_reviewers``, ``assigned_groups``, ``via``, ``act``,
``duration_s``. Timestamps are integer epoch seconds UTC.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import MalformedLine, MissingField, UnknownKind

KINDS = (
    "DiffPublished",
    "ReviewerAssigned",
    "Comment",
    "Action",
    "ViewSession",
    "DiffUpdated",
    "DiffClosed",
    "Meeting",
)

ACTS = ("accept", "reject", "resign")
VIAS = ("author", "group", "recommender")

# Action kinds that count as performing a review. Resigning is a refusal,
# not a review, so it never marks a realized reviewer.
REVIEW_ACTS = ("accept", "reject")


@dataclass(frozen=True, slots=True)
class ReviewEvent:
    """A single review-process event.

    Payload fields not applicable to ``kind`` are None. ``engineer`` is the
    diff author for DiffPublished and the acting engineer otherwise.
    """

    kind: str
    ts: int
    engineer: str
    diff_id: str | None = None
    files: tuple[str, ...] | None = None
    assigned_reviewers: tuple[str, ...] | None = None
    assigned_groups: tuple[str, ...] | None = None
    via: str | None = None
    act: str | None = None
    duration_s: int | None = None


@dataclass(frozen=True)
class EventLog:
    """Events sorted stably by timestamp."""

    events: tuple[ReviewEvent, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)


def _need(obj: dict, name: str, line_no: int | None = None):
    if name not in obj:
        raise MissingField(_at(f"missing field {name!r}", line_no))
    return obj[name]


def _at(msg: str, line_no: int | None) -> str:
    return msg if line_no is None else f"line {line_no}: {msg}"


def _as_ts(value, line_no) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise MalformedLine(_at(f"ts must be a non-negative integer, got {value!r}", line_no))
    return value


def _as_id(value, name: str, line_no) -> str:
    if not isinstance(value, str) or not value:
        raise MalformedLine(_at(f"{name} must be a non-empty string, got {value!r}", line_no))
    return value


def _as_duration(value, line_no) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
        raise MalformedLine(_at(f"duration_s must be a positive integer, got {value!r}", line_no))
    return value


def _as_str_list(value, name: str, line_no) -> tuple[str, ...]:
    if not isinstance(value, list) or any(not isinstance(x, str) or not x for x in value):
        raise MalformedLine(_at(f"{name} must be a list of non-empty strings", line_no))
    return tuple(value)


def parse_event_obj(obj: dict, line_no: int | None = None) -> ReviewEvent:
    """Decode one already-parsed JSON object. Unknown fields are ignored."""
    kind = _need(obj, "kind", line_no)
    if kind not in KINDS:
        raise UnknownKind(_at(f"unknown event kind {kind!r}", line_no))
    ts = _as_ts(_need(obj, "ts", line_no), line_no)
    engineer = _as_id(_need(obj, "engineer", line_no), "engineer", line_no)

    if kind == "Meeting":
        if obj.get("diff_id") is not None:
            raise MalformedLine(_at("Meeting events carry no diff_id", line_no))
        duration = _as_duration(_need(obj, "duration_s", line_no), line_no)
        return ReviewEvent(kind=kind, ts=ts, engineer=engineer, duration_s=duration)

    diff_id = _as_id(_need(obj, "diff_id", line_no), "diff_id", line_no)

    if kind == "DiffPublished":
        files = _as_str_list(_need(obj, "files", line_no), "files", line_no)
        if not files:
            raise MalformedLine(_at("DiffPublished.files must be non-empty", line_no))
        reviewers = _as_str_list(obj.get("assigned_reviewers", []), "assigned_reviewers", line_no)
        groups = _as_str_list(obj.get("assigned_groups", []), "assigned_groups", line_no)
        return ReviewEvent(
            kind=kind,
            ts=ts,
            engineer=engineer,
            diff_id=diff_id,
            files=files,
            assigned_reviewers=reviewers,
            assigned_groups=groups,
        )
    if kind == "ReviewerAssigned":
        via = _need(obj, "via", line_no)
        if via not in VIAS:
            raise MalformedLine(_at(f"via must be one of {VIAS}, got {via!r}", line_no))
        return ReviewEvent(kind=kind, ts=ts, engineer=engineer, diff_id=diff_id, via=via)
    if kind == "Action":
        act = _need(obj, "act", line_no)
        if act not in ACTS:
            raise MalformedLine(_at(f"act must be one of {ACTS}, got {act!r}", line_no))
        return ReviewEvent(kind=kind, ts=ts, engineer=engineer, diff_id=diff_id, act=act)
    if kind == "ViewSession":
        duration = _as_duration(_need(obj, "duration_s", line_no), line_no)
        return ReviewEvent(kind=kind, ts=ts, engineer=engineer, diff_id=diff_id, duration_s=duration)
    # Comment, DiffUpdated, DiffClosed carry no extra payload.
    return ReviewEvent(kind=kind, ts=ts, engineer=engineer, diff_id=diff_id)


def parse_event_line(line: str, line_no: int | None = None) -> ReviewEvent:
    """Decode one JSONL event line.

    Raises MalformedLine on bad syntax or invariant violations, UnknownKind
    for kinds outside the schema, MissingField naming any absent field.
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedLine(_at(f"invalid JSON: {exc}", line_no)) from None
    if not isinstance(obj, dict):
        raise MalformedLine(_at("event line must be a JSON object", line_no))
    return parse_event_obj(obj, line_no)


def event_to_obj(ev: ReviewEvent) -> dict:
    """Canonical JSON object for an event, keys in schema order."""
    obj: dict = {"kind": ev.kind, "ts": ev.ts}
    if ev.diff_id is not None:
        obj["diff_id"] = ev.diff_id
    obj["engineer"] = ev.engineer
    if ev.kind == "DiffPublished":
        obj["files"] = list(ev.files)
        obj["assigned_reviewers"] = list(ev.assigned_reviewers or ())
        obj["assigned_groups"] = list(ev.assigned_groups or ())
    if ev.via is not None:
        obj["via"] = ev.via
    if ev.act is not None:
        obj["act"] = ev.act
    if ev.duration_s is not None:
        obj["duration_s"] = ev.duration_s
    return obj


def serialize_event(ev: ReviewEvent) -> str:
    return json.dumps(event_to_obj(ev), separators=(",", ":"))


def serialize_log(log: EventLog) -> str:
    """Deterministic JSONL serialization, one event per line."""
    return "".join(serialize_event(ev) + "\n" for ev in log)
