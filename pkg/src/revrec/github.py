"""Import a directory of GitHub pull-request exports as an event log.

Each ``*.json`` file holds one pull request object, or an array of them,
using the usual API field names. Only a small subset is read:

    number, user.login, created_at, merged_at,
    requested_reviewers[].login, files[].filename,
    reviews[] (user.login, state, submitted_at),
    review_comments[] (user.login, created_at),
    commits[] (committed_at)

Mapping: opening the PR publishes the diff; requested reviewers become
explicit assignments by the author; APPROVED and CHANGES_REQUESTED
reviews become accept and reject actions; COMMENTED reviews and review
comments become comments; commits after the PR opened become diff
updates by the author; merging closes the diff. There is no attention
or meeting signal in this source, so none is fabricated.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path

from .corpus import build_log
from .errors import EmptyExport, MalformedExport
from .events import EventLog, ReviewEvent


def _parse_ts(value, *, where: str) -> int:
    if not isinstance(value, str):
        raise MalformedExport(f"{where}: expected ISO-8601 timestamp, got {value!r}")
    try:
        dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    except ValueError as e:
        raise MalformedExport(f"{where}: bad timestamp {value!r}") from e
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _login(obj, *, where: str) -> str:
    if not isinstance(obj, dict) or not isinstance(obj.get("login"), str) or not obj["login"]:
        raise MalformedExport(f"{where}: missing user login")
    return obj["login"]


def _pr_events(pr: dict, *, where: str) -> list[ReviewEvent]:
    if not isinstance(pr, dict):
        raise MalformedExport(f"{where}: expected a JSON object")
    number = pr.get("number")
    if not isinstance(number, int) or isinstance(number, bool):
        raise MalformedExport(f"{where}: missing integer 'number'")
    where = f"{where} (pr {number})"
    author = _login(pr.get("user"), where=where)
    opened = _parse_ts(pr.get("created_at"), where=where)
    diff_id = f"pr{number}"

    files = pr.get("files")
    if not isinstance(files, list) or not files:
        raise MalformedExport(f"{where}: missing non-empty 'files'")
    names = []
    for f in files:
        if not isinstance(f, dict) or not isinstance(f.get("filename"), str):
            raise MalformedExport(f"{where}: file entry without filename")
        names.append(f["filename"])

    events = [
        ReviewEvent("DiffPublished", opened, author, diff_id, tuple(names), (), ())
    ]

    def clamp(ts: int) -> int:
        # Exports occasionally carry artifacts timestamped before the PR
        # opened (rebased commits, migrated comments). Clamp rather than
        # reject: order within the log is what downstream code relies on.
        return max(ts, opened)

    for r in pr.get("requested_reviewers") or []:
        events.append(
            ReviewEvent(
                "ReviewerAssigned", opened, _login(r, where=where), diff_id, via="author"
            )
        )

    for rv in pr.get("reviews") or []:
        if not isinstance(rv, dict):
            raise MalformedExport(f"{where}: review entry is not an object")
        state = rv.get("state")
        if state in ("DISMISSED", "PENDING"):
            continue
        if state not in ("APPROVED", "CHANGES_REQUESTED", "COMMENTED"):
            raise MalformedExport(f"{where}: unknown review state {state!r}")
        who = _login(rv.get("user"), where=where)
        ts = clamp(_parse_ts(rv.get("submitted_at"), where=where))
        if state == "COMMENTED":
            events.append(ReviewEvent("Comment", ts, who, diff_id))
        else:
            act = "accept" if state == "APPROVED" else "reject"
            events.append(ReviewEvent("Action", ts, who, diff_id, act=act))

    for c in pr.get("review_comments") or []:
        if not isinstance(c, dict):
            raise MalformedExport(f"{where}: review comment entry is not an object")
        who = _login(c.get("user"), where=where)
        ts = clamp(_parse_ts(c.get("created_at"), where=where))
        events.append(ReviewEvent("Comment", ts, who, diff_id))

    for cm in pr.get("commits") or []:
        if not isinstance(cm, dict):
            raise MalformedExport(f"{where}: commit entry is not an object")
        ts = _parse_ts(cm.get("committed_at"), where=where)
        if ts > opened:
            events.append(ReviewEvent("DiffUpdated", ts, author, diff_id))

    merged = pr.get("merged_at")
    if merged is not None:
        events.append(
            ReviewEvent("DiffClosed", clamp(_parse_ts(merged, where=where)), author, diff_id)
        )
    return events


def import_github_prs(export_path) -> EventLog:
    """Read every ``*.json`` pull request under export_path into one log."""
    root = Path(export_path)
    if not root.is_dir():
        raise MalformedExport(f"{root}: not a directory")
    paths = sorted(root.glob("*.json"))
    if not paths:
        raise EmptyExport(f"{root}: no .json files")

    events: list[ReviewEvent] = []
    seen: set[str] = set()
    for p in paths:
        try:
            parsed = json.loads(p.read_text())
        except (OSError, ValueError) as e:
            raise MalformedExport(f"{p.name}: unreadable JSON ({e})") from e
        for pr in parsed if isinstance(parsed, list) else [parsed]:
            for ev in _pr_events(pr, where=p.name):
                if ev.kind == "DiffPublished":
                    if ev.diff_id in seen:
                        raise MalformedExport(f"{p.name}: duplicate pull request {ev.diff_id}")
                    seen.add(ev.diff_id)
                events.append(ev)
    return build_log(events)
