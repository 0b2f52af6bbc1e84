"""Read-only, point-in-time indexes over an EventLog.

Every query takes an as-of timestamp ``t`` and only reflects events with
``ts < t``, which is what keeps feature extraction leakage-free. The one
documented exception is meetings: a Meeting event's timestamp is its
scheduled start, calendar data known in advance, so the upcoming-meetings
window looks at scheduled times regardless of as-of.

A built index is immutable and safe for unlimited concurrent readers.
"""

from __future__ import annotations

from bisect import bisect_left

import numpy as np

from .events import EventLog, ReviewEvent

DAY = 86400
FAR_FUTURE = 2**62

# Per-engineer distinct-diff count categories used by feature extraction.
COUNT_CATEGORIES = ("assigned", "rejected", "acted", "commented", "resigned")

# Actor codes on a diff's activity list.
CODE_COMMENT = 0
CODE_ACCEPT = 1
CODE_REJECT = 2
CODE_RESIGN = 3

_ACT_CODE = {"accept": CODE_ACCEPT, "reject": CODE_REJECT, "resign": CODE_RESIGN}


def _freeze_counts(pairs: dict[str, tuple[list[int], list[str]]]):
    """Turn per-category (ts, diff) pair lists into (ts, next-same-diff) arrays."""
    out = {}
    for cat, (ts_list, diff_list) in pairs.items():
        n = len(ts_list)
        nxt = [FAR_FUTURE] * n
        last: dict[str, int] = {}
        for i in range(n - 1, -1, -1):
            d = diff_list[i]
            nxt[i] = last.get(d, FAR_FUTURE)
            last[d] = ts_list[i]
        out[cat] = (np.asarray(ts_list, dtype=np.int64), np.asarray(nxt, dtype=np.int64))
    return out


class EventIndex:
    """Indexes built in one pass over a validated, ts-sorted EventLog."""

    def __init__(self, log: EventLog):
        self.log = log
        self._diff_pub: dict[str, ReviewEvent] = {}
        self._diff_order: list[str] = []
        # diff -> parallel (ts, engineer, code) lists of non-author comments/actions
        self._actors: dict[str, tuple[list[int], list[str], list[int]]] = {}
        # engineer -> category -> (ts, diff) pair lists, frozen to arrays below
        raw_counts: dict[str, dict[str, tuple[list[int], list[str]]]] = {}
        raw_activity: dict[str, tuple[list[int], list[str]]] = {}
        # (author, viewer) -> [ts, cum_seconds, cum_assigned_seconds] (cums lead with 0)
        self._pair_views: dict[tuple[str, str], tuple[list[int], list[int], list[int]]] = {}
        # author -> viewer -> interaction event timestamps
        self._author_inter: dict[str, dict[str, list[int]]] = {}
        # group -> engineer -> first interaction ts (roster inferred from history)
        self._roster: dict[str, dict[str, int]] = {}
        self._meetings: dict[str, tuple[list[int], list[int]]] = {}
        self._eng_views: dict[str, tuple[list[int], list[int]]] = {}
        self._eng_pos: dict[str, tuple[list[int], list[int]]] = {}
        self._diff_pos: dict[str, tuple[list[int], list[int]]] = {}

        # Interned ids keep the per-file postings as compact int arrays.
        self._eng_ids: dict[str, int] = {}
        self._eng_names: list[str] = []
        self._diff_ids: dict[str, int] = {}
        # file -> parallel (ts, engineer id, diff id) lists; authored = publishes
        # touching the file, acted = non-author comments/actions on such diffs.
        fauth_raw: dict[str, tuple[list[int], list[int], list[int]]] = {}
        fact_raw: dict[str, tuple[list[int], list[int], list[int]]] = {}
        faccept_raw: dict[str, tuple[list[int], list[int], list[int]]] = {}

        first_assign: dict[tuple[str, str], int] = {}
        self._first_assign = first_assign

        def eng_id(name: str) -> int:
            i = self._eng_ids.get(name)
            if i is None:
                i = self._eng_ids[name] = len(self._eng_names)
                self._eng_names.append(name)
            return i

        def diff_id_of(name: str) -> int:
            i = self._diff_ids.get(name)
            if i is None:
                i = self._diff_ids[name] = len(self._diff_ids)
            return i

        def record_count(eng: str, cat: str, ts: int, diff: str) -> None:
            cats = raw_counts.get(eng)
            if cats is None:
                cats = raw_counts[eng] = {}
            pair = cats.get(cat)
            if pair is None:
                pair = cats[cat] = ([], [])
            pair[0].append(ts)
            pair[1].append(diff)

        def record_interaction(author: str, viewer: str, ts: int) -> None:
            by_viewer = self._author_inter.get(author)
            if by_viewer is None:
                by_viewer = self._author_inter[author] = {}
            lst = by_viewer.get(viewer)
            if lst is None:
                lst = by_viewer[viewer] = []
            lst.append(ts)

        def record_roster(diff: str, eng: str, ts: int) -> None:
            pub = self._diff_pub.get(diff)
            if pub is None or not pub.assigned_groups or eng == pub.engineer:
                return
            for g in pub.assigned_groups:
                members = self._roster.get(g)
                if members is None:
                    members = self._roster[g] = {}
                members.setdefault(eng, ts)

        for pos, ev in enumerate(log.events):
            kind = ev.kind
            ts = ev.ts
            eng = ev.engineer
            diff = ev.diff_id

            ep = self._eng_pos.get(eng)
            if ep is None:
                ep = self._eng_pos[eng] = ([], [])
            ep[0].append(ts)
            ep[1].append(pos)
            if diff is not None:
                dp = self._diff_pos.get(diff)
                if dp is None:
                    dp = self._diff_pos[diff] = ([], [])
                dp[0].append(ts)
                dp[1].append(pos)

            if kind == "DiffPublished":
                self._diff_pub[diff] = ev
                self._diff_order.append(diff)
                ei = eng_id(eng)
                di = diff_id_of(diff)
                for f in ev.files:
                    posts = fauth_raw.get(f)
                    if posts is None:
                        posts = fauth_raw[f] = ([], [], [])
                    posts[0].append(ts)
                    posts[1].append(ei)
                    posts[2].append(di)
                for r in ev.assigned_reviewers or ():
                    if r == eng:
                        continue
                    first_assign.setdefault((diff, r), ts)
                    record_count(r, "assigned", ts, diff)
                    record_interaction(eng, r, ts)
            elif kind == "ReviewerAssigned":
                author = self._diff_pub[diff].engineer
                if eng != author:
                    first_assign.setdefault((diff, eng), ts)
                    record_count(eng, "assigned", ts, diff)
                    record_interaction(author, eng, ts)
                    record_roster(diff, eng, ts)
            elif kind == "ViewSession":
                author = self._diff_pub[diff].engineer
                ev_dur = ev.duration_s
                views = self._eng_views.get(eng)
                if views is None:
                    views = self._eng_views[eng] = ([], [0])
                views[0].append(ts)
                views[1].append(views[1][-1] + ev_dur)
                if eng != author:
                    key = (author, eng)
                    pv = self._pair_views.get(key)
                    if pv is None:
                        pv = self._pair_views[key] = ([], [0], [0])
                    assigned = (diff, eng) in first_assign
                    pv[0].append(ts)
                    pv[1].append(pv[1][-1] + ev_dur)
                    pv[2].append(pv[2][-1] + (ev_dur if assigned else 0))
                    record_interaction(author, eng, ts)
                    record_roster(diff, eng, ts)
            elif kind == "Comment":
                author = self._diff_pub[diff].engineer
                act_pair = raw_activity.get(eng)
                if act_pair is None:
                    act_pair = raw_activity[eng] = ([], [])
                act_pair[0].append(ts)
                act_pair[1].append(diff)
                if eng != author:
                    actors = self._actors.get(diff)
                    if actors is None:
                        actors = self._actors[diff] = ([], [], [])
                    actors[0].append(ts)
                    actors[1].append(eng)
                    actors[2].append(CODE_COMMENT)
                    record_count(eng, "commented", ts, diff)
                    if (diff, eng) in first_assign:
                        record_count(eng, "acted", ts, diff)
                    record_interaction(author, eng, ts)
                    record_roster(diff, eng, ts)
                    ei = eng_id(eng)
                    di = diff_id_of(diff)
                    for f in self._diff_pub[diff].files:
                        posts = fact_raw.get(f)
                        if posts is None:
                            posts = fact_raw[f] = ([], [], [])
                        posts[0].append(ts)
                        posts[1].append(ei)
                        posts[2].append(di)
            elif kind == "Action":
                author = self._diff_pub[diff].engineer
                act_pair = raw_activity.get(eng)
                if act_pair is None:
                    act_pair = raw_activity[eng] = ([], [])
                act_pair[0].append(ts)
                act_pair[1].append(diff)
                if eng != author:
                    code = _ACT_CODE[ev.act]
                    actors = self._actors.get(diff)
                    if actors is None:
                        actors = self._actors[diff] = ([], [], [])
                    actors[0].append(ts)
                    actors[1].append(eng)
                    actors[2].append(code)
                    if code == CODE_REJECT:
                        record_count(eng, "rejected", ts, diff)
                    elif code == CODE_RESIGN:
                        record_count(eng, "resigned", ts, diff)
                    if code in (CODE_ACCEPT, CODE_REJECT) and (diff, eng) in first_assign:
                        record_count(eng, "acted", ts, diff)
                    record_interaction(author, eng, ts)
                    record_roster(diff, eng, ts)
                    ei = eng_id(eng)
                    di = diff_id_of(diff)
                    for f in self._diff_pub[diff].files:
                        posts = fact_raw.get(f)
                        if posts is None:
                            posts = fact_raw[f] = ([], [], [])
                        posts[0].append(ts)
                        posts[1].append(ei)
                        posts[2].append(di)
                        if code == CODE_ACCEPT:
                            posts = faccept_raw.get(f)
                            if posts is None:
                                posts = faccept_raw[f] = ([], [], [])
                            posts[0].append(ts)
                            posts[1].append(ei)
                            posts[2].append(di)
            elif kind == "Meeting":
                meet = self._meetings.get(eng)
                if meet is None:
                    meet = self._meetings[eng] = ([], [0])
                meet[0].append(ts)
                meet[1].append(meet[1][-1] + ev.duration_s)
            # DiffUpdated and DiffClosed only feed the per-diff event lists.

        self._counts = {eng: _freeze_counts(cats) for eng, cats in raw_counts.items()}
        self._activity = {
            eng: _freeze_counts({"a": pair})["a"] for eng, pair in raw_activity.items()
        }

        def freeze_posts(raw):
            return {
                f: (
                    np.asarray(ts, dtype=np.int64),
                    np.asarray(engs, dtype=np.int64),
                    np.asarray(diffs, dtype=np.int64),
                )
                for f, (ts, engs, diffs) in raw.items()
            }

        self._file_authored = freeze_posts(fauth_raw)
        self._file_acted = freeze_posts(fact_raw)
        self._file_accepts = freeze_posts(faccept_raw)

    # -- diff metadata ----------------------------------------------------

    def publish(self, diff_id: str) -> ReviewEvent:
        return self._diff_pub[diff_id]

    def has_diff(self, diff_id: str) -> bool:
        return diff_id in self._diff_pub

    def diffs_in_order(self) -> list[str]:
        """Diff ids in publish-timestamp order."""
        return list(self._diff_order)

    def engineers(self) -> list[str]:
        return sorted(self._eng_pos)

    # -- generic as-of queries --------------------------------------------

    def events_for_diff(self, diff_id: str, as_of: int) -> list[ReviewEvent]:
        entry = self._diff_pos.get(diff_id)
        if entry is None:
            return []
        ts_list, pos_list = entry
        hi = bisect_left(ts_list, as_of)
        events = self.log.events
        return [events[p] for p in pos_list[:hi]]

    def events_by_engineer(self, engineer: str, as_of: int) -> list[ReviewEvent]:
        entry = self._eng_pos.get(engineer)
        if entry is None:
            return []
        ts_list, pos_list = entry
        hi = bisect_left(ts_list, as_of)
        events = self.log.events
        return [events[p] for p in pos_list[:hi]]

    # -- feature building blocks ------------------------------------------

    def count_distinct(self, engineer: str, category: str, start: int, end: int) -> int:
        """Distinct diffs with a ``category`` event by ``engineer`` in [start, end)."""
        cats = self._counts.get(engineer)
        if cats is None:
            return 0
        entry = cats.get(category)
        if entry is None:
            return 0
        ts, nxt = entry
        lo = int(np.searchsorted(ts, start, side="left"))
        hi = int(np.searchsorted(ts, end, side="left"))
        if lo >= hi:
            return 0
        return int((nxt[lo:hi] >= end).sum())

    def pair_view_seconds(self, author: str, viewer: str, start: int, end: int) -> int:
        pv = self._pair_views.get((author, viewer))
        if pv is None:
            return 0
        ts, cum, _ = pv
        lo = bisect_left(ts, start)
        hi = bisect_left(ts, end)
        return cum[hi] - cum[lo]

    def pair_view_assigned_seconds(self, author: str, viewer: str, start: int, end: int) -> int:
        pv = self._pair_views.get((author, viewer))
        if pv is None:
            return 0
        ts, _, cuma = pv
        lo = bisect_left(ts, start)
        hi = bisect_left(ts, end)
        return cuma[hi] - cuma[lo]

    def pair_interaction_count(self, author: str, viewer: str, start: int, end: int) -> int:
        by_viewer = self._author_inter.get(author)
        if by_viewer is None:
            return 0
        ts = by_viewer.get(viewer)
        if ts is None:
            return 0
        return bisect_left(ts, end) - bisect_left(ts, start)

    def viewers_of(self, author: str) -> dict[str, list[int]]:
        """Interaction timestamps per engineer who ever interacted with author's diffs."""
        return self._author_inter.get(author, {})

    def file_authored(self, file: str):
        """Sorted (ts, engineer id, diff id) arrays of publishes touching ``file``."""
        return self._file_authored.get(file)

    def file_acted(self, file: str):
        """Sorted (ts, engineer id, diff id) arrays of non-author comments/actions."""
        return self._file_acted.get(file)

    def file_accepts(self, file: str):
        """Sorted (ts, engineer id, diff id) arrays of accept actions only."""
        return self._file_accepts.get(file)

    def engineer_id(self, name: str) -> int | None:
        """Interned id, present only for engineers who authored or acted somewhere."""
        return self._eng_ids.get(name)

    def engineer_name(self, i: int) -> str:
        return self._eng_names[i]

    def realized_reviewers(self, diff_id: str) -> set[str]:
        """Engineers who commented on or accepted/rejected the diff, ever."""
        entry = self._actors.get(diff_id)
        if entry is None:
            return set()
        _, eng_list, code_list = entry
        return {e for e, c in zip(eng_list, code_list) if c != CODE_RESIGN}

    def roster_members(self, group: str, as_of: int) -> list[str]:
        members = self._roster.get(group)
        if members is None:
            return []
        return [e for e, first_ts in members.items() if first_ts < as_of]

    # -- workload ----------------------------------------------------------

    def view_seconds(self, engineer: str, start: int, end: int) -> int:
        views = self._eng_views.get(engineer)
        if views is None:
            return 0
        ts, cum = views
        lo = bisect_left(ts, start)
        hi = bisect_left(ts, end)
        return cum[hi] - cum[lo]

    def activity_distinct_diffs(self, engineer: str, start: int, end: int) -> int:
        entry = self._activity.get(engineer)
        if entry is None:
            return 0
        ts, nxt = entry
        lo = int(np.searchsorted(ts, start, side="left"))
        hi = int(np.searchsorted(ts, end, side="left"))
        if lo >= hi:
            return 0
        return int((nxt[lo:hi] >= end).sum())

    def meeting_seconds(self, engineer: str, start: int, end: int) -> int:
        """Scheduled meeting seconds in [start, end); exempt from as-of filtering."""
        meet = self._meetings.get(engineer)
        if meet is None:
            return 0
        ts, cum = meet
        lo = bisect_left(ts, start)
        hi = bisect_left(ts, end)
        return cum[hi] - cum[lo]
