"""Incremental feature store for low-latency recommendation serving.

Offline featurization answers "as of time t" by binary-searching the full
history on every request. The store instead keeps rolling, day-bucketed
counters keyed the same way the offline extractor counts: distinct diffs
per category over the lookback window, pair view seconds over the
familiarity window, per-file authored and acted histories for candidate
pools and overlap, and per-engineer workload accumulators.

Day granularity is the accuracy contract: at a day-aligned as_of every
feature equals the offline extractor exactly, because both windows cover
the same whole days. Mid-day, the store over-covers by at most the
current partial day.

Events are applied strictly forward. ``apply`` ingests an event without
moving the clock; ``advance_to`` moves the clock. Both reject timestamps
behind the watermark. One consequence, unlike the offline index: meeting
events are ordinary history here, so the forward-looking meeting workload
only sees meetings whose events have already arrived.
"""

from __future__ import annotations

import heapq
import math
from bisect import bisect_left
from dataclasses import dataclass

import numpy as np

from .errors import EmptyModel, InvalidConfig, OrphanEvent, StaleEvent
from .events import EventLog, ReviewEvent
from .featurize import (
    DEFAULT_POLICY,
    FEATURE_NAMES,
    CandidatePolicy,
    FeatureVector,
)
from .policy import METRIC_KINDS, PolicyConfig, WorkloadSnapshot, rerank_topk
from .ranker import RankedEntry, RankedList, RankerModel, model_to_json, predict

DAY = 86400
WORKLOAD_WINDOW_DAYS = 7

_ACT_TO_CAT = {"reject": "rejected", "resign": "resigned"}

_ZERO_PAIR = (0, 0)


class _RollingSum:
    """Day-bucketed additive total over a trailing window."""

    __slots__ = ("buckets", "total")

    def __init__(self):
        self.buckets: list[list] = []  # [day, value], day nondecreasing
        self.total = 0

    def add(self, day: int, value) -> None:
        if self.buckets and self.buckets[-1][0] == day:
            self.buckets[-1][1] += value
        else:
            self.buckets.append([day, value])
        self.total += value

    def value_at(self, cutoff_day: int):
        b = self.buckets
        while b and b[0][0] < cutoff_day:
            self.total -= b.pop(0)[1]
        return self.total


class _RollingDistinct:
    """Distinct keys seen within a trailing window, by last occurrence."""

    __slots__ = ("last", "heap")

    def __init__(self):
        self.last: dict = {}
        self.heap: list = []

    def add(self, day: int, key) -> None:
        self.last[key] = day
        heapq.heappush(self.heap, (day, key))

    def _expire(self, cutoff_day: int) -> None:
        h = self.heap
        last = self.last
        while h and h[0][0] < cutoff_day:
            day, key = heapq.heappop(h)
            if last.get(key) == day:
                del last[key]

    def count_at(self, cutoff_day: int) -> int:
        self._expire(cutoff_day)
        return len(self.last)

    def keys_at(self, cutoff_day: int):
        self._expire(cutoff_day)
        return self.last


@dataclass(frozen=True)
class RecommendResult:
    ranked: RankedList
    coverage: bool
    model_version: str


class FeatureStore:
    """Rolling-counter snapshot of review history up to a watermark."""

    def __init__(
        self,
        as_of: int,
        *,
        pol: CandidatePolicy = DEFAULT_POLICY,
        model: RankerModel | None = None,
        pcfg: PolicyConfig | None = None,
    ):
        pol.validate()
        self.as_of = int(as_of)
        self.pol = pol
        self.model = model
        self.pcfg = pcfg if pcfg is not None else PolicyConfig()
        self.pcfg.validate()
        self.model_version = (
            _model_version(model) if model is not None else "none"
        )

        self._diff_pub: dict[str, tuple[str, tuple, tuple]] = {}
        self._first_assign: set[tuple[str, str]] = set()
        self._counts: dict[tuple[str, str], _RollingDistinct] = {}
        self._pair_view: dict[str, dict[str, _RollingSum]] = {}
        self._pair_view_assigned: dict[str, dict[str, _RollingSum]] = {}
        self._pair_inter: dict[str, dict[str, _RollingSum]] = {}
        self._file_hist: dict[str, dict[str, _RollingDistinct]] = {}
        self._file_auth: dict[str, dict[str, _RollingDistinct]] = {}
        self._roster: dict[str, dict[str, int]] = {}
        self._time_spent: dict[str, _RollingSum] = {}
        self._activity: dict[str, _RollingDistinct] = {}
        self._meetings: dict[str, tuple[list, list]] = {}  # (ts, cum) with cum[0]=0
        self._known_engineers: set[str] = set()
        self._known_files: set[str] = set()

        # Engineer interning, so pool arithmetic can run on integer arrays.
        self._eng_code: dict[str, int] = {}
        self._eng_names: list[str] = []

        # Query caches, valid for one epoch. Every ingest or watermark move
        # bumps the epoch, so cached window evaluations can never leak
        # across snapshots.
        self._epoch = 0
        self._file_cache: dict[str, tuple] = {}
        self._auth_cache: dict[str, tuple] = {}
        self._fam_cache: dict[str, tuple] = {}
        self._pairfam_cache: dict[str, tuple] = {}
        self._cand_cache: dict[str, tuple] = {}
        self._roster_cache: dict[str, tuple] = {}
        self._names_np: tuple | None = None

    # -- ingestion ---------------------------------------------------------

    def apply(self, ev: ReviewEvent) -> None:
        """Ingest one event; the watermark does not move."""
        if ev.ts < self.as_of:
            raise StaleEvent(
                f"{ev.kind} at {ev.ts} is behind the store watermark {self.as_of}"
            )
        self._ingest(ev)
        self._epoch += 1

    def advance_to(self, ts: int) -> None:
        if ts < self.as_of:
            raise StaleEvent(f"cannot move the watermark back from {self.as_of} to {ts}")
        self.as_of = int(ts)
        self._epoch += 1

    def _count(self, eng: str, cat: str) -> _RollingDistinct:
        rd = self._counts.get((eng, cat))
        if rd is None:
            rd = self._counts[(eng, cat)] = _RollingDistinct()
        return rd

    def _inter(self, author: str, viewer: str, day: int) -> None:
        by_viewer = self._pair_inter.get(author)
        if by_viewer is None:
            by_viewer = self._pair_inter[author] = {}
        rs = by_viewer.get(viewer)
        if rs is None:
            rs = by_viewer[viewer] = _RollingSum()
        rs.add(day, 1)

    def _join_roster(self, diff: str, eng: str, ts: int) -> None:
        pub = self._diff_pub.get(diff)
        if pub is None or not pub[2] or eng == pub[0]:
            return
        for g in pub[2]:
            members = self._roster.get(g)
            if members is None:
                members = self._roster[g] = {}
            members.setdefault(eng, ts)

    def _file_entry(self, table: dict, f: str, eng: str) -> _RollingDistinct:
        per_eng = table.get(f)
        if per_eng is None:
            per_eng = table[f] = {}
        rd = per_eng.get(eng)
        if rd is None:
            rd = per_eng[eng] = _RollingDistinct()
        return rd

    def _code(self, eng: str) -> int:
        c = self._eng_code.get(eng)
        if c is None:
            c = self._eng_code[eng] = len(self._eng_names)
            self._eng_names.append(eng)
        return c

    def _ingest(self, ev: ReviewEvent) -> None:
        kind = ev.kind
        ts = ev.ts
        day = ts // DAY
        eng = ev.engineer
        diff = ev.diff_id
        self._known_engineers.add(eng)
        self._code(eng)
        if (
            diff is not None
            and kind != "DiffPublished"
            and diff not in self._diff_pub
        ):
            raise OrphanEvent(f"{kind} for diff {diff!r} precedes its DiffPublished")

        if kind == "DiffPublished":
            self._diff_pub[diff] = (eng, ev.files, ev.assigned_groups or ())
            for f in ev.files:
                self._known_files.add(f)
                self._file_entry(self._file_hist, f, self._code(eng)).add(day, diff)
                self._file_entry(self._file_auth, f, eng).add(day, diff)
            for r in ev.assigned_reviewers or ():
                if r == eng:
                    continue
                self._known_engineers.add(r)
                self._code(r)
                self._first_assign.add((diff, r))
                self._count(r, "assigned").add(day, diff)
                self._inter(eng, r, day)
        elif kind == "ReviewerAssigned":
            author = self._diff_pub[diff][0]
            if eng != author:
                self._first_assign.add((diff, eng))
                self._count(eng, "assigned").add(day, diff)
                self._inter(author, eng, day)
                self._join_roster(diff, eng, ts)
        elif kind == "ViewSession":
            dur = ev.duration_s
            rs = self._time_spent.get(eng)
            if rs is None:
                rs = self._time_spent[eng] = _RollingSum()
            rs.add(day, dur)
            author = self._diff_pub[diff][0]
            if eng != author:
                by_viewer = self._pair_view.get(author)
                if by_viewer is None:
                    by_viewer = self._pair_view[author] = {}
                pv = by_viewer.get(eng)
                if pv is None:
                    pv = by_viewer[eng] = _RollingSum()
                pv.add(day, dur)
                if (diff, eng) in self._first_assign:
                    by_va = self._pair_view_assigned.get(author)
                    if by_va is None:
                        by_va = self._pair_view_assigned[author] = {}
                    pva = by_va.get(eng)
                    if pva is None:
                        pva = by_va[eng] = _RollingSum()
                    pva.add(day, dur)
                self._inter(author, eng, day)
                self._join_roster(diff, eng, ts)
        elif kind == "Comment":
            act = self._activity.get(eng)
            if act is None:
                act = self._activity[eng] = _RollingDistinct()
            act.add(day, diff)
            author, files, _ = self._diff_pub[diff]
            if eng != author:
                self._count(eng, "commented").add(day, diff)
                if (diff, eng) in self._first_assign:
                    self._count(eng, "acted").add(day, diff)
                self._inter(author, eng, day)
                self._join_roster(diff, eng, ts)
                code = self._code(eng)
                for f in files:
                    self._file_entry(self._file_hist, f, code).add(day, diff)
        elif kind == "Action":
            act = self._activity.get(eng)
            if act is None:
                act = self._activity[eng] = _RollingDistinct()
            act.add(day, diff)
            author, files, _ = self._diff_pub[diff]
            if eng != author:
                cat = _ACT_TO_CAT.get(ev.act)
                if cat is not None:
                    self._count(eng, cat).add(day, diff)
                if ev.act in ("accept", "reject") and (diff, eng) in self._first_assign:
                    self._count(eng, "acted").add(day, diff)
                self._inter(author, eng, day)
                self._join_roster(diff, eng, ts)
                code = self._code(eng)
                for f in files:
                    self._file_entry(self._file_hist, f, code).add(day, diff)
        elif kind == "Meeting":
            meet = self._meetings.get(eng)
            if meet is None:
                meet = self._meetings[eng] = ([], [0])
            meet[0].append(ts)
            meet[1].append(meet[1][-1] + ev.duration_s)
        # DiffUpdated and DiffClosed carry no feature or workload signal.

    # -- queries -----------------------------------------------------------

    def _cut_fam(self) -> int:
        return self.as_of // DAY - self.pol.familiarity_window_days

    def _cut_cnt(self) -> int:
        return self.as_of // DAY - self.pol.lookback_days

    def features(self, author: str, files, candidate: str) -> FeatureVector:
        """Feature vector for one candidate against an (author, files) query."""
        cf = self._cut_fam()
        cc = self._cut_cnt()
        by_viewer = self._pair_view.get(author)
        pv = by_viewer.get(candidate) if by_viewer else None
        by_va = self._pair_view_assigned.get(author)
        pva = by_va.get(candidate) if by_va else None

        ufiles = list(dict.fromkeys(files))
        rds = []
        for f in ufiles:
            per_eng = self._file_auth.get(f)
            if per_eng is None:
                continue
            rd = per_eng.get(candidate)
            if rd is not None and rd.count_at(cc):
                rds.append(rd)
        if not rds:
            overlap = 0
        elif len(rds) == 1:
            overlap = len(rds[0].last)
        else:
            seen: set = set()
            for rd in rds:
                seen.update(rd.last)
            overlap = len(seen)

        def cnt(cat: str) -> int:
            rd = self._counts.get((candidate, cat))
            return rd.count_at(cc) if rd is not None else 0

        return FeatureVector(
            fam_view_90d_s=pv.value_at(cf) if pv is not None else 0,
            assigned_count=cnt("assigned"),
            rejected_count=cnt("rejected"),
            acted_count=cnt("acted"),
            fam_view_assigned_90d_s=pva.value_at(cf) if pva is not None else 0,
            files_authored_overlap=overlap,
            commented_count=cnt("commented"),
            resigned_count=cnt("resigned"),
        )

    def _file_hist_counts(self, f: str) -> tuple[np.ndarray, np.ndarray]:
        """Epoch-cached (engineer codes, distinct-diff counts) for one file."""
        cached = self._file_cache.get(f)
        if cached is not None and cached[0] == self._epoch:
            return cached[1], cached[2]
        per_eng = self._file_hist.get(f)
        codes: list[int] = []
        cnts: list[int] = []
        if per_eng:
            cc = self._cut_cnt()
            for code, rd in per_eng.items():
                c = rd.count_at(cc)
                if c:
                    codes.append(code)
                    cnts.append(c)
        pair = (
            np.asarray(codes, dtype=np.int64),
            np.asarray(cnts, dtype=np.int64),
        )
        self._file_cache[f] = (self._epoch, pair[0], pair[1])
        return pair

    def _file_auth_map(self, f: str) -> dict:
        """Epoch-cached {eng: rolling set of authored diffs} for one file."""
        cached = self._auth_cache.get(f)
        if cached is not None and cached[0] == self._epoch:
            return cached[1]
        out: dict[str, _RollingDistinct] = {}
        per_eng = self._file_auth.get(f)
        if per_eng:
            cc = self._cut_cnt()
            for eng, rd in per_eng.items():
                if rd.count_at(cc):
                    out[eng] = rd
        self._auth_cache[f] = (self._epoch, out)
        return out

    def _fam_counts(self, author: str) -> tuple[np.ndarray, np.ndarray]:
        """Epoch-cached (viewer codes, interaction counts) for one author."""
        cached = self._fam_cache.get(author)
        if cached is not None and cached[0] == self._epoch:
            return cached[1], cached[2]
        cf = self._cut_fam()
        codes: list[int] = []
        cnts: list[int] = []
        for viewer, rs in self._pair_inter.get(author, {}).items():
            c = rs.value_at(cf)
            if c:
                codes.append(self._code(viewer))
                cnts.append(c)
        pair = (np.asarray(codes, dtype=np.int64), np.asarray(cnts, dtype=np.int64))
        self._fam_cache[author] = (self._epoch, pair[0], pair[1])
        return pair

    def _roster_codes(self, group: str) -> np.ndarray:
        """Epoch-cached member codes for a group, joined before the watermark."""
        cached = self._roster_cache.get(group)
        if cached is not None and cached[0] == self._epoch:
            return cached[1]
        members = self._roster.get(group)
        as_of = self.as_of
        codes = np.asarray(
            [self._code(m) for m, first in (members or {}).items() if first < as_of],
            dtype=np.int64,
        )
        self._roster_cache[group] = (self._epoch, codes)
        return codes

    def _names_array(self) -> np.ndarray:
        if self._names_np is not None and self._names_np[0] == self._epoch:
            return self._names_np[1]
        arr = np.asarray(self._eng_names)
        self._names_np = (self._epoch, arr)
        return arr

    def _pair_fam_map(self, author: str) -> dict[str, tuple[int, int]]:
        """Epoch-cached {viewer: (view seconds, assigned view seconds)}.

        Assigned views are a subset of views, so iterating the plain view
        counters covers every viewer with a live value. Zero rows are left
        out to keep the map small after window expiry.
        """
        cached = self._pairfam_cache.get(author)
        if cached is not None and cached[0] == self._epoch:
            return cached[1]
        cf = self._cut_fam()
        out: dict[str, tuple[int, int]] = {}
        by_viewer = self._pair_view.get(author)
        if by_viewer:
            by_va = self._pair_view_assigned.get(author) or {}
            for viewer, rs in by_viewer.items():
                v = rs.value_at(cf)
                rsa = by_va.get(viewer)
                va = rsa.value_at(cf) if rsa is not None else 0
                if v or va:
                    out[viewer] = (v, va)
        self._pairfam_cache[author] = (self._epoch, out)
        return out

    def _cand_counts(self, cand: str) -> tuple:
        """Epoch-cached (assigned, rejected, acted, commented, resigned)."""
        cached = self._cand_cache.get(cand)
        if cached is not None and cached[0] == self._epoch:
            return cached[1]
        cc = self._cut_cnt()
        counts = self._counts
        vals = []
        for cat in ("assigned", "rejected", "acted", "commented", "resigned"):
            rd = counts.get((cand, cat))
            vals.append(rd.count_at(cc) if rd is not None else 0)
        out = tuple(vals)
        self._cand_cache[cand] = (self._epoch, out)
        return out

    def pool(self, author: str, files, groups=()) -> list[str]:
        """Candidate pool mirroring the offline policy at the watermark."""
        code_parts: list[np.ndarray] = []
        cnt_parts: list[np.ndarray] = []
        for f in dict.fromkeys(files):
            codes, cnts = self._file_hist_counts(f)
            if len(codes):
                code_parts.append(codes)
                cnt_parts.append(cnts)
        fcodes, fcnts = self._fam_counts(author)
        if len(fcodes):
            code_parts.append(fcodes)
            cnt_parts.append(fcnts)
        for g in groups or ():
            rcodes = self._roster_codes(g)
            if len(rcodes):
                code_parts.append(rcodes)
                cnt_parts.append(np.zeros(len(rcodes), dtype=np.int64))
        if not code_parts:
            return []

        if len(code_parts) == 1:
            uniq, totals = code_parts[0], cnt_parts[0]
        else:
            # Codes are dense, so two O(n_engineers) bincounts beat a sort.
            # The unweighted one keeps zero-count roster members present.
            n_codes = len(self._eng_names)
            allc = np.concatenate(code_parts)
            member = np.bincount(allc, minlength=n_codes)
            tot = np.bincount(allc, weights=np.concatenate(cnt_parts), minlength=n_codes)
            uniq = member.nonzero()[0]
            totals = tot[uniq].astype(np.int64)

        ac = self._eng_code.get(author)
        if ac is not None:
            keep = uniq != ac
            if not keep.all():
                uniq = uniq[keep]
                totals = totals[keep]
        n = len(uniq)
        if n == 0:
            return []

        names = self._names_array()
        cap = self.pol.max_candidates
        if n > cap:
            # Partition by count; resolve the boundary count's ties by name.
            thr = np.partition(totals, n - cap)[n - cap]
            above = totals > thr
            need = cap - int(above.sum())
            if need > 0:
                at = (totals == thr).nonzero()[0]
                at_names = names[uniq[at]]
                if len(at) > need:
                    take = at[np.argpartition(at_names, need - 1)[:need]]
                else:
                    take = at
                sel = np.concatenate([above.nonzero()[0], take])
            else:
                sel = above.nonzero()[0]
            uniq = uniq[sel]
            totals = totals[sel]
        order = np.lexsort((names[uniq], -totals))
        names_py = self._eng_names
        return [names_py[c] for c in uniq[order].tolist()]

    def score_rows(self, author: str, files, cands: list[str]) -> np.ndarray:
        """Feature matrix for many candidates; row i equals features(cands[i])."""
        files_u = list(dict.fromkeys(files))
        auth_maps = [self._file_auth_map(f) for f in files_u]
        fam_map = self._pair_fam_map(author)
        fam_get = fam_map.get
        rows = []
        for cand in cands:
            fam, fam_a = fam_get(cand, _ZERO_PAIR)
            hit = None
            extra = None
            for m in auth_maps:
                rd = m.get(cand)
                if rd is not None:
                    if hit is None:
                        hit = rd
                    elif extra is None:
                        extra = [hit, rd]
                    else:
                        extra.append(rd)
            if extra is not None:
                seen: set = set()
                for rd in extra:
                    seen.update(rd.last)
                overlap = len(seen)
            else:
                overlap = len(hit.last) if hit is not None else 0
            ca, cr, cact, ccom, cres = self._cand_counts(cand)
            rows.append((fam, ca, cr, cact, fam_a, overlap, ccom, cres))
        return np.asarray(rows, dtype=np.float64)

    def workload_value(self, engineer: str, metric: str) -> float:
        if metric not in METRIC_KINDS:
            raise InvalidConfig(f"unknown workload metric {metric!r}")
        if metric == "time_spent_7d":
            rs = self._time_spent.get(engineer)
            return float(rs.value_at(self.as_of // DAY - WORKLOAD_WINDOW_DAYS)) if rs else 0.0
        if metric == "reviewer_activity_7d":
            rd = self._activity.get(engineer)
            return float(rd.count_at(self.as_of // DAY - WORKLOAD_WINDOW_DAYS)) if rd else 0.0
        meet = self._meetings.get(engineer)
        if meet is None:
            return 0.0
        ts_list, cum = meet
        lo = bisect_left(ts_list, self.as_of)
        hi = bisect_left(ts_list, self.as_of + WORKLOAD_WINDOW_DAYS * DAY)
        return float(cum[hi] - cum[lo])


def _model_version(model: RankerModel) -> str:
    import hashlib

    return hashlib.sha256(model_to_json(model).encode()).hexdigest()[:12]


def build_store(
    log: EventLog,
    as_of: int,
    *,
    pol: CandidatePolicy = DEFAULT_POLICY,
    model: RankerModel | None = None,
    pcfg: PolicyConfig | None = None,
) -> FeatureStore:
    """One pass over events before as_of into a queryable store."""
    store = FeatureStore(0, pol=pol, model=model, pcfg=pcfg)
    for ev in log.events:
        if ev.ts >= as_of:
            break
        store._ingest(ev)
    store.as_of = int(as_of)
    return store


def store_update(store: FeatureStore, ev: ReviewEvent) -> None:
    store.apply(ev)


def _require(request: dict, key: str, typ) -> object:
    v = request.get(key)
    if not isinstance(v, typ) or (typ is int and isinstance(v, bool)):
        raise InvalidConfig(f"request field {key!r} must be {typ.__name__}, got {v!r}")
    return v


def recommend(store: FeatureStore, request: dict) -> RecommendResult:
    """Rank reviewers for a live request against the store.

    A request the store has no basis to answer (author never seen and no
    file ever seen) yields an empty list with coverage False rather than
    an error; serving keeps running on novel inputs.
    """
    author = _require(request, "author", str)
    files = request.get("files")
    if not isinstance(files, (list, tuple)) or not files or not all(
        isinstance(f, str) for f in files
    ):
        raise InvalidConfig(f"request field 'files' must be a non-empty list of strings")
    k = _require(request, "k", int)
    if k < 1:
        raise InvalidConfig(f"request field 'k' must be >= 1, got {k}")
    if store.model is None:
        raise EmptyModel("store was built without a model; cannot recommend")

    diff_id = request.get("diff_id") or "live"
    answerable = author in store._known_engineers or any(
        f in store._known_files for f in files
    )
    if not answerable:
        return RecommendResult(RankedList(diff_id, ()), False, store.model_version)

    cands = store.pool(author, files, request.get("groups") or ())
    if not cands:
        return RecommendResult(RankedList(diff_id, ()), True, store.model_version)

    X = store.score_rows(author, files, cands)
    raw = predict(store.model, X)
    with np.errstate(over="ignore"):
        scores = (1.0 / (1.0 + np.exp(-raw))).tolist()
    order = sorted(range(len(cands)), key=lambda i: (-scores[i], cands[i]))
    # Entries past the rerank pool can never reach the returned top k.
    m = max(k, store.pcfg.rerank_k) if request.get("rerank") else k
    entries = tuple(RankedEntry(cands[i], scores[i]) for i in order[:m])
    rl = RankedList(diff_id, entries)

    if request.get("rerank"):
        metric = store.pcfg.workload_metric
        head = rl.entries[: store.pcfg.rerank_k]
        values = {e.engineer: store.workload_value(e.engineer, metric) for e in head}
        wl = WorkloadSnapshot(metric, store.as_of, values)
        rl = rerank_topk(rl, wl, store.pcfg)

    return RecommendResult(
        RankedList(rl.diff_id, rl.entries[:k]), True, store.model_version
    )
