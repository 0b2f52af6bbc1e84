"""Candidate generation and point-in-time feature extraction.

All quantities for a diff published at time t are computed from events with
ts < t only. View-time features use a 90-day window; count features use the
policy lookback (365 days by default) and count distinct diffs, not raw
events.
"""

from __future__ import annotations

import json
from bisect import bisect_left
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDataset, InvalidConfig
from .events import EventLog, ReviewEvent
from .index import DAY, EventIndex

FEATURE_NAMES = (
    "fam_view_90d_s",
    "assigned_count",
    "rejected_count",
    "acted_count",
    "fam_view_assigned_90d_s",
    "files_authored_overlap",
    "commented_count",
    "resigned_count",
)

DATASET_SCHEMA_VERSION = 1


@dataclass(frozen=True, slots=True)
class FeatureVector:
    fam_view_90d_s: int
    assigned_count: int
    rejected_count: int
    acted_count: int
    fam_view_assigned_90d_s: int
    files_authored_overlap: int
    commented_count: int
    resigned_count: int

    def as_tuple(self) -> tuple[int, ...]:
        return (
            self.fam_view_90d_s,
            self.assigned_count,
            self.rejected_count,
            self.acted_count,
            self.fam_view_assigned_90d_s,
            self.files_authored_overlap,
            self.commented_count,
            self.resigned_count,
        )


ZERO_FEATURES = FeatureVector(0, 0, 0, 0, 0, 0, 0, 0)


@dataclass(frozen=True)
class CandidatePolicy:
    lookback_days: int = 365
    familiarity_window_days: int = 90
    max_candidates: int = 100

    def validate(self) -> None:
        for name in ("lookback_days", "familiarity_window_days", "max_candidates"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
                raise InvalidConfig(f"{name} must be a positive integer, got {v!r}")


DEFAULT_POLICY = CandidatePolicy()


@dataclass(frozen=True, slots=True)
class Candidate:
    engineer: str
    features: FeatureVector
    label: int


@dataclass(frozen=True, slots=True)
class Query:
    diff_id: str
    publish_ts: int
    author: str
    candidates: tuple[Candidate, ...]


@dataclass(frozen=True)
class RankingDataset:
    """Labeled ranking queries plus pool-coverage bookkeeping.

    coverage is the share of diffs with at least one realized reviewer whose
    pool contained at least one of them; dropped counts diffs excluded for
    any reason (uncovered, or a pool of fewer than two candidates).
    """

    queries: tuple[Query, ...]
    coverage: float = 1.0
    dropped: int = 0

    def to_arrays(self):
        n = sum(len(q.candidates) for q in self.queries)
        X = np.empty((n, len(FEATURE_NAMES)), dtype=np.float64)
        y = np.empty(n, dtype=np.int8)
        qid = np.empty(n, dtype=np.int64)
        row = 0
        for qi, q in enumerate(self.queries):
            for c in q.candidates:
                X[row] = c.features.as_tuple()
                y[row] = c.label
                qid[row] = qi
                row += 1
        return X, y, qid


def _authored_codes(idx: EventIndex, files, lo: int, hi: int) -> list:
    parts = []
    for f in dict.fromkeys(files):
        entry = idx.file_authored(f)
        if entry is None:
            continue
        ts, eng, dif = entry
        a = int(np.searchsorted(ts, lo, side="left"))
        b = int(np.searchsorted(ts, hi, side="left"))
        if b > a:
            parts.append((eng[a:b] << 32) | dif[a:b])
    return parts


def _acted_codes(idx: EventIndex, files, lo: int, hi: int) -> list:
    parts = []
    for f in dict.fromkeys(files):
        entry = idx.file_acted(f)
        if entry is None:
            continue
        ts, eng, dif = entry
        a = int(np.searchsorted(ts, lo, side="left"))
        b = int(np.searchsorted(ts, hi, side="left"))
        if b > a:
            parts.append((eng[a:b] << 32) | dif[a:b])
    return parts


def _distinct_per_engineer(parts: list) -> dict[int, int]:
    """Distinct (engineer, diff) pair counts per engineer id from code arrays."""
    if not parts:
        return {}
    pairs = np.unique(np.concatenate(parts))
    engs = pairs >> 32
    uids, cnts = np.unique(engs, return_counts=True)
    return {int(u): int(c) for u, c in zip(uids, cnts)}


def candidates_for(diff: ReviewEvent, idx: EventIndex, pol: CandidatePolicy) -> list[str]:
    """Candidate reviewers for a diff, never including the author.

    Union of three sources: engineers who authored or acted on diffs sharing
    a file within the lookback, engineers with any interaction with this
    author within the familiarity window, and rosters of any assigned
    groups. Ordered by descending total interaction count (distinct touched
    diffs counted per file, plus author interactions), ties by ascending
    engineer id, truncated to max_candidates.
    """
    pol.validate()
    t = diff.ts
    author = diff.engineer
    lo = t - pol.lookback_days * DAY

    counts: dict[str, int] = {}
    name_of = idx.engineer_name
    for f in dict.fromkeys(diff.files):
        parts = _authored_codes(idx, (f,), lo, t) + _acted_codes(idx, (f,), lo, t)
        for ei, c in _distinct_per_engineer(parts).items():
            name = name_of(ei)
            counts[name] = counts.get(name, 0) + c

    fam_lo = t - pol.familiarity_window_days * DAY
    for viewer, ts_list in idx.viewers_of(author).items():
        c = bisect_left(ts_list, t) - bisect_left(ts_list, fam_lo)
        if c:
            counts[viewer] = counts.get(viewer, 0) + c

    for g in diff.assigned_groups or ():
        for m in idx.roster_members(g, t):
            counts.setdefault(m, 0)

    counts.pop(author, None)
    ordered = sorted(counts, key=lambda e: (-counts[e], e))
    return ordered[: pol.max_candidates]


def extract_features(
    diff: ReviewEvent,
    candidate: str,
    idx: EventIndex,
    pol: CandidatePolicy = DEFAULT_POLICY,
) -> FeatureVector:
    """The eight-feature vector for one (diff, candidate) pair as of diff.ts."""
    t = diff.ts
    author = diff.engineer
    fam_lo = t - pol.familiarity_window_days * DAY
    cnt_lo = t - pol.lookback_days * DAY

    overlap = 0
    ei = idx.engineer_id(candidate)
    if ei is not None:
        seen: set[int] = set()
        for f in dict.fromkeys(diff.files):
            entry = idx.file_authored(f)
            if entry is None:
                continue
            ts, eng, dif = entry
            a = int(np.searchsorted(ts, cnt_lo, side="left"))
            b = int(np.searchsorted(ts, t, side="left"))
            if b > a:
                sl = eng[a:b]
                seen.update(dif[a:b][sl == ei].tolist())
        overlap = len(seen)

    return FeatureVector(
        fam_view_90d_s=idx.pair_view_seconds(author, candidate, fam_lo, t),
        assigned_count=idx.count_distinct(candidate, "assigned", cnt_lo, t),
        rejected_count=idx.count_distinct(candidate, "rejected", cnt_lo, t),
        acted_count=idx.count_distinct(candidate, "acted", cnt_lo, t),
        fam_view_assigned_90d_s=idx.pair_view_assigned_seconds(author, candidate, fam_lo, t),
        files_authored_overlap=overlap,
        commented_count=idx.count_distinct(candidate, "commented", cnt_lo, t),
        resigned_count=idx.count_distinct(candidate, "resigned", cnt_lo, t),
    )


def features_for_candidates(
    diff: ReviewEvent,
    candidates: list[str],
    idx: EventIndex,
    pol: CandidatePolicy = DEFAULT_POLICY,
) -> list[FeatureVector]:
    """Batch variant of extract_features sharing the per-diff file scans.

    Must agree with extract_features exactly for every candidate.
    """
    t = diff.ts
    author = diff.engineer
    fam_lo = t - pol.familiarity_window_days * DAY
    cnt_lo = t - pol.lookback_days * DAY

    overlap_by_id = _distinct_per_engineer(_authored_codes(idx, diff.files, cnt_lo, t))

    out = []
    for cand in candidates:
        ei = idx.engineer_id(cand)
        overlap = overlap_by_id.get(ei, 0) if ei is not None else 0
        out.append(
            FeatureVector(
                fam_view_90d_s=idx.pair_view_seconds(author, cand, fam_lo, t),
                assigned_count=idx.count_distinct(cand, "assigned", cnt_lo, t),
                rejected_count=idx.count_distinct(cand, "rejected", cnt_lo, t),
                acted_count=idx.count_distinct(cand, "acted", cnt_lo, t),
                fam_view_assigned_90d_s=idx.pair_view_assigned_seconds(author, cand, fam_lo, t),
                files_authored_overlap=overlap,
                commented_count=idx.count_distinct(cand, "commented", cnt_lo, t),
                resigned_count=idx.count_distinct(cand, "resigned", cnt_lo, t),
            )
        )
    return out


def build_training_set(
    log: EventLog,
    pol: CandidatePolicy = DEFAULT_POLICY,
    *,
    index: EventIndex | None = None,
    diff_ids: list[str] | None = None,
    max_queries: int | None = None,
) -> RankingDataset:
    """Labeled ranking queries for every diff with a realized reviewer.

    A realized reviewer is anyone other than the author who commented on or
    accepted/rejected the diff. Queries keep candidates labeled 1 when
    realized; diffs whose realized reviewers all fall outside the pool, or
    whose pool has fewer than two candidates, are dropped. When max_queries
    is given, only the most recent eligible diffs are featurized.
    """
    pol.validate()
    idx = index if index is not None else EventIndex(log)
    ids = diff_ids if diff_ids is not None else idx.diffs_in_order()

    eligible = [(d, idx.realized_reviewers(d)) for d in ids]
    eligible = [(d, r) for d, r in eligible if r]
    if max_queries is not None and len(eligible) > max_queries:
        eligible = eligible[-max_queries:]

    queries: list[Query] = []
    total = 0
    covered = 0
    for diff_id, realized in eligible:
        pub = idx.publish(diff_id)
        total += 1
        pool = candidates_for(pub, idx, pol)
        pos = realized.intersection(pool)
        if pos:
            covered += 1
        # A query teaches nothing unless the pool mixes positives and
        # negatives; all-positive pools are as useless as all-negative.
        if not pos or len(pos) == len(pool) or len(pool) < 2:
            continue
        fvs = features_for_candidates(pub, pool, idx, pol)
        cands = tuple(
            Candidate(e, fv, 1 if e in pos else 0) for e, fv in zip(pool, fvs)
        )
        queries.append(Query(diff_id, pub.ts, pub.engineer, cands))

    if not queries:
        raise EmptyDataset("no usable ranking queries in log")
    coverage = covered / total
    return RankingDataset(tuple(queries), coverage, total - len(queries))


def dataset_to_jsonl(ds: RankingDataset) -> str:
    """One query per line; schema version embedded in every line."""
    lines = []
    for q in ds.queries:
        obj = {
            "schema_version": DATASET_SCHEMA_VERSION,
            "diff_id": q.diff_id,
            "publish_ts": q.publish_ts,
            "author": q.author,
            "candidates": [
                {
                    "engineer": c.engineer,
                    "features": dict(zip(FEATURE_NAMES, c.features.as_tuple())),
                    "label": c.label,
                }
                for c in q.candidates
            ],
        }
        lines.append(json.dumps(obj, separators=(",", ":")))
    return "\n".join(lines) + "\n"


def dataset_from_jsonl(text: str) -> RankingDataset:
    queries = []
    for line in text.splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        if obj.get("schema_version") != DATASET_SCHEMA_VERSION:
            raise EmptyDataset(
                f"unsupported dataset schema_version {obj.get('schema_version')!r}"
            )
        cands = tuple(
            Candidate(
                c["engineer"],
                FeatureVector(*(c["features"][n] for n in FEATURE_NAMES)),
                int(c["label"]),
            )
            for c in obj["candidates"]
        )
        queries.append(Query(obj["diff_id"], obj["publish_ts"], obj["author"], cands))
    if not queries:
        raise EmptyDataset("dataset file contains no queries")
    return RankingDataset(tuple(queries))
