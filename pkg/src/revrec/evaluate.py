"""Historical backtests and review-process metrics.

The backtest replays history: for each held-out diff it rebuilds the
candidate pool and features as of the publish instant, ranks, optionally
workload-reranks, and checks the recommendations against the reviewers who
actually showed up. Accuracy deltas are reported in percentage points and
workload deltas in percent.
"""

from __future__ import annotations

import hashlib
import json
import math
import statistics
from dataclasses import dataclass, asdict

import numpy as np

from .errors import (
    EmptyInput,
    EmptySplit,
    InvalidConfig,
    MismatchedEvalSets,
    NoTerminalEvent,
)
from .events import EventLog
from .featurize import CandidatePolicy, DEFAULT_POLICY, candidates_for, features_for_candidates
from .index import EventIndex
from .policy import PolicyConfig, WorkloadSnapshot, rerank_topk, workload_of
from .ranker import RankedEntry, RankedList, RankerModel, baseline_scores, predict

BASELINE_V1 = "baseline_v1"


@dataclass(frozen=True)
class BacktestReport:
    condition: str
    n_diffs: int
    top1: float
    top2: float
    top3: float
    top5: float
    mrr: float
    median_top1_workload: float
    median_top3_workload: float
    coverage: float
    eval_fingerprint: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "BacktestReport":
        obj = json.loads(text)
        return cls(**obj)

    def to_text(self) -> str:
        rows = [
            ("condition", self.condition),
            ("n_diffs", str(self.n_diffs)),
            ("top1", f"{self.top1:.4f}"),
            ("top2", f"{self.top2:.4f}"),
            ("top3", f"{self.top3:.4f}"),
            ("top5", f"{self.top5:.4f}"),
            ("mrr", f"{self.mrr:.4f}"),
            ("median_top1_workload", f"{self.median_top1_workload:.2f}"),
            ("median_top3_workload", f"{self.median_top3_workload:.2f}"),
            ("coverage", f"{self.coverage:.4f}"),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def topn_accuracy(recommendations: list[RankedList], realized: dict[str, set[str]], n: int) -> float:
    """Fraction of diffs whose top-n contains at least one realized reviewer."""
    if n < 1:
        raise InvalidConfig(f"n must be >= 1, got {n!r}")
    if not recommendations:
        raise EmptyInput("no recommendations to score")
    hits = 0
    for rl in recommendations:
        actual = realized.get(rl.diff_id, set())
        top = rl.entries[:n]
        if any(e.engineer in actual for e in top):
            hits += 1
    return hits / len(recommendations)


def mrr(recommendations: list[RankedList], realized: dict[str, set[str]]) -> float:
    """Mean reciprocal rank of the first realized reviewer; 0 when absent."""
    if not recommendations:
        raise EmptyInput("no recommendations to score")
    terms = []
    for rl in recommendations:
        actual = realized.get(rl.diff_id, set())
        rr = 0.0
        for pos, e in enumerate(rl.entries, start=1):
            if e.engineer in actual:
                rr = 1.0 / pos
                break
        terms.append(rr)
    return math.fsum(terms) / len(terms)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # exp overflow saturates to exactly 0, the correct limit
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def _fingerprint(diff_ids: list[str]) -> str:
    h = hashlib.sha256()
    for d in diff_ids:
        h.update(d.encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()[:16]


def temporal_split(idx: EventIndex, split: float) -> tuple[list[str], list[str]]:
    """Diff ids partitioned by publish order; first `split` fraction trains."""
    if not 0.0 < split < 1.0:
        raise InvalidConfig(f"split must be in (0, 1), got {split!r}")
    ids = idx.diffs_in_order()
    cut = int(len(ids) * split)
    train, evali = ids[:cut], ids[cut:]
    if not evali:
        raise EmptySplit(f"split {split} leaves no evaluation diffs")
    return train, evali


def backtest(
    log: EventLog,
    model,
    cfg: PolicyConfig | None,
    split: float,
    *,
    pol: CandidatePolicy = DEFAULT_POLICY,
    index: EventIndex | None = None,
    condition: str | None = None,
    workload_metric: str | None = None,
) -> BacktestReport:
    """Evaluate a ranker (RankerModel or the baseline_v1 marker) on the
    held-out temporal tail of the log.

    Model scores pass through a sigmoid before any reranking so the policy
    divides probability-like positives. When cfg is given, the top-k is
    workload-reranked with a snapshot taken as of each diff's publish time.
    Workload columns always report cfg's metric (or workload_metric when
    cfg is None).
    """
    idx = index if index is not None else EventIndex(log)
    _, eval_ids = temporal_split(idx, split)

    metric = workload_metric
    if cfg is not None:
        cfg.validate()
        metric = cfg.workload_metric
    if metric is None:
        metric = "time_spent_7d"

    eval_diffs = [(d, idx.realized_reviewers(d)) for d in eval_ids]
    eval_diffs = [(d, r) for d, r in eval_diffs if r]
    if not eval_diffs:
        raise EmptySplit("no evaluation diffs with realized reviewers")

    if condition is None:
        if model == BASELINE_V1:
            condition = "v1"
        else:
            condition = "v2+wl" if cfg is not None else "v2"

    recs: list[RankedList] = []
    realized_map: dict[str, set[str]] = {}
    top1_wl: list[float] = []
    top3_wl: list[float] = []
    covered = 0

    for diff_id, realized in eval_diffs:
        pub = idx.publish(diff_id)
        realized_map[diff_id] = realized
        pool = candidates_for(pub, idx, pol)
        if not pool:
            recs.append(RankedList(diff_id, ()))
            continue
        covered += 1

        if model == BASELINE_V1:
            scores = baseline_scores(pub, pool, idx)
        else:
            fvs = features_for_candidates(pub, pool, idx, pol)
            X = np.asarray([fv.as_tuple() for fv in fvs], dtype=np.float64)
            scores = _sigmoid(predict(model, X)).tolist()

        entries = sorted(
            (RankedEntry(e, float(s)) for e, s in zip(pool, scores)),
            key=lambda r: (-r.score, r.engineer),
        )
        rl = RankedList(diff_id, tuple(entries))

        if cfg is not None:
            k = min(cfg.rerank_k, len(rl.entries))
            values = {
                e.engineer: workload_of(e.engineer, idx, metric, pub.ts)
                for e in rl.entries[:k]
            }
            rl = rerank_topk(rl, WorkloadSnapshot(metric, pub.ts, values), cfg)

        recs.append(rl)
        top = rl.entries[:3]
        wls = [workload_of(e.engineer, idx, metric, pub.ts) for e in top]
        top1_wl.append(wls[0])
        top3_wl.append(math.fsum(wls) / len(wls))

    return BacktestReport(
        condition=condition,
        n_diffs=len(eval_diffs),
        top1=topn_accuracy(recs, realized_map, 1),
        top2=topn_accuracy(recs, realized_map, 2),
        top3=topn_accuracy(recs, realized_map, 3),
        top5=topn_accuracy(recs, realized_map, 5),
        mrr=mrr(recs, realized_map),
        median_top1_workload=float(statistics.median(top1_wl)) if top1_wl else 0.0,
        median_top3_workload=float(statistics.median(top3_wl)) if top3_wl else 0.0,
        coverage=covered / len(eval_diffs),
        eval_fingerprint=_fingerprint([d for d, _ in eval_diffs]),
    )


@dataclass(frozen=True)
class ReportDelta:
    """Deltas b vs a: accuracies in percentage points, workloads in percent."""

    top1_points: float
    top2_points: float
    top3_points: float
    top5_points: float
    mrr_delta: float
    median_top1_workload_pct: float | None
    median_top3_workload_pct: float | None
    coverage_points: float

    def to_text(self) -> str:
        def pts(v: float) -> str:
            return f"{v:+.2f} points"

        def pct(v: float | None) -> str:
            return "n/a" if v is None else f"{v:+.2f}%"

        rows = [
            ("top1", pts(self.top1_points)),
            ("top2", pts(self.top2_points)),
            ("top3", pts(self.top3_points)),
            ("top5", pts(self.top5_points)),
            ("mrr", f"{self.mrr_delta:+.4f}"),
            ("median_top1_workload", pct(self.median_top1_workload_pct)),
            ("median_top3_workload", pct(self.median_top3_workload_pct)),
            ("coverage", pts(self.coverage_points)),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"


def compare_reports(a: BacktestReport, b: BacktestReport) -> ReportDelta:
    """Deltas of b relative to a; both must cover the same evaluation diffs."""
    if a.eval_fingerprint != b.eval_fingerprint or a.n_diffs != b.n_diffs:
        raise MismatchedEvalSets(
            f"reports cover different evaluation sets: {a.condition!r} vs {b.condition!r}"
        )

    def wl_pct(x: float, y: float) -> float | None:
        if x == 0:
            return None
        return (y - x) / x * 100.0

    return ReportDelta(
        top1_points=(b.top1 - a.top1) * 100.0,
        top2_points=(b.top2 - a.top2) * 100.0,
        top3_points=(b.top3 - a.top3) * 100.0,
        top5_points=(b.top5 - a.top5) * 100.0,
        mrr_delta=b.mrr - a.mrr,
        median_top1_workload_pct=wl_pct(a.median_top1_workload, b.median_top1_workload),
        median_top3_workload_pct=wl_pct(a.median_top3_workload, b.median_top3_workload),
        coverage_points=(b.coverage - a.coverage) * 100.0,
    )


IN_REVIEW = "IN_REVIEW"
REWORK = "REWORK"


def compute_time_in_review(events) -> int:
    """Seconds a diff spent waiting for or under review.

    publish starts IN_REVIEW; a reject moves to REWORK (author's time, not
    counted); a DiffUpdated returns to IN_REVIEW; the first accept or
    DiffClosed ends the clock. Plain comments never drive transitions since
    their intent is not recoverable from the log.
    """
    evs = sorted(events, key=lambda e: e.ts)
    if not evs:
        raise EmptyInput("no events for diff")
    pub = next((e for e in evs if e.kind == "DiffPublished"), None)
    if pub is None:
        raise EmptyInput("diff has no DiffPublished event")

    state = IN_REVIEW
    since = pub.ts
    total = 0
    for ev in evs:
        if ev.ts < pub.ts or ev is pub:
            continue
        if ev.kind == "Action" and ev.act == "accept":
            if state == IN_REVIEW:
                total += ev.ts - since
            return total
        if ev.kind == "DiffClosed":
            if state == IN_REVIEW:
                total += ev.ts - since
            return total
        if ev.kind == "Action" and ev.act == "reject":
            if state == IN_REVIEW:
                total += ev.ts - since
                state = REWORK
        elif ev.kind == "DiffUpdated":
            if state == REWORK:
                state = IN_REVIEW
                since = ev.ts
    raise NoTerminalEvent(f"diff {pub.diff_id!r} has no accept or DiffClosed event")
