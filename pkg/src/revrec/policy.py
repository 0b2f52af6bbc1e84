"""Workload measurement, top-k workload reranking, and bystander assignment.

Reranking divides each top-k score by e^(theta * normalized workload), with
workloads min-max normalized inside the k-pool. Only the order of the first
k entries can change; the set of the first k and everything after them are
preserved exactly, which is what keeps top-k accuracy identical to the
unreranked list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import EmptyList, InvalidConfig, OutOfRange
from .index import DAY, EventIndex
from .ranker import RankedEntry, RankedList
from .rng import child_rng

METRIC_KINDS = ("upcoming_meetings_7d", "reviewer_activity_7d", "time_spent_7d")

WINDOW_7D = 7 * DAY


@dataclass(frozen=True)
class WorkloadSnapshot:
    """Raw workloads per engineer at one instant.

    Engineers absent from values count as workload 0: an unknown reviewer is
    assumed free, which favors them under balancing.
    """

    metric_kind: str
    as_of: int
    values: dict[str, float]

    def get(self, engineer: str) -> float:
        return self.values.get(engineer, 0.0)


@dataclass(frozen=True)
class PolicyConfig:
    theta: float = 0.1
    rerank_k: int = 5
    workload_metric: str = "time_spent_7d"

    def validate(self) -> None:
        if not 0.0 <= float(self.theta) <= 1.0:
            raise InvalidConfig(f"theta must be in [0, 1], got {self.theta!r}")
        if not isinstance(self.rerank_k, int) or isinstance(self.rerank_k, bool) or self.rerank_k < 1:
            raise InvalidConfig(f"rerank_k must be a positive integer, got {self.rerank_k!r}")
        if self.workload_metric not in METRIC_KINDS:
            raise InvalidConfig(
                f"workload_metric must be one of {METRIC_KINDS}, got {self.workload_metric!r}"
            )


def workload_of(engineer: str, idx: EventIndex, kind: str, as_of: int) -> float:
    """Raw workload of one engineer at as_of.

    time_spent_7d and reviewer_activity_7d look back over [as_of-7d, as_of);
    upcoming_meetings_7d looks forward over [as_of, as_of+7d), since meeting
    timestamps are scheduled calendar data.
    """
    if kind == "time_spent_7d":
        return float(idx.view_seconds(engineer, as_of - WINDOW_7D, as_of))
    if kind == "reviewer_activity_7d":
        return float(idx.activity_distinct_diffs(engineer, as_of - WINDOW_7D, as_of))
    if kind == "upcoming_meetings_7d":
        return float(idx.meeting_seconds(engineer, as_of, as_of + WINDOW_7D))
    raise InvalidConfig(f"unknown workload metric {kind!r}")


def snapshot_for(engineers, idx: EventIndex, kind: str, as_of: int) -> WorkloadSnapshot:
    values = {e: workload_of(e, idx, kind, as_of) for e in engineers}
    return WorkloadSnapshot(kind, as_of, values)


def load_weight(workload_norm: float, theta: float) -> float:
    """e^(theta * workload_norm); the divisor applied to a candidate's score."""
    if not 0.0 <= workload_norm <= 1.0:
        raise OutOfRange(f"workload_norm must be in [0, 1], got {workload_norm!r}")
    if not 0.0 <= theta <= 1.0:
        raise OutOfRange(f"theta must be in [0, 1], got {theta!r}")
    return math.exp(theta * workload_norm)


def rerank_topk(rl: RankedList, wl: WorkloadSnapshot, cfg: PolicyConfig) -> RankedList:
    """Reorder the top-k by workload-adjusted score; leave the tail untouched.

    Head entries carry their adjusted scores in the output. Workloads are
    min-max normalized within the k-pool; an all-equal pool normalizes to
    zero and the order is unchanged.
    """
    cfg.validate()
    if not rl.entries:
        raise EmptyList(f"cannot rerank an empty list for {rl.diff_id!r}")
    k = min(cfg.rerank_k, len(rl.entries))
    head = rl.entries[:k]
    tail = rl.entries[k:]

    raw = [wl.get(e.engineer) for e in head]
    lo = min(raw)
    hi = max(raw)
    span = hi - lo
    if span > 0:
        norm = [(w - lo) / span for w in raw]
    else:
        norm = [0.0] * len(raw)

    adjusted = [
        replace(e, score=e.score / load_weight(n, cfg.theta))
        for e, n in zip(head, norm)
    ]
    adjusted.sort(key=lambda e: (-e.score, e.engineer))
    return RankedList(rl.diff_id, tuple(adjusted) + tail)


def assign_bystander_rnd(rl: RankedList, seed: int) -> str:
    """Uniform choice among the top min(3, n) entries, deterministic per seed."""
    if not rl.entries:
        raise EmptyList(f"cannot assign from an empty list for {rl.diff_id!r}")
    top = rl.entries[: min(3, len(rl.entries))]
    i = child_rng("bystander_rnd", seed).randrange(len(top))
    return top[i].engineer


def assign_bystander_wl(rl: RankedList, wl: WorkloadSnapshot, cfg: PolicyConfig) -> str:
    """The rank-1 entry after workload reranking."""
    return rerank_topk(rl, wl, cfg).entries[0].engineer
