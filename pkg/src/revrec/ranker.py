"""Learn-to-rank training and scoring for reviewer recommendation.

The trainer is a LambdaMART: gradient-boosted regression trees driven by
pairwise lambda gradients weighted by the NDCG change of swapping a
discordant pair. For a query with candidate scores s and binary labels, each
pair (i positive, j negative) contributes

    rho      = 1 / (1 + exp(sigma * (s_i - s_j)))
    lambda_i += sigma * |dNDCG@k(i, j)| * rho
    lambda_j -= sigma * |dNDCG@k(i, j)| * rho
    w        = sigma^2 * |dNDCG@k(i, j)| * rho * (1 - rho)

where |dNDCG@k| uses the rank discounts 1/log2(1 + rank), zero beyond the
truncation, normalized by the query's ideal DCG. Trees are fit to the
lambdas with second-order (Newton) leaf values sum(lambda)/sum(w).

Everything here is plain numpy and purely sequential, so results are
identical for any thread count and any fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from heapq import heappop, heappush

import numpy as np

from .errors import (
    DataError,
    DegenerateQuery,
    EmptyModel,
    FeatureMismatch,
    InvalidHyperParams,
    NoCandidates,
)
from .featurize import FEATURE_NAMES, FeatureVector, RankingDataset
from .index import EventIndex

MODEL_SCHEMA_VERSION = 1

MAX_BINS = 255
# Stabilizer for Newton leaf values and split gains; not a tuning knob.
HESS_EPS = 1e-9
MIN_GAIN = 1e-12


@dataclass(frozen=True)
class HyperParams:
    n_trees: int = 100
    learning_rate: float = 0.1
    max_leaves: int = 16
    min_samples_leaf: int = 5
    ndcg_truncation: int = 5
    sigma: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if not isinstance(self.n_trees, int) or self.n_trees < 0:
            raise InvalidHyperParams(f"n_trees must be a non-negative integer, got {self.n_trees!r}")
        if not self.learning_rate > 0:
            raise InvalidHyperParams(f"learning_rate must be > 0, got {self.learning_rate!r}")
        if not isinstance(self.max_leaves, int) or self.max_leaves < 2:
            raise InvalidHyperParams(f"max_leaves must be an integer >= 2, got {self.max_leaves!r}")
        if not isinstance(self.min_samples_leaf, int) or self.min_samples_leaf < 1:
            raise InvalidHyperParams(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf!r}")
        if not isinstance(self.ndcg_truncation, int) or self.ndcg_truncation < 1:
            raise InvalidHyperParams(f"ndcg_truncation must be >= 1, got {self.ndcg_truncation!r}")
        if not self.sigma > 0:
            raise InvalidHyperParams(f"sigma must be > 0, got {self.sigma!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise InvalidHyperParams(f"seed must be an integer, got {self.seed!r}")


class Tree:
    """One regression tree as flat parallel arrays.

    feature[i] is -1 for leaves, which keep left == right == i so vectorized
    descent can treat them as fixed points. Thresholds are real feature
    values; descent goes right when value > threshold.
    """

    __slots__ = ("feature", "threshold", "left", "right", "leaf_value")

    def __init__(self, feature, threshold, left, right, leaf_value):
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.leaf_value = np.asarray(leaf_value, dtype=np.float64)

    def to_nodes(self) -> list[dict]:
        nodes = []
        for i in range(len(self.feature)):
            f = int(self.feature[i])
            if f < 0:
                nodes.append({"leaf_value": float(self.leaf_value[i])})
            else:
                nodes.append(
                    {
                        "feature": FEATURE_NAMES[f],
                        "threshold": float(self.threshold[i]),
                        "left": int(self.left[i]),
                        "right": int(self.right[i]),
                    }
                )
        return nodes

    @classmethod
    def from_nodes(cls, nodes: list[dict], feature_names) -> "Tree":
        n = len(nodes)
        feature = np.full(n, -1, dtype=np.int32)
        threshold = np.zeros(n, dtype=np.float64)
        left = np.arange(n, dtype=np.int32)
        right = np.arange(n, dtype=np.int32)
        leaf = np.zeros(n, dtype=np.float64)
        name_to_i = {name: i for i, name in enumerate(feature_names)}
        for i, node in enumerate(nodes):
            if "leaf_value" in node:
                leaf[i] = float(node["leaf_value"])
            else:
                feature[i] = name_to_i[node["feature"]]
                threshold[i] = float(node["threshold"])
                left[i] = int(node["left"])
                right[i] = int(node["right"])
        return cls(feature, threshold, left, right, leaf)


@dataclass
class RankerModel:
    trees: tuple[Tree, ...]
    learning_rate: float
    feature_names: tuple[str, ...]
    training_meta: dict = field(default_factory=dict)


@dataclass(frozen=True, slots=True)
class RankedEntry:
    engineer: str
    score: float


@dataclass(frozen=True)
class RankedList:
    diff_id: str
    entries: tuple[RankedEntry, ...]


# -- NDCG machinery ---------------------------------------------------------


def _query_starts(qid: np.ndarray) -> np.ndarray:
    n_queries = int(qid[-1]) + 1 if len(qid) else 0
    counts = np.bincount(qid, minlength=n_queries)
    starts = np.zeros(n_queries + 1, dtype=np.int64)
    np.cumsum(counts, out=starts[1:])
    return starts


def _ranks_from_scores(scores, qid, starts) -> np.ndarray:
    """0-based rank of each row within its query: score desc, row order asc."""
    n = len(scores)
    order = np.lexsort((np.arange(n), -scores, qid))
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = np.arange(n) - starts[qid[order]]
    return ranks


def _discounts(ranks, k) -> np.ndarray:
    d = np.zeros(len(ranks), dtype=np.float64)
    mask = ranks < k
    d[mask] = 1.0 / np.log2(2.0 + ranks[mask])
    return d


def _ideal_dcg(y, qid, n_queries, k) -> np.ndarray:
    npos = np.bincount(qid, weights=y.astype(np.float64), minlength=n_queries)
    top = np.minimum(npos.astype(np.int64), k)
    # Prefix sums of the discount series cover every possible positive count.
    m = int(top.max()) if len(top) else 0
    prefix = np.zeros(m + 1, dtype=np.float64)
    if m:
        prefix[1:] = np.cumsum(1.0 / np.log2(2.0 + np.arange(m)))
    return prefix[top]


def ndcg_at_k(scores, y, qid, k) -> float:
    """Mean NDCG@k over queries; binary gains, ties broken by row order."""
    qid = np.asarray(qid, dtype=np.int64)
    y = np.asarray(y, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    starts = _query_starts(qid)
    n_queries = len(starts) - 1
    ranks = _ranks_from_scores(scores, qid, starts)
    disc = _discounts(ranks, k)
    dcg = np.bincount(qid, weights=disc * y, minlength=n_queries)
    ideal = _ideal_dcg(y, qid, n_queries, k)
    valid = ideal > 0
    if not valid.any():
        return 0.0
    return float(np.mean(dcg[valid] / ideal[valid]))


# -- pairwise gradients -----------------------------------------------------


def build_pairs(y: np.ndarray, qid: np.ndarray):
    """Index arrays (pos_rows, neg_rows, pair_qid) of label-discordant pairs."""
    pi_parts, pj_parts, pq_parts = [], [], []
    starts = _query_starts(qid)
    for q in range(len(starts) - 1):
        lo, hi = starts[q], starts[q + 1]
        rows = np.arange(lo, hi)
        pos = rows[y[lo:hi] > 0]
        neg = rows[y[lo:hi] <= 0]
        if len(pos) == 0 or len(neg) == 0:
            continue
        grid_p = np.repeat(pos, len(neg))
        grid_n = np.tile(neg, len(pos))
        pi_parts.append(grid_p)
        pj_parts.append(grid_n)
        pq_parts.append(np.full(len(grid_p), q, dtype=np.int64))
    if not pi_parts:
        return (
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.int64),
        )
    return np.concatenate(pi_parts), np.concatenate(pj_parts), np.concatenate(pq_parts)


def pairwise_gradients(scores, y, qid, *, k, sigma):
    """Per-row lambda gradients and Hessian weights for the current scores.

    Returns (grad, hess): grad points in the direction each score should
    move, hess is the corresponding second-order weight.
    """
    qid = np.asarray(qid, dtype=np.int64)
    y_arr = np.asarray(y, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    starts = _query_starts(qid)
    n_queries = len(starts) - 1
    pi, pj, pq = build_pairs(y_arr, qid)
    ideal = _ideal_dcg(y_arr, qid, n_queries, k)
    inv_ideal = np.where(ideal > 0, 1.0 / np.where(ideal > 0, ideal, 1.0), 0.0)
    return _gradients_for_pairs(scores, qid, starts, pi, pj, pq, inv_ideal, k, sigma)


def _gradients_for_pairs(scores, qid, starts, pi, pj, pq, inv_ideal, k, sigma):
    n = len(scores)
    ranks = _ranks_from_scores(scores, qid, starts)
    disc = _discounts(ranks, k)
    delta = np.abs(disc[pi] - disc[pj]) * inv_ideal[pq]
    # exp overflow saturates rho to exactly 0, which is the right limit
    with np.errstate(over="ignore"):
        rho = 1.0 / (1.0 + np.exp(sigma * (scores[pi] - scores[pj])))
    lam = sigma * delta * rho
    w = sigma * sigma * delta * rho * (1.0 - rho)
    grad = np.bincount(pi, weights=lam, minlength=n) - np.bincount(pj, weights=lam, minlength=n)
    hess = np.bincount(pi, weights=w, minlength=n) + np.bincount(pj, weights=w, minlength=n)
    return grad, hess


# -- histogram tree fitting -------------------------------------------------


def _bin_features(X: np.ndarray):
    """Quantile-bin each column; thresholds are real data values.

    Returns (codes uint8/uint16 matrix, cuts per column). Code c means
    value <= cuts[c] for c < len(cuts), and value > cuts[-1] at c == len(cuts),
    so a split at code c corresponds to the real predicate value > cuts[c].
    """
    n, m = X.shape
    codes = np.empty((n, m), dtype=np.uint16)
    cuts_per_col = []
    for j in range(m):
        col = X[:, j]
        uniq = np.unique(col)
        if len(uniq) <= MAX_BINS + 1:
            cuts = uniq[:-1] if len(uniq) > 1 else uniq[:0]
        else:
            qs = np.linspace(0.0, 1.0, MAX_BINS + 2)[1:-1]
            cuts = np.unique(np.quantile(col, qs, method="lower"))
        codes[:, j] = np.searchsorted(cuts, col, side="left")
        cuts_per_col.append(cuts.astype(np.float64))
    return codes, cuts_per_col


class _NodeStats:
    __slots__ = ("rows", "gsum", "hsum", "hist_g", "hist_h", "hist_c", "best")

    def __init__(self, rows, gsum, hsum, hist_g, hist_h, hist_c):
        self.rows = rows
        self.gsum = gsum
        self.hsum = hsum
        self.hist_g = hist_g
        self.hist_h = hist_h
        self.hist_c = hist_c
        self.best = None  # (gain, feature, code)


def _node_histograms(codes, rows, grad, hess, n_bins):
    m = codes.shape[1]
    g = np.empty((m, n_bins), dtype=np.float64)
    h = np.empty((m, n_bins), dtype=np.float64)
    c = np.empty((m, n_bins), dtype=np.int64)
    sub_codes = codes[rows]
    sub_g = grad[rows]
    sub_h = hess[rows]
    for j in range(m):
        col = sub_codes[:, j]
        g[j] = np.bincount(col, weights=sub_g, minlength=n_bins)
        h[j] = np.bincount(col, weights=sub_h, minlength=n_bins)
        c[j] = np.bincount(col, minlength=n_bins)
    return g, h, c


def _best_split(stats: _NodeStats, min_samples_leaf: int):
    """Highest-gain (feature, code) split or None; deterministic tie-break."""
    gp, hp = stats.gsum, stats.hsum
    parent = gp * gp / (hp + HESS_EPS)
    best_gain = MIN_GAIN
    best = None
    m, n_bins = stats.hist_g.shape
    for j in range(m):
        cl = np.cumsum(stats.hist_c[j][:-1])
        total = stats.hist_c[j].sum()
        valid = (cl >= min_samples_leaf) & (total - cl >= min_samples_leaf)
        if not valid.any():
            continue
        gl = np.cumsum(stats.hist_g[j][:-1])
        hl = np.cumsum(stats.hist_h[j][:-1])
        gr = gp - gl
        hr = hp - hl
        gain = gl * gl / (hl + HESS_EPS) + gr * gr / (hr + HESS_EPS) - parent
        gain[~valid] = -np.inf
        c = int(np.argmax(gain))
        g = float(gain[c])
        if g > best_gain:
            best_gain = g
            best = (g, j, c)
    return best


def _fit_tree(codes, cuts, grad, hess, hp: HyperParams, gain_accum: np.ndarray) -> tuple[Tree, np.ndarray]:
    """Best-first histogram tree on binned features; returns tree and per-row leaf ids."""
    n = len(grad)
    n_bins = MAX_BINS + 1

    feature = [-1]
    threshold = [0.0]
    left = [0]
    right = [0]

    rows0 = np.arange(n, dtype=np.int64)
    g0, h0, c0 = _node_histograms(codes, rows0, grad, hess, n_bins)
    root = _NodeStats(rows0, float(grad.sum()), float(hess.sum()), g0, h0, c0)
    root.best = _best_split(root, hp.min_samples_leaf)
    nodes: dict[int, _NodeStats] = {0: root}

    heap: list[tuple[float, int]] = []
    if root.best is not None:
        heappush(heap, (-root.best[0], 0))

    n_leaves = 1
    while heap and n_leaves < hp.max_leaves:
        _, node_id = heappop(heap)
        stats = nodes[node_id]
        if stats.best is None:
            continue
        gain, j, code = stats.best
        gain_accum[j] += gain

        col = codes[stats.rows, j]
        go_left = col <= code
        rows_l = stats.rows[go_left]
        rows_r = stats.rows[~go_left]

        # Histogram subtraction: compute the smaller child, derive the other.
        if len(rows_l) <= len(rows_r):
            gl, hl, cl = _node_histograms(codes, rows_l, grad, hess, n_bins)
            gr, hr, cr = stats.hist_g - gl, stats.hist_h - hl, stats.hist_c - cl
        else:
            gr, hr, cr = _node_histograms(codes, rows_r, grad, hess, n_bins)
            gl, hl, cl = stats.hist_g - gr, stats.hist_h - hr, stats.hist_c - cr

        left_id = len(feature)
        right_id = left_id + 1
        feature[node_id] = j
        threshold[node_id] = float(cuts[j][code])
        left[node_id] = left_id
        right[node_id] = right_id
        feature.extend((-1, -1))
        threshold.extend((0.0, 0.0))
        left.extend((left_id, right_id))
        right.extend((left_id, right_id))

        child_l = _NodeStats(rows_l, float(grad[rows_l].sum()), float(hess[rows_l].sum()), gl, hl, cl)
        child_r = _NodeStats(rows_r, float(grad[rows_r].sum()), float(hess[rows_r].sum()), gr, hr, cr)
        nodes[left_id] = child_l
        nodes[right_id] = child_r
        del nodes[node_id]
        n_leaves += 1

        for child_id, child in ((left_id, child_l), (right_id, child_r)):
            if len(child.rows) >= 2 * hp.min_samples_leaf:
                child.best = _best_split(child, hp.min_samples_leaf)
                if child.best is not None:
                    heappush(heap, (-child.best[0], child_id))

    leaf_value = np.zeros(len(feature), dtype=np.float64)
    leaf_of_row = np.zeros(n, dtype=np.int32)
    for node_id, stats in nodes.items():
        leaf_value[node_id] = stats.gsum / (stats.hsum + HESS_EPS)
        leaf_of_row[stats.rows] = node_id

    tree = Tree(feature, threshold, left, right, leaf_value)
    return tree, leaf_of_row


# -- training ---------------------------------------------------------------


def train_lambdamart(ds: RankingDataset, hp: HyperParams = HyperParams()) -> RankerModel:
    """Boost hp.n_trees trees against the NDCG-weighted pairwise objective.

    Deterministic for a fixed config regardless of thread count: every
    reduction happens in fixed array order.
    """
    hp.validate()
    X, y8, qid = ds.to_arrays()
    if len(X) == 0:
        raise DegenerateQuery("empty dataset")
    y = y8.astype(np.float64)

    starts = _query_starts(qid)
    for q in range(len(starts) - 1):
        lo, hi = starts[q], starts[q + 1]
        labels = y[lo:hi]
        if labels.min() == labels.max():
            raise DegenerateQuery(
                f"query {ds.queries[q].diff_id!r} has all-equal labels; filter before training"
            )

    k = hp.ndcg_truncation
    sigma = hp.sigma
    n_queries = len(starts) - 1
    pi, pj, pq = build_pairs(y, qid)
    ideal = _ideal_dcg(y, qid, n_queries, k)
    inv_ideal = np.where(ideal > 0, 1.0 / np.where(ideal > 0, ideal, 1.0), 0.0)

    codes, cuts = _bin_features(X)
    scores = np.zeros(len(X), dtype=np.float64)
    gain_accum = np.zeros(len(FEATURE_NAMES), dtype=np.float64)
    trees: list[Tree] = []

    for _ in range(hp.n_trees):
        grad, hess = _gradients_for_pairs(scores, qid, starts, pi, pj, pq, inv_ideal, k, sigma)
        tree, leaf_of_row = _fit_tree(codes, cuts, grad, hess, hp, gain_accum)
        trees.append(tree)
        scores += hp.learning_rate * tree.leaf_value[leaf_of_row]

    final_ndcg = ndcg_at_k(scores, y, qid, k)
    meta = {
        "seed": hp.seed,
        "n_queries": n_queries,
        "final_train_ndcg": final_ndcg,
        "split_gains": {
            FEATURE_NAMES[j]: float(gain_accum[j]) for j in range(len(FEATURE_NAMES))
        },
    }
    return RankerModel(tuple(trees), hp.learning_rate, tuple(FEATURE_NAMES), meta)


# -- scoring ----------------------------------------------------------------


class _FlatForest:
    """All trees concatenated into shared node arrays for batch descent.

    Leaves are rewritten as nodes that always compare against +inf and
    point left at themselves, so one unconditional descent step is valid
    at any depth and the hot loop needs no leaf mask.
    """

    __slots__ = ("feature", "threshold", "left", "right", "leaf", "roots", "depth", "_offsets")

    def __init__(self, trees: tuple[Tree, ...]):
        feats, thrs, lefts, rights, leaves, roots = [], [], [], [], [], []
        offset = 0
        depth = 0
        for t in trees:
            n = len(t.feature)
            roots.append(offset)
            is_leaf = t.feature < 0
            feats.append(np.where(is_leaf, 0, t.feature).astype(np.int64))
            thrs.append(np.where(is_leaf, np.inf, t.threshold))
            lefts.append((t.left + offset).astype(np.int64))
            rights.append((t.right + offset).astype(np.int64))
            leaves.append(t.leaf_value)
            d = np.zeros(n, dtype=np.int32)
            for i in range(n):
                if not is_leaf[i]:
                    d[t.left[i]] = d[i] + 1
                    d[t.right[i]] = d[i] + 1
            depth = max(depth, int(d.max()) if n else 0)
            offset += n
        self.feature = np.concatenate(feats) if feats else np.empty(0, np.int64)
        self.threshold = np.concatenate(thrs) if thrs else np.empty(0)
        self.left = np.concatenate(lefts) if lefts else np.empty(0, np.int64)
        self.right = np.concatenate(rights) if rights else np.empty(0, np.int64)
        self.leaf = np.concatenate(leaves) if leaves else np.empty(0)
        self.roots = np.asarray(roots, dtype=np.int64)
        self.depth = depth
        self._offsets: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}

    def offsets(self, n: int, n_features: int) -> tuple[np.ndarray, np.ndarray]:
        """Precomputed descent vectors for a batch shape.

        Row offsets into the flattened matrix (one block of rows per tree)
        and the starting positions at each root. Both are reused verbatim
        across requests, so the caller must copy before mutating.
        """
        key = (n, n_features)
        hit = self._offsets.get(key)
        if hit is None:
            base = np.tile(np.arange(n, dtype=np.int64) * n_features, len(self.roots))
            hit = (base, np.repeat(self.roots, n))
            if len(self._offsets) > 256:
                self._offsets.clear()
            self._offsets[key] = hit
        return hit


def _forest_of(model: RankerModel) -> _FlatForest:
    cached = getattr(model, "_forest_cache", None)
    if cached is None:
        cached = _FlatForest(model.trees)
        model._forest_cache = cached
    return cached


def predict(model: RankerModel, X: np.ndarray) -> np.ndarray:
    """Vectorized ensemble scores for a feature matrix.

    Every tree descends in lockstep over a flat (trees * rows) position
    vector; each depth step is a fixed handful of 1-D gathers.
    """
    if tuple(model.feature_names) != FEATURE_NAMES:
        raise FeatureMismatch(
            f"model features {model.feature_names!r} do not match {FEATURE_NAMES!r}"
        )
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = len(X)
    if n == 0 or not model.trees:
        return np.zeros(n, dtype=np.float64)
    forest = _forest_of(model)
    n_trees = len(model.trees)
    xflat = X.ravel()
    row_base, pos = forest.offsets(n, X.shape[1])
    for _ in range(forest.depth):
        vals = xflat[row_base + forest.feature[pos]]
        pos = np.where(vals > forest.threshold[pos], forest.right[pos], forest.left[pos])
    return model.learning_rate * forest.leaf[pos].reshape(n_trees, n).sum(axis=0)


def score(model: RankerModel, fv: FeatureVector) -> float:
    """Ensemble score of one feature vector; pure function of its inputs."""
    return float(predict(model, np.asarray([fv.as_tuple()], dtype=np.float64))[0])


def rank(model: RankerModel, diff_id: str, candidates) -> RankedList:
    """Order (engineer, FeatureVector) candidates by score desc, id asc."""
    cands = list(candidates)
    if not cands:
        raise NoCandidates(f"no candidates to rank for {diff_id!r}")
    X = np.asarray([fv.as_tuple() for _, fv in cands], dtype=np.float64)
    scores = predict(model, X)
    entries = sorted(
        (RankedEntry(e, float(s)) for (e, _), s in zip(cands, scores)),
        key=lambda r: (-r.score, r.engineer),
    )
    return RankedList(diff_id, tuple(entries))


# -- importance -------------------------------------------------------------


def feature_importance(model: RankerModel) -> dict[str, float]:
    """Share of total split gain per feature; shares sum to 1."""
    gains = model.training_meta.get("split_gains")
    if not gains:
        raise EmptyModel("model has no recorded split gains")
    total = sum(gains.values())
    if total <= 0:
        raise EmptyModel("model contains no informative splits")
    return {name: gains.get(name, 0.0) / total for name in model.feature_names}


def format_importance(importance: dict[str, float]) -> str:
    """Percent table, largest share first, e.g. 'fam_view_90d_s  33.89%'."""
    width = max(len(n) for n in importance)
    lines = [
        f"{name:<{width}}  {share * 100:.2f}%"
        for name, share in sorted(importance.items(), key=lambda kv: (-kv[1], kv[0]))
    ]
    return "\n".join(lines)


# -- heuristic file-history baseline ----------------------------------------


def _file_counts_for(idx: EventIndex, files, end_ts: int, accessor):
    """Per-engineer (distinct diffs, raw postings) over files before end_ts."""
    distinct_parts = []
    raw_engs = []
    for f in dict.fromkeys(files):
        entry = accessor(f)
        if entry is None:
            continue
        ts, eng, dif = entry
        b = int(np.searchsorted(ts, end_ts, side="left"))
        if b:
            distinct_parts.append((eng[:b] << 32) | dif[:b])
            raw_engs.append(eng[:b])
    distinct: dict[int, int] = {}
    raw: dict[int, int] = {}
    if distinct_parts:
        pairs = np.unique(np.concatenate(distinct_parts))
        uids, cnts = np.unique(pairs >> 32, return_counts=True)
        distinct = {int(u): int(c) for u, c in zip(uids, cnts)}
        uids, cnts = np.unique(np.concatenate(raw_engs), return_counts=True)
        raw = {int(u): int(c) for u, c in zip(uids, cnts)}
    return distinct, raw


def baseline_scores(diff, candidates: list[str], idx: EventIndex) -> list[float]:
    """File-history heuristic scores: authored diffs + per-file authorship
    frequency + accepted diffs on the same files, equally weighted, over the
    candidate's entire prior history."""
    t = diff.ts
    authored_distinct, authored_raw = _file_counts_for(idx, diff.files, t, idx.file_authored)
    accepts_distinct, _ = _file_counts_for(idx, diff.files, t, idx.file_accepts)
    out = []
    for cand in candidates:
        ei = idx.engineer_id(cand)
        if ei is None:
            out.append(0.0)
            continue
        s = (
            authored_distinct.get(ei, 0)
            + authored_raw.get(ei, 0)
            + accepts_distinct.get(ei, 0)
        )
        out.append(float(s))
    return out


def baseline_v1_score(diff, candidate: str, idx: EventIndex) -> float:
    return baseline_scores(diff, [candidate], idx)[0]


def baseline_rank(diff_id: str, candidates: list[str], scores: list[float]) -> RankedList:
    if not candidates:
        raise NoCandidates(f"no candidates to rank for {diff_id!r}")
    entries = sorted(
        (RankedEntry(e, float(s)) for e, s in zip(candidates, scores)),
        key=lambda r: (-r.score, r.engineer),
    )
    return RankedList(diff_id, tuple(entries))


# -- model file -------------------------------------------------------------


def model_to_json(model: RankerModel) -> str:
    obj = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "feature_names": list(model.feature_names),
        "learning_rate": model.learning_rate,
        "trees": [{"nodes": t.to_nodes()} for t in model.trees],
        "training_meta": model.training_meta,
    }
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def model_from_json(text: str) -> RankerModel:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(obj, dict) or obj.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise DataError(
            f"unsupported model schema_version {obj.get('schema_version')!r}"
        )
    names = tuple(obj["feature_names"])
    try:
        trees = tuple(Tree.from_nodes(t["nodes"], names) for t in obj["trees"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed model tree encoding: {exc}") from None
    return RankerModel(trees, float(obj["learning_rate"]), names, obj.get("training_meta", {}))


def save_model(model: RankerModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(model))


def load_model(path) -> RankerModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_json(fh.read())
