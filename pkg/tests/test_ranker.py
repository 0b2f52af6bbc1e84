import hashlib
import math

import numpy as np
import pytest

from revrec.errors import InvalidHyperParams
from revrec.featurize import FEATURE_NAMES, FeatureVector
from revrec.ranker import (
    HyperParams,
    RankedEntry,
    RankedList,
    baseline_rank,
    feature_importance,
    model_from_json,
    model_to_json,
    ndcg_at_k,
    pairwise_gradients,
    predict,
    rank,
    train_lambdamart,
)
from revrec.featurize import Candidate, Query, RankingDataset


def _dataset(rng, n_queries=30, n_cands=6, informative=True):
    queries = []
    for q in range(n_queries):
        cands = []
        pos_at = rng.integers(0, n_cands)
        for i in range(n_cands):
            label = 1 if i == pos_at else 0
            base = 1000 if label else 100
            feats = FeatureVector(
                fam_view_90d_s=int(base + rng.integers(0, 50)) if informative else int(rng.integers(0, 100)),
                assigned_count=int(label * 3 if informative else rng.integers(0, 3)),
                rejected_count=0,
                acted_count=int(label * 2),
                fam_view_assigned_90d_s=int(base // 2),
                files_authored_overlap=int(rng.integers(0, 4)),
                commented_count=int(rng.integers(0, 5)),
                resigned_count=0,
            )
            cands.append(Candidate(f"e{i}", feats, label))
        queries.append(Query(f"q{q}", 1000 + q, "author", tuple(cands)))
    return RankingDataset(tuple(queries))


def test_ndcg_oracle_hand_computed():
    # one query, three rows, positive ranked second:
    # DCG = 1/log2(3), ideal = 1
    scores = np.array([2.0, 1.0, 0.5])
    y = np.array([0, 1, 0])
    qid = np.array([0, 0, 0])
    want = 1.0 / math.log2(3)
    assert ndcg_at_k(scores, y, qid, 5) == pytest.approx(want, abs=1e-12)


def test_ndcg_perfect_is_one():
    scores = np.array([3.0, 2.0, 1.0, 9.0, 1.0])
    y = np.array([1, 0, 0, 1, 0])
    qid = np.array([0, 0, 0, 1, 1])
    assert ndcg_at_k(scores, y, qid, 5) == pytest.approx(1.0)


def test_ndcg_truncation_drops_deep_hits():
    # positive at rank 3 with k=2 contributes nothing
    scores = np.array([4.0, 3.0, 2.0, 1.0])
    y = np.array([0, 0, 0, 1])
    qid = np.zeros(4, dtype=int)
    assert ndcg_at_k(scores, y, qid, 2) == 0.0


def test_ndcg_ties_break_by_row_order():
    scores = np.array([1.0, 1.0])
    y = np.array([1, 0])
    qid = np.array([0, 0])
    assert ndcg_at_k(scores, y, qid, 5) == pytest.approx(1.0)


def test_gradient_matches_finite_differences():
    # two candidates, one positive: the rank structure is score-independent,
    # so the lambda is the exact derivative of
    #   delta * log(1 + exp(-sigma * (s_pos - s_neg)))
    rng = np.random.default_rng(0)
    y = np.array([1, 0])
    qid = np.array([0, 0])
    delta = 1.0 - 1.0 / math.log2(3)
    for sigma in (0.5, 1.0, 2.0):
        s = rng.normal(size=2)
        grad, hess = pairwise_gradients(s, y, qid, k=5, sigma=sigma)

        def cost(sp):
            return delta * math.log1p(math.exp(-sigma * (sp - s[1])))

        h = 1e-6
        fd = (cost(s[0] + h) - cost(s[0] - h)) / (2 * h)
        assert abs(-grad[0] - fd) / max(abs(fd), 1e-12) < 1e-5
        assert grad[1] == pytest.approx(-grad[0], abs=1e-12)
        assert (hess >= 0).all()


def test_training_reaches_perfect_ndcg_when_separable():
    rng = np.random.default_rng(1)
    ds = _dataset(rng, n_queries=25)
    model = train_lambdamart(ds, HyperParams(n_trees=20, max_leaves=4, min_samples_leaf=1, seed=0))
    X, y, qid = ds.to_arrays()
    assert ndcg_at_k(predict(model, X), y, qid, 5) == pytest.approx(1.0)


def test_training_is_deterministic():
    rng = np.random.default_rng(2)
    ds = _dataset(rng)
    hp = HyperParams(n_trees=10, max_leaves=6, seed=7)
    h1 = hashlib.sha256(model_to_json(train_lambdamart(ds, hp)).encode()).hexdigest()
    h2 = hashlib.sha256(model_to_json(train_lambdamart(ds, hp)).encode()).hexdigest()
    assert h1 == h2


def test_predict_matches_scalar_tree_walk():
    rng = np.random.default_rng(3)
    ds = _dataset(rng)
    model = train_lambdamart(ds, HyperParams(n_trees=12, max_leaves=8, seed=0))
    X = rng.uniform(0, 2000, size=(64, len(FEATURE_NAMES)))

    def walk(tree, row):
        i = 0
        while tree.feature[i] >= 0:
            i = tree.right[i] if row[tree.feature[i]] > tree.threshold[i] else tree.left[i]
        return tree.leaf_value[i]

    want = np.zeros(len(X))
    for t in model.trees:
        want += np.array([walk(t, r) for r in X])
    want *= model.learning_rate
    got = predict(model, X)
    assert np.max(np.abs(got - want)) < 1e-12


def test_model_json_round_trip():
    rng = np.random.default_rng(4)
    ds = _dataset(rng)
    model = train_lambdamart(ds, HyperParams(n_trees=8, max_leaves=4, seed=0))
    again = model_from_json(model_to_json(model))
    X = rng.uniform(0, 2000, size=(32, len(FEATURE_NAMES)))
    assert np.array_equal(predict(model, X), predict(again, X))
    assert model_to_json(again) == model_to_json(model)


def test_importance_shares_sum_to_one():
    rng = np.random.default_rng(5)
    ds = _dataset(rng)
    model = train_lambdamart(ds, HyperParams(n_trees=10, max_leaves=6, seed=0))
    imp = feature_importance(model)
    assert set(imp) == set(FEATURE_NAMES)
    assert sum(imp.values()) == pytest.approx(1.0)
    assert all(v >= 0 for v in imp.values())


def test_rank_orders_by_score_then_name():
    rng = np.random.default_rng(6)
    ds = _dataset(rng)
    model = train_lambdamart(ds, HyperParams(n_trees=8, max_leaves=4, seed=0))
    q = ds.queries[0]
    rl = rank(model, q.diff_id, [(c.engineer, c.features) for c in q.candidates])
    scores = [e.score for e in rl.entries]
    assert scores == sorted(scores, reverse=True)


def test_baseline_rank_ties_break_by_name():
    rl = baseline_rank("d", ["zoe", "amy", "bob"], [1.0, 1.0, 2.0])
    assert [e.engineer for e in rl.entries] == ["bob", "amy", "zoe"]


def test_hyperparams_validation():
    with pytest.raises(InvalidHyperParams):
        HyperParams(n_trees=-1).validate()
    with pytest.raises(InvalidHyperParams):
        HyperParams(max_leaves=1).validate()
    with pytest.raises(InvalidHyperParams):
        HyperParams(learning_rate=0.0).validate()


def test_zero_trees_predicts_zero():
    rng = np.random.default_rng(7)
    ds = _dataset(rng)
    model = train_lambdamart(ds, HyperParams(n_trees=0))
    X = rng.uniform(size=(5, len(FEATURE_NAMES)))
    assert np.array_equal(predict(model, X), np.zeros(5))
