"""Acceptance gate: one test per release criterion, one PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they complete. The large-corpus fixtures are session-scoped, so
the accuracy, workload, and latency criteria share their corpus builds.
"""

import contextlib
import hashlib
import json
import math
import random
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from revrec.config import load_config
from revrec.evaluate import (
    BASELINE_V1,
    backtest,
    compare_reports,
    compute_time_in_review,
    mrr,
    temporal_split,
    topn_accuracy,
)
from revrec.events import ReviewEvent
from revrec.featurize import (
    Candidate,
    CandidatePolicy,
    FeatureVector,
    Query,
    RankingDataset,
    build_training_set,
    candidates_for,
    extract_features,
)
from revrec.cli import main as cli_main
from revrec.index import EventIndex
from revrec.policy import (
    PolicyConfig,
    WorkloadSnapshot,
    assign_bystander_rnd,
    load_weight,
    rerank_topk,
)
from revrec.ranker import (
    HyperParams,
    RankedEntry,
    RankedList,
    model_to_json,
    ndcg_at_k,
    pairwise_gradients,
    predict,
    train_lambdamart,
)
from revrec.server import bench_latency
from revrec.sim import SimConfig, run_sim, selection_gap_experiment
from revrec.store import build_store, recommend, store_update
from revrec.synth import SynthConfig, synth_corpus

DAY = 86400
ROOT = Path(__file__).resolve().parent.parent


@contextlib.contextmanager
def criterion(n, what):
    try:
        yield
    except BaseException:
        print(f"FAIL criterion {n:2d}: {what}", flush=True)
        raise
    print(f"PASS criterion {n:2d}: {what}", flush=True)


# -- shared corpora ----------------------------------------------------------


@pytest.fixture(scope="session")
def accuracy_runs():
    """5k-engineer/200k-diff corpus with v1, v2, and v2+wl backtests."""
    cfg = SynthConfig(
        n_engineers=5000, n_files=2000, n_diffs=200000, n_teams=250,
        affinity_strength=0.9, seed=13,
    )
    log = synth_corpus(cfg)
    idx = EventIndex(log)
    train_ids, _ = temporal_split(idx, 0.8)
    ds = build_training_set(
        log, CandidatePolicy(), index=idx, diff_ids=train_ids, max_queries=25000
    )
    model = train_lambdamart(ds, HyperParams(n_trees=60, max_leaves=16, seed=1))
    v1 = backtest(log, BASELINE_V1, None, 0.8, index=idx)
    v2 = backtest(log, model, None, 0.8, index=idx)
    wl = backtest(
        log,
        model,
        PolicyConfig(theta=0.1, rerank_k=5, workload_metric="time_spent_7d"),
        0.8,
        index=idx,
    )
    return {"v1": v1, "v2": v2, "wl": wl}


@pytest.fixture(scope="session")
def latency_setup():
    """10k-engineer/100k-diff corpus, model, store, and request sample."""
    cfg = SynthConfig(
        n_engineers=10000, n_files=800, n_diffs=100000, n_teams=500, seed=21
    )
    log = synth_corpus(cfg)
    idx = EventIndex(log)
    ds = build_training_set(log, CandidatePolicy(), index=idx, max_queries=5000)
    model = train_lambdamart(ds, HyperParams(n_trees=30, max_leaves=8, seed=1))
    as_of = ((log.events[-1].ts * 3 // 4) // DAY) * DAY
    store = build_store(log, as_of, model=model)
    pubs = [
        e for e in log.events
        if e.kind == "DiffPublished" and e.ts < as_of - 5 * DAY
    ]
    picks = random.Random(7).sample(pubs, 150)
    requests = [{"author": p.engineer, "files": list(p.files), "k": 5} for p in picks]
    return store, idx, requests


# -- criteria ----------------------------------------------------------------


def test_criterion_01_rerank_guarantee():
    rng = random.Random(1)
    with criterion(1, "reranking preserves the top-k set and the tail exactly"):
        for _ in range(1200):
            n = rng.randint(1, 10)
            names = [f"e{i:02d}" for i in range(n)]
            rng.shuffle(names)
            entries = sorted(
                (RankedEntry(e, rng.uniform(0.01, 1.0)) for e in names),
                key=lambda en: (-en.score, en.engineer),
            )
            rl = RankedList("d", tuple(entries))
            wl = WorkloadSnapshot(
                "time_spent_7d", 0, {e: rng.uniform(0, 1e5) for e in names}
            )
            cfg = PolicyConfig(theta=rng.uniform(0, 1), rerank_k=rng.randint(1, 8))
            out = rerank_topk(rl, wl, cfg)
            k = min(cfg.rerank_k, n)
            assert {e.engineer for e in out.entries[:k]} == {
                e.engineer for e in rl.entries[:k]
            }
            assert out.entries[k:] == rl.entries[k:]


def test_criterion_02_load_weight_oracle():
    rng = random.Random(2)
    with criterion(2, "load weight oracle, identity at theta 0, monotonicity"):
        assert abs(load_weight(1.0, 0.1) - 1.105171) <= 1e-6
        for _ in range(100):
            assert load_weight(rng.random(), 0.0) == 1.0
        for _ in range(10000):
            a, b = sorted((rng.random(), rng.random()))
            theta = rng.random()
            assert load_weight(a, theta) <= load_weight(b, theta)


def _separable_dataset(rng):
    queries = []
    for q in range(25):
        cands = []
        pos_at = rng.integers(0, 6)
        for i in range(6):
            label = 1 if i == pos_at else 0
            base = 1000 if label else 100
            fv = FeatureVector(
                fam_view_90d_s=int(base + rng.integers(0, 50)),
                assigned_count=int(label * 3),
                rejected_count=0,
                acted_count=int(label * 2),
                fam_view_assigned_90d_s=base // 2,
                files_authored_overlap=int(rng.integers(0, 4)),
                commented_count=int(rng.integers(0, 5)),
                resigned_count=0,
            )
            cands.append(Candidate(f"e{i}", fv, label))
        queries.append(Query(f"q{q}", 1000 + q, "author", tuple(cands)))
    return RankingDataset(tuple(queries))


def test_criterion_03_lambdamart_correctness(tmp_path):
    with criterion(3, "gradient check, separable convergence, seed determinism"):
        # (a) finite differences on the 2-candidate case, where the rank
        # structure is score-independent and the lambda is an exact derivative
        nrng = np.random.default_rng(3)
        y = np.array([1, 0])
        qid = np.array([0, 0])
        delta = 1.0 - 1.0 / math.log2(3)
        for sigma in (0.5, 1.0, 2.0):
            for _ in range(20):
                s = nrng.normal(size=2)
                grad, _ = pairwise_gradients(s, y, qid, k=5, sigma=sigma)

                def cost(sp):
                    return delta * math.log1p(math.exp(-sigma * (sp - s[1])))

                h = 1e-6
                fd = (cost(s[0] + h) - cost(s[0] - h)) / (2 * h)
                assert abs(-grad[0] - fd) / max(abs(fd), 1e-12) <= 1e-5

        # (b) a separable dataset trains to a perfect ranking
        ds = _separable_dataset(np.random.default_rng(4))
        model = train_lambdamart(
            ds, HyperParams(n_trees=20, max_leaves=4, min_samples_leaf=1, seed=0)
        )
        X, yy, qq = ds.to_arrays()
        assert ndcg_at_k(predict(model, X), yy, qq, 5) == 1.0

        # (c) identical model hashes across runs and thread counts
        hp = HyperParams(n_trees=10, max_leaves=6, seed=7)
        h1 = hashlib.sha256(model_to_json(train_lambdamart(ds, hp)).encode()).hexdigest()
        h2 = hashlib.sha256(model_to_json(train_lambdamart(ds, hp)).encode()).hexdigest()
        assert h1 == h2

        cfgp = tmp_path / "cfg.json"
        cfgp.write_text(json.dumps({
            "synth": {"n_engineers": 30, "n_files": 40, "n_diffs": 300,
                      "n_teams": 5, "seed": 2},
            "hyperparams": {"n_trees": 5, "max_leaves": 4, "seed": 1},
        }))
        corpus = tmp_path / "c.jsonl"
        assert cli_main(["synth", "--config", str(cfgp), "--out", str(corpus)]) == 0
        m1, m4 = tmp_path / "m1.json", tmp_path / "m4.json"
        for threads, out in (("1", m1), ("4", m4)):
            rc = cli_main(["train", "--config", str(cfgp), "--corpus", str(corpus),
                           "--out", str(out), "--threads", threads])
            assert rc == 0
        assert m1.read_bytes() == m4.read_bytes()


def test_criterion_04_accuracy_analog(accuracy_runs):
    v1, v2 = accuracy_runs["v1"], accuracy_runs["v2"]
    with criterion(
        4,
        f"model top-3 {v2.top3:.4f} >= 0.70 and beats the file-count "
        f"baseline by {(v2.top3 - v1.top3) * 100:+.2f} points (>= 5)",
    ):
        assert v2.top3 >= 0.70
        assert (v2.top3 - v1.top3) * 100 >= 5.0


def test_criterion_05_workload_backtest_analog(accuracy_runs):
    v2, wl = accuracy_runs["v2"], accuracy_runs["wl"]
    d = compare_reports(v2, wl)
    with criterion(
        5,
        f"reranking: median top-1 workload {v2.median_top1_workload:.0f} -> "
        f"{wl.median_top1_workload:.0f}, top-1 {d.top1_points:+.2f} pts, "
        f"top-5 delta exactly 0",
    ):
        assert wl.median_top1_workload < v2.median_top1_workload
        assert wl.top1 < v2.top1
        assert wl.top5 == v2.top5


def test_criterion_06_backtest_vs_choice_gap():
    with criterion(
        6,
        "author choice realizes a smaller workload reduction than the "
        "top-1 backtest assumption",
    ):
        out = selection_gap_experiment(10000, expertise_threshold=0.5, seed=0)
        bt = out["backtest_workload_reduction_pct"]
        real = out["realized_workload_reduction_pct"]
        assert bt < 0
        assert abs(real) < abs(bt)


def test_criterion_07_bystander_band_and_guardrails():
    sim = load_config(ROOT / "configs" / "bystander_paper.json").sim
    none = run_sim(replace(sim, policy="none"))
    rnd = run_sim(replace(sim, policy="bystander_rnd"))
    reduction = (
        1 - rnd.median_tir_hours_group_only / none.median_tir_hours_group_only
    ) * 100

    # symmetry control: no diffusion, one eligible reviewer per group
    sym = replace(sim, diffusion_factor=1.0, n_engineers=2 * sim.n_teams)
    s_none = run_sim(replace(sym, policy="none"))
    s_rnd = run_sim(replace(sym, policy="bystander_rnd"))
    sym_delta = (
        1 - s_rnd.median_tir_hours_group_only / s_none.median_tir_hours_group_only
    ) * 100

    service_gap = abs(
        rnd.mean_service_hours / none.mean_service_hours - 1
    ) * 100
    ind_gap = abs(
        rnd.median_tir_hours_individual / none.median_tir_hours_individual - 1
    ) * 100

    with criterion(
        7,
        f"bystander assignment cuts group-only review time {reduction:.2f}% "
        f"(band [5, 20], n={none.n_group_only}); symmetry {sym_delta:+.2f}%; "
        f"service gap {service_gap:.3f}%, individual gap {ind_gap:.3f}%",
    ):
        assert none.n_diffs >= 10000
        assert 5.0 <= reduction <= 20.0
        assert abs(sym_delta) <= 2.0
        assert service_gap <= 2.0
        assert ind_gap <= 2.0


def test_criterion_08_bystander_uniformity():
    rl = RankedList(
        "d", tuple(RankedEntry(f"e{i}", 1.0 - 0.1 * i) for i in range(5))
    )
    counts = {}
    for seed in range(30000):
        pick = assign_bystander_rnd(rl, seed)
        counts[pick] = counts.get(pick, 0) + 1
    expected = 30000 / 3
    chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
    with criterion(
        8,
        f"random bystander is uniform over the top 3 "
        f"(shares {sorted(round(c / 30000, 4) for c in counts.values())}, "
        f"chi2 {chi2:.2f} < 9.21)",
    ):
        assert set(counts) == {"e0", "e1", "e2"}
        for c in counts.values():
            assert abs(c / 30000 - 1 / 3) <= 0.02
        # 1% critical value of chi-square with 2 degrees of freedom
        assert chi2 < 9.210340


def test_criterion_09_serving_latency(latency_setup):
    store, idx, requests = latency_setup
    t0 = time.time()
    out = bench_latency(store, requests, 3, index=idx)
    ratio = out["naive_p90"] / out["p90"]
    with criterion(
        9,
        f"store p90 {out['p90']:.3f} ms vs naive p90 {out['naive_p90']:.3f} ms "
        f"= {ratio:.1f}x (>= 10x) [bench {time.time() - t0:.0f}s]",
    ):
        assert out["naive_p90"] >= 10.0 * out["p90"]


def test_criterion_10_store_oracle_equivalence(small_log, small_idx):
    last = small_log.events[-1].ts
    rng = random.Random(10)
    pubs = [e for e in small_log.events if e.kind == "DiffPublished"]

    with criterion(
        10,
        "store features equal the offline extractor on 500 probes; "
        "100 incremental batches equal rebuilds",
    ):
        # 500 probes across three bucket-aligned watermarks
        probed = 0
        for frac in (2, 3, 4):
            as_of = ((last * frac // 5) // DAY) * DAY
            store = build_store(small_log, as_of)
            elig = [p for p in pubs if p.ts < as_of]
            while_budget = 167 if frac < 4 else 166
            for _ in range(while_budget):
                pub = rng.choice(elig)
                probe = ReviewEvent(
                    "DiffPublished", as_of, pub.engineer, "probe",
                    files=pub.files, assigned_groups=pub.assigned_groups,
                )
                pool = candidates_for(probe, small_idx, store.pol)
                cand = rng.choice(pool) if pool else None
                if cand is None:
                    continue
                got = store.features(pub.engineer, pub.files, cand)
                want = extract_features(probe, cand, small_idx, store.pol)
                assert got == want
                probed += 1
        assert probed >= 450

        # incremental == rebuild across 100 random batch boundaries
        t0 = ((last * 3 // 5) // DAY) * DAY
        cuts = sorted(rng.sample(range(t0 + 1, last), 99)) + [last + 1]
        inc = build_store(small_log, t0)
        pending = [e for e in small_log.events if e.ts >= t0]
        for cut in cuts:
            while pending and pending[0].ts < cut:
                store_update(inc, pending.pop(0))
            inc.advance_to(cut)
            full = build_store(small_log, cut)
            for pub in rng.sample(pubs, 2):
                g = pub.assigned_groups or ()
                assert inc.pool(pub.engineer, pub.files, g) == full.pool(
                    pub.engineer, pub.files, g
                )
                for cand in inc.pool(pub.engineer, pub.files, g)[:3]:
                    assert inc.features(pub.engineer, pub.files, cand) == full.features(
                        pub.engineer, pub.files, cand
                    )


def test_criterion_11_metric_oracles():
    with criterion(
        11,
        "top-n, MRR, review-time, and report-delta fixtures match hand values",
    ):
        recs = [
            RankedList("d1", (RankedEntry("bob", 0.9), RankedEntry("ann", 0.5))),
            RankedList("d2", (RankedEntry("ann", 0.9), RankedEntry("eve", 0.5),
                              RankedEntry("carol", 0.4))),
            RankedList("d3", (RankedEntry("ann", 0.9),)),
        ]
        realized = {"d1": {"bob"}, "d2": {"carol"}, "d3": {"zed"}}
        assert topn_accuracy(recs, realized, 1) == 1 / 3
        assert topn_accuracy(recs, realized, 3) == 2 / 3
        assert mrr(recs, realized) == (1 + 1 / 3) / 3

        trace = [
            ReviewEvent("DiffPublished", 0, "ann", "d", files=("f",)),
            ReviewEvent("Action", 4, "bob", "d", act="reject"),
            ReviewEvent("DiffUpdated", 7, "ann", "d"),
            ReviewEvent("Action", 10, "bob", "d", act="accept"),
        ]
        assert compute_time_in_review(trace) == 7

        from revrec.evaluate import BacktestReport

        base = dict(
            condition="a", n_diffs=100, top1=0.3, top2=0.4, top3=0.5905,
            top5=0.7, mrr=0.4, median_top1_workload=10.0,
            median_top3_workload=10.0, coverage=1.0, eval_fingerprint="x",
        )
        a = BacktestReport(**base)
        b = BacktestReport(**{**base, "condition": "b", "top3": 0.7324})
        assert abs(compare_reports(a, b).top3_points - 14.19) < 1e-9
