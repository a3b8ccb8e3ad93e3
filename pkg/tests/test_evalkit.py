import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import mannwhitneyu

from revgnn.errors import InputError
from revgnn.evalkit import (RankingContext, all_metrics, emit_report, evaluate, hit_ratio_at_k,
                            mann_whitney_u, ndcg_at_k, precision_at_k, recall_at_k)
from revgnn.graphstore import TEST, BipartiteGraph, FeatureStore, PreparedData


def brute(truths, ranked, k):
    """Loop-only reference for all four metrics."""
    rec, prec, ndcg = [], [], []
    hits_total, truth_total = 0, 0
    for truth, r in zip(truths, ranked):
        hits = 0
        dcg = 0.0
        for pos in range(min(k, len(r))):
            if r[pos] in truth:
                hits += 1
                dcg += (2 ** 1 - 1) / math.log2(2 + (pos + 1))
        idcg = 0.0
        for pos in range(min(k, len(truth))):
            idcg += 1 / math.log2(2 + (pos + 1))
        rec.append(hits / len(truth))
        prec.append(hits / k)
        ndcg.append(dcg / idcg)
        hits_total += hits
        truth_total += len(truth)
    mean = lambda xs: sum(xs) / len(xs)  # noqa: E731
    return {"recall": mean(rec), "ndcg": mean(ndcg), "hit_ratio": hits_total / truth_total,
            "precision": mean(prec)}


def random_instance(rng):
    n_sch = int(rng.integers(1, 21))
    n_sub = int(rng.integers(1, 11))
    k = int(rng.integers(1, 25))
    truths, ranked = [], []
    for _ in range(n_sub):
        size = int(rng.integers(1, n_sch + 1))
        truths.append(set(rng.choice(n_sch, size, replace=False).tolist()))
        ranked.append(rng.permutation(n_sch)[:min(k, n_sch)].tolist())
    return truths, ranked, k


def test_metrics_match_brute_force_on_random_instances():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        truths, ranked, k = random_instance(rng)
        got, want = all_metrics(truths, ranked, k), brute(truths, ranked, k)
        for name in want:
            assert abs(got[name] - want[name]) <= 1e-12, name


def test_recall_precision_examples():
    assert recall_at_k([{"a", "b"}], [["a", "x"]], 2) == 0.5
    assert precision_at_k([{"a", "b"}], [["a", "x"]], 2) == 0.5
    assert recall_at_k([{"a", "b"}], [["b", "a", "x"]], 3) == 1.0
    assert recall_at_k([{"a"}], [["x", "y"]], 2) == precision_at_k([{"a"}], [["x", "y"]], 2) == 0.0


def test_ndcg_examples():
    assert ndcg_at_k([{"a"}], [["a", "b"]], 2) == 1.0
    value = ndcg_at_k([{"a"}], [["b", "a"]], 2)
    assert value == pytest.approx(0.5 / (1 / math.log2(3)), abs=1e-15)
    assert round(value, 4) == 0.7925
    assert ndcg_at_k([{"a"}], [["b", "c"]], 2) == 0.0


def test_hit_ratio_examples():
    assert hit_ratio_at_k([{"a"}, {"b"}], [["a"], ["b"]], 1) == 1.0
    assert hit_ratio_at_k([{"a"}, {"b"}], [["a"], ["x"]], 1) == 0.5
    assert hit_ratio_at_k([{"a"}], [["x"]], 1) == 0.0


def test_bad_inputs_rejected():
    with pytest.raises(InputError):
        recall_at_k([{"a"}], [["a"]], 0)
    with pytest.raises(InputError):
        recall_at_k([], [], 3)


def test_short_lists_keep_k_denominator():
    assert precision_at_k([{"a"}], [["a"]], 5) == 0.2


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_metrics_bounded_even_when_truth_exceeds_k(seed):
    rng = np.random.default_rng(seed)
    truths, ranked, k = random_instance(rng)
    for value in all_metrics(truths, ranked, k).values():
        assert 0.0 <= value <= 1.0


@given(st.permutations(list(range(6))))
@settings(max_examples=60, deadline=None)
def test_ndcg_ignores_order_below_last_hit(tail):
    head = ["t1", "x", "t2"]
    rest = [f"n{i}" for i in tail]
    base = ndcg_at_k([{"t1", "t2"}], [head + [f"n{i}" for i in range(6)]], 9)
    assert ndcg_at_k([{"t1", "t2"}], [head + rest], 9) == base


# -- Mann-Whitney ------------------------------------------------------------

def test_mann_whitney_examples():
    same = mann_whitney_u([0.1, 0.1], [0.1, 0.1, 0.1])
    assert (same.u, same.p) == (3.0, 1.0)
    res = mann_whitney_u([1, 2, 3], [10, 11, 12])
    assert res.u == 0.0
    assert mann_whitney_u([10, 11, 12], [1, 2, 3]).u == 9.0
    with pytest.raises(InputError):
        mann_whitney_u([], [1.0])


@given(st.lists(st.integers(0, 6), min_size=1, max_size=12), st.lists(st.integers(0, 6), min_size=1, max_size=12))
@settings(max_examples=100, deadline=None)
def test_mann_whitney_matches_scipy(a, b):
    if len(set(a + b)) == 1:
        return
    ours = mann_whitney_u(a, b)
    ref = mannwhitneyu(a, b, alternative="two-sided", method="asymptotic", use_continuity=True)
    assert ours.u == pytest.approx(ref.statistic, abs=1e-12)
    assert ours.p == pytest.approx(ref.pvalue, rel=1e-9, abs=1e-15)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=6, unique=True),
       st.lists(st.floats(0, 1), min_size=1, max_size=6, unique=True))
@settings(max_examples=50, deadline=None)
def test_exact_mode_matches_scipy_without_ties(a, b):
    if set(a) & set(b):
        return
    ours = mann_whitney_u(a, b, method="exact")
    ref = mannwhitneyu(a, b, alternative="two-sided", method="exact")
    assert ours.p == pytest.approx(ref.pvalue, rel=1e-9)


# -- ranking and reports -----------------------------------------------------

def fixture_data():
    # 4 scholars, 3 submissions; each submission has one test reviewer
    edges = np.array([[0, 0], [0, 1], [1, 1], [1, 2], [2, 3], [2, 0]])
    split = np.array([0, TEST, 0, TEST, 0, TEST], dtype=np.int8)
    g = BipartiteGraph(["a", "b", "c", "d"], ["p", "q", "r"], edges, split)
    return PreparedData(g, FeatureStore(1, np.ones((3, 1))))


def oracle_context(data):
    truth = data.graph.reviewers("test")
    return RankingContext(data, lambda j, sch: np.array([1.0 if s in truth[j] else 0.0 for s in sch]))


def test_perfect_scores_give_perfect_metrics():
    data = fixture_data()
    report = evaluate(oracle_context(data), k=4)
    assert report.metrics["recall"] == report.metrics["hit_ratio"] == 1.0
    assert report.metrics["ndcg"] == 1.0


def test_candidates_exclude_train_links_and_break_ties_low():
    data = fixture_data()
    ctx = RankingContext(data, lambda j, sch: np.zeros(len(sch)))
    assert [s for s, _ in ctx.rank_candidates(0, 10)] == [1, 2, 3]
    assert [s for s, _ in ctx.rank_candidates("p", 10, exclude_train=False)] == [0, 1, 2, 3]
    with pytest.raises(InputError):
        ctx.rank_candidates("zz", 3)


def test_popularity_baseline_runs():
    data = fixture_data()
    report = evaluate(RankingContext.popularity(data), k=2)
    assert set(report.metrics) == {"recall", "ndcg", "hit_ratio", "precision"}


def test_report_files(tmp_path):
    data = fixture_data()
    report = evaluate(oracle_context(data), k=20)
    emit_report(report, tmp_path / "r.csv")
    emit_report(report, tmp_path / "r2.csv", tmp_path / "d.tsv",
                catalogs=(data.graph.scholars, data.graph.submissions))
    text = (tmp_path / "r.csv").read_text()
    assert text.splitlines()[0] == "R@20,N@20,HR@20,P@20"
    assert text == (tmp_path / "r2.csv").read_text()
    detail = (tmp_path / "d.tsv").read_text().splitlines()
    assert detail[0] == "p\t1\tb\t1\t1"
    assert all(len(line.split("\t")) == 5 for line in detail)
    emit_report(report, tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text() == text


def test_report_write_error_is_input_error(tmp_path):
    report = evaluate(oracle_context(fixture_data()), k=2)
    with pytest.raises(InputError):
        emit_report(report, tmp_path / "missing" / "r.csv")
