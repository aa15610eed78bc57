import math

import numpy as np
import pandas as pd
import pytest

from coldstart_research._scheme import DimensionError, SplitError
from coldstart_research.evaluation import (items_by_user, mean_cosine, ndcg_at_k, rank_candidates, ranking_metrics,
                                           recall_at_k)


def brute_force(scores, seen, relevant, k):
    candidates = sorted((item for item in range(len(scores)) if item not in seen), key=lambda i: (-scores[i], i))
    top = candidates[:k]
    hits = [item in relevant for item in top]
    recall = sum(hits) / len(relevant)
    dcg = sum(1.0 / math.log2(rank + 2) for rank, hit in enumerate(hits) if hit)
    idcg = sum(1.0 / math.log2(rank + 2) for rank in range(min(k, len(relevant))))
    return recall, dcg / idcg


@pytest.mark.parametrize("case", range(100))
def test_ranking_metrics_match_brute_force(case):
    rng = np.random.default_rng(case)
    n_users, n_items = int(rng.integers(1, 6)), int(rng.integers(5, 30))
    k = int(rng.integers(1, 12))
    # integer scores leave plenty of ties
    scores = rng.integers(0, 4, size=(n_users, n_items)).astype(float)
    users = list(range(n_users))
    train, test = {}, {}
    for u in users:
        perm = rng.permutation(n_items)
        n_train, n_test = int(rng.integers(0, 4)), int(rng.integers(1, 5))
        train[u] = np.sort(perm[:n_train])
        test[u] = np.sort(perm[n_train:n_train + n_test])
    result = ranking_metrics(scores, users, train, test, k)
    expected = [brute_force(scores[u], set(train[u].tolist()), set(test[u].tolist()), k) for u in users]
    assert result.recall == pytest.approx(np.mean([r for r, _ in expected]), abs=1e-12)
    assert result.ndcg == pytest.approx(np.mean([n for _, n in expected]), abs=1e-12)
    for u in users:
        assert not set(result.top_k[u].tolist()) & set(train[u].tolist())


def test_metrics_ignore_monotone_transforms():
    rng = np.random.default_rng(3)
    scores = rng.normal(size=(4, 20))
    train = {u: np.array([u]) for u in range(4)}
    test = {u: np.array([u + 5, u + 10]) for u in range(4)}
    base = ranking_metrics(scores, range(4), train, test, 5)
    shifted = ranking_metrics(np.exp(2.0 * scores) + 1.0, range(4), train, test, 5)
    assert base.recall == shifted.recall
    assert base.ndcg == shifted.ndcg


def test_single_relevant_item_at_top():
    ranked = rank_candidates(np.array([0.1, 0.9, 0.5]))
    assert ranked.tolist() == [1, 2, 0]
    assert recall_at_k(ranked, [1], 1) == 1.0
    assert ndcg_at_k(ranked, [1], 1) == 1.0
    assert ndcg_at_k(ranked, [2], 2) == pytest.approx(1.0 / math.log2(3))
    assert rank_candidates(np.array([1.0, 1.0, 1.0]), exclude=[1]).tolist() == [0, 2]


def test_users_without_test_items_are_excluded():
    result = ranking_metrics(np.ones((2, 4)), [0, 1], {}, {1: np.array([2])}, 2)
    assert result.excluded == 1
    assert result.per_user["user"].tolist() == [1]
    assert result.summary() == {"recall@2": 0.0, "ndcg@2": 0.0}


def test_metric_errors():
    with pytest.raises(SplitError):
        recall_at_k(np.arange(3), [], 2)
    with pytest.raises(SplitError):
        ndcg_at_k(np.arange(3), [], 2)
    with pytest.raises(SplitError):
        ranking_metrics(np.ones((1, 3)), [0], {}, {0: np.array([1])}, 0)
    with pytest.raises(DimensionError):
        ranking_metrics(np.ones((2, 3)), [0], {}, {0: np.array([1])}, 1)


def test_mean_cosine():
    a = np.array([[1.0, 0.0], [0.0, 2.0]])
    assert mean_cosine(a, a * 3.0) == pytest.approx(1.0)
    assert mean_cosine(a, -a) == pytest.approx(-1.0)
    assert mean_cosine(a, a[::-1]) == pytest.approx(0.0)
    with pytest.raises(DimensionError):
        mean_cosine(a, np.ones((3, 2)))


def test_items_by_user_uses_side_local_ids():
    frame = pd.DataFrame({"user": [0, 0, 2], "item": [7, 5, 6]})
    grouped = items_by_user(frame, num_users=5)
    assert {u: v.tolist() for u, v in grouped.items()} == {0: [0, 2], 2: [1]}
