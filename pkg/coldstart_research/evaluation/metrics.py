import logging
from dataclasses import dataclass, field
from typing import Dict, Sequence

import numpy as np
import pandas as pd
from sklearn.preprocessing import normalize

from .._scheme import DimensionError, SplitError


@dataclass
class RankingResult:
    """Macro-averaged Recall@k / NDCG@k over users with a non-empty test set."""
    k: int
    per_user: pd.DataFrame                 # user, n_test, hits, recall, ndcg
    excluded: int = 0                      # users without test items
    top_k: Dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def recall(self) -> float:
        return float(self.per_user["recall"].mean()) if len(self.per_user) else 0.0

    @property
    def ndcg(self) -> float:
        return float(self.per_user["ndcg"].mean()) if len(self.per_user) else 0.0

    def stderr(self, metric: str) -> float:
        values = self.per_user[metric].to_numpy()
        if len(values) < 2:
            return 0.0
        return float(values.std(ddof=1) / np.sqrt(len(values)))

    def summary(self) -> Dict[str, float]:
        return {f"recall@{self.k}": self.recall, f"ndcg@{self.k}": self.ndcg}


def rank_candidates(scores: np.ndarray, exclude: Sequence[int] = ()) -> np.ndarray:
    """Item indices by descending score, ties by ascending index, excluded items removed."""
    scores = np.asarray(scores, dtype=np.float64)
    candidates = np.ones(len(scores), dtype=bool)
    candidates[np.asarray(list(exclude), dtype=np.int64)] = False
    items = np.flatnonzero(candidates)
    return items[np.lexsort((items, -scores[items]))]


def recall_at_k(ranked: np.ndarray, relevant: Sequence[int], k: int) -> float:
    relevant = set(np.asarray(relevant).tolist())
    if not relevant:
        raise SplitError("recall is undefined without relevant items")
    hits = sum(1 for item in ranked[:k].tolist() if item in relevant)
    return hits / len(relevant)


def ndcg_at_k(ranked: np.ndarray, relevant: Sequence[int], k: int) -> float:
    """binary gains; the ideal list fills min(k, |relevant|) slots"""
    relevant = set(np.asarray(relevant).tolist())
    if not relevant:
        raise SplitError("ndcg is undefined without relevant items")
    dcg = sum(1.0 / np.log2(rank + 2) for rank, item in enumerate(ranked[:k].tolist()) if item in relevant)
    idcg = sum(1.0 / np.log2(rank + 2) for rank in range(min(k, len(relevant))))
    return float(dcg / idcg)


def ranking_metrics(scores: np.ndarray, users: Sequence[int], train_items: Dict[int, np.ndarray],
                    test_items: Dict[int, np.ndarray], k: int) -> RankingResult:
    '''
    Full ranking of every item not in the user's training set.
    - scores: len(users) x num_items relevance matrix, row n belongs to users[n]
    - train_items / test_items: side-local item ids per user
    '''
    if k < 1:
        raise SplitError(f"k must be >= 1, got {k}")
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] != len(users):
        raise DimensionError("ranking_metrics", scores.shape, (len(users),))
    rows, top_k, excluded = [], {}, 0
    for n, user in enumerate(users):
        relevant = np.asarray(test_items.get(int(user), []), dtype=np.int64)
        if len(relevant) == 0:
            excluded += 1
            continue
        seen = np.asarray(train_items.get(int(user), []), dtype=np.int64)
        ranked = rank_candidates(scores[n], seen)
        assert not np.isin(ranked, seen).any(), f"training items leaked into the candidates of user {user}"
        hits = int(np.isin(ranked[:k], relevant).sum())
        rows.append((int(user), len(relevant), hits, recall_at_k(ranked, relevant, k), ndcg_at_k(ranked, relevant, k)))
        top_k[int(user)] = ranked[:k]
    if excluded:
        logging.warning(f"{excluded} user(s) without test items excluded from ranking metrics")
    per_user = pd.DataFrame(rows, columns=["user", "n_test", "hits", "recall", "ndcg"])
    return RankingResult(k, per_user, excluded, top_k)


def mean_cosine(predictions: np.ndarray, truth: np.ndarray) -> float:
    predictions, truth = np.atleast_2d(predictions), np.atleast_2d(truth)
    if predictions.shape != truth.shape:
        raise DimensionError("mean_cosine", predictions.shape, truth.shape)
    if len(predictions) == 0:
        return 0.0
    return float(np.sum(normalize(predictions) * normalize(truth), axis=1).mean())


def eval_intrinsic(predictions: np.ndarray, ground_truth: np.ndarray) -> float:
    """mean cosine between predicted and ground-truth embeddings, row by row"""
    return mean_cosine(predictions, ground_truth)


def items_by_user(frame: pd.DataFrame, num_users: int) -> Dict[int, np.ndarray]:
    """global item ids of an extrinsic split frame, as side-local ids grouped by user"""
    local = frame["item"].to_numpy(dtype=np.int64) - num_users
    grouped = pd.Series(local).groupby(frame["user"].to_numpy(dtype=np.int64))
    return {int(u): np.sort(g.to_numpy()) for u, g in grouped}
