import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from .._scheme import DivergenceError, MissingGroundTruthError, NonFiniteError
from .._seeding import make_rng
from ..autodiff import ops
from ..autodiff.params import Adam, ParamStore
from ..autodiff.tensor import Tape
from ..data.graph import BipartiteGraph
from .losses import bpr_loss

REJECTION_ROUNDS = 50


@dataclass
class GroundTruth:
    """Frozen reference embedding per target node (global ids); other rows are unset."""
    table: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.targets = np.unique(np.asarray(self.targets, dtype=np.int64))
        self._known = np.zeros(len(self.table), dtype=bool)
        self._known[self.targets] = True

    @property
    def dim(self) -> int:
        return self.table.shape[1]

    def has(self, nodes) -> np.ndarray:
        nodes = np.asarray(nodes, dtype=np.int64)
        inside = (nodes >= 0) & (nodes < len(self.table))
        out = np.zeros(nodes.shape, dtype=bool)
        out[inside] = self._known[nodes[inside]]
        return out

    def rows(self, nodes) -> np.ndarray:
        nodes = np.asarray(nodes, dtype=np.int64)
        missing = nodes[~self.has(nodes)]
        if len(missing):
            raise MissingGroundTruthError(missing.tolist())
        return self.table[nodes].copy()

    def arrays(self) -> Dict[str, np.ndarray]:
        mask = self._known.astype(np.float64)
        return {"gt/table": self.table, "gt/targets": mask}

    @classmethod
    def from_arrays(cls, arrays: Dict[str, np.ndarray]) -> "GroundTruth":
        return cls(arrays["gt/table"], np.flatnonzero(arrays["gt/targets"] > 0.5))


def sample_negatives(graph: BipartiteGraph, users: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One uniform non-interacted item per user (side-local ids), by rejection."""
    incidence = graph.incidence
    negatives = rng.integers(graph.num_items, size=len(users))
    for _ in range(REJECTION_ROUNDS):
        clash = np.asarray(incidence[users, negatives]).reshape(-1) > 0
        if not clash.any():
            break
        negatives[clash] = rng.integers(graph.num_items, size=int(clash.sum()))
    return negatives


def train_ground_truth(graph: BipartiteGraph, targets, dim: int = 32, epochs: int = 30, lr: float = 0.01,
                       neg_per_pos: int = 1, seed: int = 0, batch_size: int = 1024, l2: float = 0.0,
                       verbose: bool = False) -> Tuple[GroundTruth, pd.DataFrame]:
    '''
    BPR matrix factorization on the graph (Train_T plus the masked Test_T').
    Returns the frozen ground truth for `targets` and the per-epoch loss history.
    - neg_per_pos: uniform negatives drawn per positive, redrawn every epoch

    usage:
    - gt, history = train_ground_truth(splits.working, np.concatenate([splits.targets("train"), splits.targets("test")]))
    '''
    store = ParamStore()
    rng = make_rng(seed, "gt", "init")
    users_table = store.embedding("gt/user", graph.num_users, dim, rng, scale=0.1)
    items_table = store.embedding("gt/item", graph.num_items, dim, rng, scale=0.1)
    optimizer = Adam(lr)
    edges = graph.edges()
    edge_users = edges["user_id"].to_numpy(dtype=np.int64)
    edge_items = edges["item_id"].to_numpy(dtype=np.int64)
    # users who interacted with every item have no negative to draw
    usable = graph.degrees[edge_users] < graph.num_items
    edge_users, edge_items = edge_users[usable], edge_items[usable]

    history = []
    for epoch in tqdm(range(epochs), disable=not verbose, desc="ground truth"):
        epoch_rng = make_rng(seed, "gt", "epoch", epoch)
        users = np.repeat(edge_users, neg_per_pos)
        positives = np.repeat(edge_items, neg_per_pos)
        negatives = sample_negatives(graph, users, epoch_rng)
        order = epoch_rng.permutation(len(users))
        total = 0.0
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            try:
                with Tape() as tape:
                    u = ops.embed_lookup(users_table, users[idx])
                    pos = ops.sum(u * ops.embed_lookup(items_table, positives[idx]), axis=-1)
                    neg = ops.sum(u * ops.embed_lookup(items_table, negatives[idx]), axis=-1)
                    loss = bpr_loss(pos, neg)
                    if l2:
                        loss = loss + ops.scale(ops.mean(ops.sum(u * u, axis=-1)), l2)
                tape.backward(loss)
                optimizer.step(store)
            except NonFiniteError as e:
                raise DivergenceError("gt", epoch, str(e)) from e
            total += float(loss.value) * len(idx)
        mean_loss = total / max(len(order), 1)
        if not np.isfinite(mean_loss):
            raise DivergenceError("gt", epoch)
        history.append((epoch, mean_loss))
        logging.info(f"gt\t{epoch}\t{mean_loss:.6f}")

    table = np.concatenate([users_table.value, items_table.value], axis=0)
    return GroundTruth(table, targets), pd.DataFrame(history, columns=["epoch", "loss"])


def ground_truth_for(graph: BipartiteGraph, targets, config, verbose: Optional[bool] = None):
    return train_ground_truth(graph, targets, dim=config.dim, epochs=config.gt_epochs, lr=config.gt_lr,
                              neg_per_pos=config.neg_per_pos, seed=config.seed, batch_size=config.gt_batch,
                              l2=config.gt_l2, verbose=config.verbose if verbose is None else verbose)
