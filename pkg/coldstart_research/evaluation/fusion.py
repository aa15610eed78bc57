import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from .._scheme import ColdStartError, DivergenceError, EncoderError, NonFiniteError
from .._seeding import derive_seed, make_rng
from ..autodiff import ops
from ..autodiff.params import Adam, ParamStore
from ..autodiff.tensor import Tape, Tensor
from ..data.graph import BipartiteGraph
from ..models.meta_aggregator import compute_meta_embeddings
from ..pretrain._task_scheme import PretextTask
from ..pretrain.ground_truth import GroundTruth, sample_negatives
from ..pretrain.losses import bpr_loss, reconstruction_loss
from ..pretrain.tasks import GraphTask
from .metrics import RankingResult, eval_intrinsic, items_by_user, mean_cosine, ranking_metrics

FUSION = "fusion"


class FusedRecommender:
    '''
    Concatenates the embeddings of the enabled pretext tasks and maps them to d dimensions
    with one learned matrix W of shape (m*d, d).
    Per-node encoder inputs (subgraphs, paths) are sampled once by prepare() and reused,
    unless they are explicitly re-sampled.
    - fanout: neighbor budget per layer for the sampled inputs
    '''

    def __init__(self, tasks: Sequence[PretextTask], graph: BipartiteGraph, fanout: Sequence[int], dim: int,
                 seed: int = 0, name: str = FUSION):
        if not tasks:
            raise EncoderError("fusion needs at least one pretext task")
        self.tasks = list(tasks)
        self.graph = graph
        self.fanout = tuple(fanout)
        self.dim = dim
        self.seed = seed
        self.name = name
        self.store = ParamStore()
        for task in self.tasks:
            self.store.merge(task.store)
        self.W = self.store.xavier(f"{name}/W", (len(self.tasks) * dim, dim), make_rng(seed, name, "init"))
        self._samples: Dict[str, Dict[int, object]] = {t.task_id: {} for t in self.tasks}
        self.isolated: set = set()

    @property
    def task_ids(self) -> List[str]:
        return [t.task_id for t in self.tasks]

    def prepare(self, nodes: Sequence[int], round_: int = 0, force: bool = False):
        """Sample encoder inputs for every node not cached yet (all of them with force=True)."""
        nodes = [int(n) for n in nodes]
        todo = [n for n in nodes if force or n not in self._samples[self.tasks[0].task_id]]
        todo = [n for n in todo if n not in self.isolated]
        isolated = [n for n in todo if self.graph.degree(n) == 0]
        self.isolated.update(isolated)
        todo = [n for n in todo if self.graph.degree(n) > 0]
        if not todo:
            return
        for task in self.tasks:
            samples = task.sample(todo, self.fanout, derive_seed(self.seed, self.name, "sample", round_))
            self._samples[task.task_id].update(zip(todo, samples))

    def freeze_encoders(self):
        for task in self.tasks:
            self.store.freeze(f"{task.task_id}/")

    def encode(self, nodes: Sequence[int]) -> Tensor:
        '''
        n x d fused embeddings. Nodes without neighbors get the zero vector.
        '''
        nodes = [int(n) for n in nodes]
        self.prepare(nodes)
        connected = [n for n in nodes if n not in self.isolated]
        if not connected:
            return ops.as_tensor(np.zeros((len(nodes), self.dim)))
        parts = [task.encode([self._samples[task.task_id][n] for n in connected]) for task in self.tasks]
        fused = ops.concat(parts, axis=-1) @ self.W
        if len(connected) == len(nodes):
            return fused
        padded = ops.concat([fused, np.zeros((1, self.dim))], axis=0)
        position = {n: i for i, n in enumerate(connected)}
        return ops.take(padded, [position.get(n, len(connected)) for n in nodes])

    def task_embeddings(self, task_id: str, nodes: Sequence[int]) -> np.ndarray:
        task = self.tasks[self.task_ids.index(task_id)]
        self.prepare(nodes)
        return task.encode([self._samples[task_id][int(n)] for n in nodes]).value

    def embed(self, nodes: Sequence[int], batch_size: int = 256) -> np.ndarray:
        nodes = np.asarray(nodes, dtype=np.int64)
        out = np.zeros((len(nodes), self.dim))
        for start in range(0, len(nodes), batch_size):
            out[start:start + batch_size] = self.encode(nodes[start:start + batch_size]).value
        return out


def attach_meta_embeddings(tasks: Sequence[PretextTask], k: int, seed: int):
    """Fresh tasks (random init) get meta embeddings from their untrained aggregators."""
    for task in tasks:
        if isinstance(task, GraphTask):
            task.meta_embs = compute_meta_embeddings(task.graph, task.table.value, task.aggregator, k, seed)
            task.store.freeze(f"{task.task_id}/meta")


def infer_fused(node: int, model: FusedRecommender) -> np.ndarray:
    """final d-dim embedding of one node"""
    if model.graph.degree(int(node)) == 0:
        raise EncoderError(f"node {node} has no neighbors to encode")
    return model.encode([int(node)]).value[0]


def relevance(u_emb, i_emb) -> float:
    return float(np.dot(np.asarray(u_emb, dtype=np.float64), np.asarray(i_emb, dtype=np.float64)))


def finetune(model: FusedRecommender, train_n: pd.DataFrame, epochs: int = 10, lr: float = 0.003, seed: int = 0,
             batch_size: int = 256, freeze_encoders: bool = False, resample_each_epoch: bool = False,
             verbose: bool = False) -> pd.DataFrame:
    '''
    BPR over the cold users' training interactions, end to end through the fused embedding.
    With freeze_encoders only W moves. Returns the per-epoch loss history.

    usage:
    - history = finetune(model, splits.extrinsic.train_n, epochs=10, lr=0.003)
    '''
    graph = model.graph
    if freeze_encoders:
        model.freeze_encoders()
    optimizer = Adam(lr)
    users = train_n["user"].to_numpy(dtype=np.int64)
    positives = graph.item_index(train_n["item"].to_numpy(dtype=np.int64))
    model.prepare(np.concatenate([users, graph.side_nodes("item")]))
    history = []
    for epoch in tqdm(range(epochs), disable=not verbose, desc="finetune"):
        rng = make_rng(seed, "finetune", epoch)
        if resample_each_epoch and epoch > 0:
            model.prepare(np.concatenate([users, graph.side_nodes("item")]), round_=epoch, force=True)
        negatives = sample_negatives(graph, users, rng)
        order = rng.permutation(len(users))
        total = 0.0
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            batch_users, batch_pos, batch_neg = users[idx], positives[idx], negatives[idx]
            item_nodes = np.unique(graph.item_node(np.concatenate([batch_pos, batch_neg])))
            user_nodes = np.unique(batch_users)
            try:
                with Tape() as tape:
                    u = ops.take(model.encode(user_nodes), np.searchsorted(user_nodes, batch_users))
                    items = model.encode(item_nodes)
                    i = ops.take(items, np.searchsorted(item_nodes, graph.item_node(batch_pos)))
                    j = ops.take(items, np.searchsorted(item_nodes, graph.item_node(batch_neg)))
                    loss = bpr_loss(ops.sum(u * i, axis=-1), ops.sum(u * j, axis=-1))
                tape.backward(loss)
                optimizer.step(model.store)
            except NonFiniteError as e:
                raise DivergenceError("finetune", epoch, str(e)) from e
            total += float(loss.value) * len(idx)
        mean_loss = total / max(len(order), 1)
        if not np.isfinite(mean_loss):
            raise DivergenceError("finetune", epoch)
        history.append(("finetune", epoch, mean_loss))
        logging.info(f"finetune\t{epoch}\t{mean_loss:.6f}")
    if model.isolated:
        logging.warning(f"{len(model.isolated)} node(s) without neighbors encoded as zero vectors")
    return pd.DataFrame(history, columns=["task", "epoch", "loss"])


def fit_intrinsic_fusion(model: FusedRecommender, train_targets: Sequence[int], gt: GroundTruth, epochs: int = 20,
                         lr: float = 0.003, batch_size: int = 128, seed: int = 0) -> pd.DataFrame:
    """Fit only W on Train_T by 1 - cos against ground truth, encoders frozen."""
    model.freeze_encoders()
    optimizer = Adam(lr)
    targets = np.asarray(train_targets, dtype=np.int64)
    targets = targets[[model.graph.degree(int(t)) > 0 for t in targets]]
    truth = gt.rows(targets)
    history = []
    for epoch in range(epochs):
        order = make_rng(seed, model.name, "fit", epoch).permutation(len(targets))
        total = 0.0
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            with Tape() as tape:
                loss = reconstruction_loss(model.encode(targets[idx]), truth[idx])
            tape.backward(loss)
            optimizer.step(model.store)
            total += float(loss.value) * len(idx)
        history.append(("intrinsic_fusion", epoch, total / max(len(order), 1)))
    return pd.DataFrame(history, columns=["task", "epoch", "loss"])


def intrinsic_report(model: FusedRecommender, test_targets: Sequence[int], gt: GroundTruth) -> Dict[str, float]:
    '''
    Mean cosine to ground truth on Test_T, for the fused embedding and for each
    reconstruction task on its own.
    '''
    targets = np.asarray(test_targets, dtype=np.int64)
    targets = targets[[model.graph.degree(int(t)) > 0 for t in targets]]
    if len(targets) == 0:
        raise ColdStartError("no intrinsic test target has a neighbor left")
    truth = gt.rows(targets)
    report = {"intrinsic_cosine": eval_intrinsic(model.embed(targets), truth)}
    for task_id in ("Rg", "Rp"):
        if task_id in model.task_ids:
            report[f"intrinsic_cosine_{task_id}"] = mean_cosine(model.task_embeddings(task_id, targets), truth)
    return report


def eval_extrinsic(model: FusedRecommender, train_n: pd.DataFrame, test_n: pd.DataFrame, k: int = 20,
                   users: Optional[Sequence[int]] = None) -> RankingResult:
    """Rank every item outside each cold user's training set by inner product with the user."""
    graph = model.graph
    train_items = items_by_user(train_n, graph.num_users)
    test_items = items_by_user(test_n, graph.num_users)
    if users is None:
        users = sorted(set(train_items) | set(test_items))
    users = np.asarray(users, dtype=np.int64)
    user_embs = model.embed(users)
    item_embs = model.embed(graph.side_nodes("item"))
    return ranking_metrics(user_embs @ item_embs.T, users, train_items, test_items, k)
