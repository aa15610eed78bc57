import logging
from typing import Dict, Sequence

import numpy as np
from tqdm import tqdm

from .._scheme import EncoderError
from ..autodiff import ops
from ..autodiff.params import ParamStore
from ..autodiff.tensor import Tensor
from ..data.graph import BipartiteGraph
from ..data.neighborhood import first_order_sample


class MetaAggregator:
    '''
    One self-attention block over the initial embeddings of K first-order neighbors,
    averaged into the meta embedding of the target.
    - store/prefix: parameters land under f"{prefix}/Wq", f"{prefix}/Wk", f"{prefix}/Wv"
    - dim: embedding size d

    usage:
    - agg = MetaAggregator(store, "Rg/meta", 32, rng)
    - meta = agg(ops.embed_lookup(table, neighbor_ids))
    '''

    def __init__(self, store: ParamStore, prefix: str, dim: int, rng: np.random.Generator):
        self.prefix = prefix
        self.dim = dim
        self.Wq = store.xavier(f"{prefix}/Wq", (dim, dim), rng)
        self.Wk = store.xavier(f"{prefix}/Wk", (dim, dim), rng)
        self.Wv = store.xavier(f"{prefix}/Wv", (dim, dim), rng)

    def __call__(self, neighbor_embs: Tensor) -> Tensor:
        """K x d -> d, or B x K x d -> B x d"""
        if neighbor_embs.ndim not in (2, 3) or neighbor_embs.shape[-2] == 0:
            raise EncoderError(f"meta aggregation needs at least one neighbor row, got shape {neighbor_embs.shape}")
        out, _ = ops.scaled_dot_attention(neighbor_embs @ self.Wq, neighbor_embs @ self.Wk, neighbor_embs @ self.Wv)
        return ops.mean(out, axis=-2)


def meta_aggregate(init_neighbor_embs, aggregator: MetaAggregator) -> Tensor:
    return aggregator(ops.as_tensor(init_neighbor_embs))


def meta_batch(aggregator: MetaAggregator, table: Tensor, neighbor_sets: Sequence[np.ndarray]) -> Tensor:
    """
    Meta embeddings for a batch whose neighbor sets may differ in size.
    Sets of equal size share one batched attention; rows come back in input order.
    """
    sizes = np.array([len(s) for s in neighbor_sets])
    if len(sizes) == 0 or sizes.min() == 0:
        raise EncoderError("every target needs at least one first-order neighbor")
    parts, order = [], []
    for size in np.unique(sizes).tolist():
        members = np.flatnonzero(sizes == size)
        ids = np.stack([neighbor_sets[m] for m in members])
        parts.append(aggregator(ops.embed_lookup(table, ids)))
        order.append(members)
    stacked = ops.concat(parts, axis=0)
    inverse = np.argsort(np.concatenate(order), kind="stable")
    return ops.take(stacked, inverse)


def first_order_sets(graph: BipartiteGraph, nodes: Sequence[int], k: int, seed: int) -> Dict[int, np.ndarray]:
    return {int(n): first_order_sample(graph, int(n), k, seed) for n in nodes}


def compute_meta_embeddings(graph: BipartiteGraph, table: np.ndarray, aggregator: MetaAggregator, k: int, seed: int,
                            batch_size: int = 512, verbose: bool = False) -> np.ndarray:
    """
    Meta embedding of every node from K seeded first-order neighbors, computed once and frozen.
    Isolated nodes get the zero vector.
    """
    table = ops.as_tensor(np.asarray(table))
    metas = np.zeros((graph.num_nodes, aggregator.dim))
    connected = np.flatnonzero(graph.degrees > 0)
    for start in tqdm(range(0, len(connected), batch_size), disable=not verbose, desc="meta embeddings"):
        nodes = connected[start:start + batch_size]
        sets = [first_order_sample(graph, int(n), k, seed) for n in nodes]
        metas[nodes] = meta_batch(aggregator, table, sets).value
    logging.debug(f"meta embeddings for {len(connected)}/{graph.num_nodes} nodes ({aggregator.prefix})")
    return metas
