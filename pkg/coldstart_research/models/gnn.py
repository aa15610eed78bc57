from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .._scheme import EncoderError
from ..autodiff import ops
from ..autodiff.params import ParamStore
from ..autodiff.tensor import Tensor
from ..data.neighborhood import Subgraph

ACTIVATIONS = {"tanh": ops.tanh, "sigmoid": ops.sigmoid}


@dataclass(frozen=True)
class SubgraphBatch:
    """
    A forest of neighborhood trees laid out depth by depth.
    nodes[t] holds the depth-t nodes of every tree; parents[t][j] indexes into nodes[t-1],
    so parents[1] maps first-order nodes onto their tree (= target index in the batch).
    """
    targets: np.ndarray
    nodes: List[np.ndarray]
    parents: List[np.ndarray]

    @classmethod
    def from_subgraphs(cls, subgraphs: Sequence[Subgraph], depth: int) -> "SubgraphBatch":
        nodes = [np.array([s.target for s in subgraphs], dtype=np.int64)]
        parents = [np.full(len(subgraphs), -1, dtype=np.int64)]
        offsets = np.zeros(len(subgraphs), dtype=np.int64)
        for t in range(1, depth + 1):
            layer_nodes, layer_parents, next_offsets = [], [], np.zeros(len(subgraphs), dtype=np.int64)
            size = 0
            for b, sub in enumerate(subgraphs):
                if t <= sub.depth:
                    layer = sub.layers[t]
                    layer_nodes.append(layer)
                    layer_parents.append(sub.parents[t] + offsets[b] if t > 1 else np.full(len(layer), b))
                    next_offsets[b] = size
                    size += len(layer)
            nodes.append(np.concatenate(layer_nodes).astype(np.int64) if layer_nodes else np.zeros(0, dtype=np.int64))
            parents.append(np.concatenate(layer_parents).astype(np.int64) if layer_parents
                           else np.zeros(0, dtype=np.int64))
            offsets = next_offsets
        return cls(nodes[0], nodes, parents)

    @property
    def size(self) -> int:
        return len(self.targets)


class GnnEncoder:
    '''
    Enhanced graph convolution over sampled neighborhood trees.
    Steps 1..L-1 refine every node as act(W^l [meta || previous || mean of children]),
    W^l of shape 3d x d; the last step reads the target out as act(W^L mean(first-order)),
    W^L of shape d x d.
    - activation: "tanh" or "sigmoid"
    '''

    def __init__(self, store: ParamStore, prefix: str, dim: int, n_layers: int, rng: np.random.Generator,
                 activation: str = "tanh"):
        if n_layers < 1:
            raise EncoderError(f"the GNN needs at least one layer, got {n_layers}")
        if activation not in ACTIVATIONS:
            raise EncoderError(f"unknown activation {activation!r}")
        self.prefix = prefix
        self.dim = dim
        self.n_layers = n_layers
        self.act = ACTIVATIONS[activation]
        self.W = [store.xavier(f"{prefix}/W{l}", (3 * dim, dim), rng) for l in range(1, n_layers)]
        self.W.append(store.xavier(f"{prefix}/W{n_layers}", (dim, dim), rng))

    def forward(self, batch: SubgraphBatch, table: Tensor, meta_embs: np.ndarray) -> Tensor:
        """B x d predicted target embeddings."""
        L = self.n_layers
        nodes = batch.nodes + [np.zeros(0, dtype=np.int64)] * max(0, L + 1 - len(batch.nodes))
        parents = batch.parents + [np.zeros(0, dtype=np.int64)] * max(0, L + 1 - len(batch.parents))
        first = np.bincount(parents[1], minlength=batch.size) if len(parents[1]) else np.zeros(batch.size)
        if np.any(first == 0):
            missing = int(batch.targets[np.flatnonzero(first == 0)[0]])
            raise EncoderError(f"target {missing} has an empty first-order layer")
        meta = [ops.as_tensor(meta_embs[nodes[t]].reshape(-1, self.dim)) for t in range(L + 1)]
        h = [ops.embed_lookup(table, nodes[t]) for t in range(L + 1)]
        for l in range(1, L):
            refreshed = list(h)
            for t in range(1, L - l + 1):
                children = ops.segment_mean(h[t + 1], parents[t + 1], len(nodes[t]))
                x = ops.concat([meta[t], h[t], children], axis=-1)
                refreshed[t] = self.act(x @ self.W[l - 1])
            h = refreshed
        readout = ops.segment_mean(h[1], parents[1], batch.size)
        return self.act(readout @ self.W[L - 1])

    def __call__(self, subgraphs: Sequence[Subgraph], table: Tensor, meta_embs: np.ndarray) -> Tensor:
        return self.forward(SubgraphBatch.from_subgraphs(subgraphs, self.n_layers), table, meta_embs)


def gnn_forward(subgraph: Subgraph, encoder: GnnEncoder, meta_embs: np.ndarray, init_embs) -> Tensor:
    """Single-target convenience: d-vector prediction for one tree."""
    return ops.reshape(encoder([subgraph], ops.as_tensor(init_embs), meta_embs), (encoder.dim,))
