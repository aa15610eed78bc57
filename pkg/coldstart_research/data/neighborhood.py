from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .._scheme import SamplingError
from .._seeding import derive_seed


@dataclass(frozen=True)
class Subgraph:
    """
    Neighborhood tree of one target.
    layers[0] is [target]; parents[l][j] indexes the parent of layers[l][j] inside layers[l-1].
    scores[l] holds the selection score of each layer-l node when a scoring sampler built the tree.
    """
    target: int
    layers: Tuple[np.ndarray, ...]
    parents: Tuple[np.ndarray, ...]
    scores: Optional[Tuple[np.ndarray, ...]] = field(default=None, compare=False)

    @property
    def depth(self) -> int:
        return len(self.layers) - 1

    @property
    def size(self) -> int:
        return int(sum(len(layer) for layer in self.layers))

    def layer(self, l: int) -> np.ndarray:
        return self.layers[l]

    def children(self, l: int, index: int) -> np.ndarray:
        """Positions in layer l+1 whose parent is layers[l][index]."""
        if l + 1 > self.depth:
            return np.zeros(0, dtype=np.int64)
        return np.flatnonzero(self.parents[l + 1] == index)

    def parent_node(self, l: int, index: int) -> int:
        if l == 0:
            return -1
        return int(self.layers[l - 1][self.parents[l][index]])

    def nodes(self) -> set:
        return set(np.concatenate(self.layers).tolist())

    def tree_edges(self) -> List[Tuple[int, int]]:
        edges = []
        for l in range(1, len(self.layers)):
            for j, node in enumerate(self.layers[l]):
                edges.append((int(self.layers[l - 1][self.parents[l][j]]), int(node)))
        return edges

    def adjacency(self) -> Dict[int, np.ndarray]:
        """Undirected, deduplicated adjacency over the tree edges."""
        adj: Dict[int, set] = {int(self.target): set()}
        for a, b in self.tree_edges():
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)
        return {k: np.array(sorted(v), dtype=np.int64) for k, v in adj.items()}

    def equals(self, other: "Subgraph") -> bool:
        if self.target != other.target or len(self.layers) != len(other.layers):
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.layers, other.layers)) and \
            all(np.array_equal(a, b) for a, b in zip(self.parents, other.parents))


# the masked neighborhood of the data protocol is the same tree type
MaskedNeighborhood = Subgraph


def _empty() -> np.ndarray:
    return np.zeros(0, dtype=np.int64)


def candidates_of(graph, parent: int, grandparent: int) -> np.ndarray:
    """Neighbors of `parent` minus the edge that leads straight back."""
    nbrs = graph.neighbors(parent)
    if grandparent < 0:
        return nbrs
    return nbrs[nbrs != grandparent]


def grow_tree(graph, target: int, fanout: Sequence[int],
              pick: Callable[[int, np.ndarray, int, int], np.ndarray],
              first_order: Optional[np.ndarray] = None) -> Subgraph:
    """
    Expand layer by layer; every parent keeps at most fanout[l-1] of its candidates as chosen by
    pick(parent, candidates, budget, layer). `first_order` pins layer 1 to a given neighbor set.
    """
    if not graph.has_node(target):
        raise SamplingError(f"node {target} is not in the graph")
    if graph.degree(target) == 0:
        raise SamplingError(f"node {target} has no neighbors to sample")
    layers = [np.array([target], dtype=np.int64)]
    parents = [np.array([-1], dtype=np.int64)]
    for l in range(1, len(fanout) + 1):
        budget = int(fanout[l - 1])
        nodes, links = [], []
        for j, parent in enumerate(layers[l - 1].tolist()):
            if l == 1 and first_order is not None:
                chosen = np.asarray(first_order, dtype=np.int64)[:budget]
            else:
                grandparent = int(layers[l - 2][parents[l - 1][j]]) if l >= 2 else -1
                cands = candidates_of(graph, parent, grandparent)
                if len(cands) == 0:
                    continue
                chosen = cands if len(cands) <= budget else np.asarray(pick(parent, cands, budget, l), dtype=np.int64)
            nodes.append(chosen)
            links.append(np.full(len(chosen), j, dtype=np.int64))
        layers.append(np.concatenate(nodes) if nodes else _empty())
        parents.append(np.concatenate(links) if links else _empty())
    return Subgraph(int(target), tuple(layers), tuple(parents))


def mask_neighborhood(graph, target: int, k: int, l_max: int, seed: int) -> Subgraph:
    """Keep K uniformly drawn neighbors per parent (at most K^l at layer l), the cold-start masking protocol."""
    if k < 1 or l_max < 1:
        raise SamplingError(f"mask_neighborhood needs k >= 1 and l_max >= 1, got k={k}, l_max={l_max}")
    rng = np.random.default_rng(seed)

    def pick(parent, cands, budget, layer):
        return rng.choice(cands, size=budget, replace=False)

    return grow_tree(graph, target, (k,) * l_max, pick)


def first_order_sample(graph, node: int, k: int, seed: int) -> np.ndarray:
    """
    The K first-order neighbors a node keeps under masking, sorted by id.
    Seeded per node, so every stage that asks for the same node gets the same set.
    """
    nbrs = graph.neighbors(node)
    if len(nbrs) <= k:
        return nbrs.copy()
    rng = np.random.default_rng(derive_seed(seed, "first-order", int(node)))
    return np.sort(rng.choice(nbrs, size=k, replace=False))
