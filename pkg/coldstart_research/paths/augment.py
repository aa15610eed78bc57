import math
from typing import List, Optional

import numpy as np

from .._scheme import AugmentationError
from .._seeding import derive_seed
from ..data.graph import BipartiteGraph
from ..data.neighborhood import Subgraph, candidates_of
from .walks import Path

OPS = ("delete", "substitute", "both")


def _check(op: str, ratio: float):
    if op not in OPS:
        raise AugmentationError(f"unknown augmentation {op!r}, expected one of {OPS}")
    if not 0.0 <= ratio <= 1.0:
        raise AugmentationError(f"ratio must lie in [0, 1], got {ratio}")


def _count(ratio: float, size: int) -> int:
    return int(math.floor(ratio * size + 1e-9))


def _need_graph(graph: Optional[BipartiteGraph]) -> BipartiteGraph:
    if graph is None:
        raise AugmentationError("substitution draws from the full graph, pass graph=")
    return graph


class GraphAugmentor:
    """
    Deletion and substitution views of neighborhood trees and paths for contrastive training.
    - delete_ratio: share of each layer (or path) deleted
    - substitute_ratio: share replaced by a neighbor of the parent
    """

    def __init__(self, graph: Optional[BipartiteGraph], op: str = "delete", delete_ratio: float = 0.2,
                 substitute_ratio: float = 0.2):
        _check(op, delete_ratio)
        _check(op, substitute_ratio)
        self.graph = graph
        self.op = op
        self.delete_ratio = delete_ratio
        self.substitute_ratio = substitute_ratio

    @property
    def ratio(self) -> float:
        return self.substitute_ratio if self.op == "substitute" else self.delete_ratio

    def subgraph(self, sub: Subgraph, seed: int) -> Subgraph:
        return augment_subgraph(sub, self.op, self.ratio, seed, self.graph, self.substitute_ratio)

    def path(self, path: Path, seed: int) -> Path:
        return augment_path(path, self.op, self.ratio, seed, self.graph, self.substitute_ratio)


def delete_subtrees(sub: Subgraph, ratio: float, rng: np.random.Generator) -> Subgraph:
    removed = [np.zeros(len(layer), dtype=bool) for layer in sub.layers]
    for l in range(1, len(sub.layers)):
        n = _count(ratio, len(sub.layers[l]))
        if n:
            removed[l][rng.choice(len(sub.layers[l]), size=n, replace=False)] = True
    # a removed node takes its whole subtree along
    for l in range(2, len(sub.layers)):
        if len(sub.layers[l]):
            removed[l] |= removed[l - 1][sub.parents[l]]
    layers, parents = [sub.layers[0]], [sub.parents[0]]
    new_index = [np.zeros(1, dtype=np.int64)]
    for l in range(1, len(sub.layers)):
        keep = ~removed[l]
        index = np.cumsum(keep) - 1
        new_index.append(index)
        layers.append(sub.layers[l][keep])
        parents.append(new_index[l - 1][sub.parents[l][keep]])
    return Subgraph(sub.target, tuple(layers), tuple(parents))


def _substitutes(graph: BipartiteGraph, parent: int, grandparent: int, target: int) -> np.ndarray:
    """neighbors of `parent` minus the grandparent and the target; the target only when nothing else is left"""
    pool = candidates_of(graph, parent, grandparent)
    pool = pool[pool != target]
    if len(pool) == 0:
        pool = graph.neighbors(parent)
        pool = pool[pool != target] if (pool != target).any() else pool
    return pool


def substitute_nodes(sub: Subgraph, ratio: float, rng: np.random.Generator, graph: BipartiteGraph) -> Subgraph:
    layers = [layer.copy() for layer in sub.layers]
    children: List[List[np.ndarray]] = [
        [np.flatnonzero(sub.parents[l + 1] == j) if l + 1 < len(layers) else np.zeros(0, dtype=np.int64)
         for j in range(len(layers[l]))]
        for l in range(len(layers))
    ]

    def parent_node(l, j):
        return int(layers[l - 1][sub.parents[l][j]]) if l >= 1 else -1

    def redraw_below(l, j):
        kids = children[l][j]
        if len(kids) == 0:
            return
        cands = _substitutes(graph, int(layers[l][j]), parent_node(l, j), sub.target)
        fresh = rng.choice(cands, size=len(kids), replace=len(cands) < len(kids))
        layers[l + 1][kids] = fresh
        for kid in kids.tolist():
            redraw_below(l + 1, kid)

    for l in range(1, len(layers)):
        n = _count(ratio, len(layers[l]))
        if not n:
            continue
        for j in np.sort(rng.choice(len(layers[l]), size=n, replace=False)).tolist():
            owner = int(sub.parents[l][j])
            pool = _substitutes(graph, parent_node(l, j), parent_node(l - 1, owner), sub.target)
            replacement = int(pool[rng.integers(len(pool))])
            if replacement != layers[l][j]:
                layers[l][j] = replacement
                redraw_below(l, j)
    return Subgraph(sub.target, tuple(layers), sub.parents)


def augment_subgraph(sub: Subgraph, op: str, ratio: float, seed: int, graph: Optional[BipartiteGraph] = None,
                     substitute_ratio: Optional[float] = None) -> Subgraph:
    """
    delete: per layer floor(ratio*|layer|) uniformly chosen nodes go, with their subtrees.
    substitute: chosen nodes are replaced by a uniform draw from their parent's neighbors,
    leaving out the grandparent and the target whenever anything else is left, and the
    replacement's subtree is re-drawn the same way, keeping every layer size.
    both: delete with `ratio`, then substitute with `substitute_ratio` (defaults to `ratio`).
    The target is never touched.
    """
    _check(op, ratio)
    second = ratio if substitute_ratio is None else substitute_ratio
    _check(op, second)
    if op != "both" and ratio == 0.0:
        return sub
    if op == "delete":
        return delete_subtrees(sub, ratio, np.random.default_rng(seed))
    if op == "substitute":
        return substitute_nodes(sub, ratio, np.random.default_rng(seed), _need_graph(graph))
    thinned = delete_subtrees(sub, ratio, np.random.default_rng(derive_seed(seed, "delete")))
    return substitute_nodes(thinned, second, np.random.default_rng(derive_seed(seed, "substitute")),
                            _need_graph(graph))


def delete_from_path(path: Path, ratio: float, rng: np.random.Generator) -> Path:
    n = _count(ratio, len(path))
    if n == 0:
        return path
    if n >= len(path):
        raise AugmentationError(f"deleting {n} of {len(path)} nodes would empty the path")
    free = [p for p in range(len(path)) if p != path.anchor]
    drop = set(rng.choice(free, size=n, replace=False).tolist())
    nodes = tuple(node for p, node in enumerate(path.nodes) if p not in drop)
    anchor = path.anchor - sum(1 for p in drop if p < path.anchor)
    return Path(nodes, path.origin, anchor, path.truncated)


def substitute_in_path(path: Path, ratio: float, rng: np.random.Generator, graph: BipartiteGraph) -> Path:
    n = _count(ratio, len(path))
    if n == 0 or len(path) < 2:
        return path
    free = [p for p in range(len(path)) if p != path.anchor]
    nodes = list(path.nodes)
    for p in np.sort(rng.choice(free, size=min(n, len(free)), replace=False)).tolist():
        # the predecessor plays the parent; the head of the path borrows its successor
        parent = nodes[p - 1] if p > 0 else nodes[1]
        pool = graph.neighbors(parent)
        if len(pool):
            nodes[p] = int(pool[rng.integers(len(pool))])
    return Path(tuple(nodes), path.origin, path.anchor, path.truncated)


def augment_path(path: Path, op: str, ratio: float, seed: int, graph: Optional[BipartiteGraph] = None,
                 substitute_ratio: Optional[float] = None) -> Path:
    """Deletion compacts the sequence; the anchor node is never deleted or substituted."""
    _check(op, ratio)
    second = ratio if substitute_ratio is None else substitute_ratio
    _check(op, second)
    if op != "both" and ratio == 0.0:
        return path
    if op == "delete":
        return delete_from_path(path, ratio, np.random.default_rng(seed))
    if op == "substitute":
        return substitute_in_path(path, ratio, np.random.default_rng(seed), _need_graph(graph))
    thinned = delete_from_path(path, ratio, np.random.default_rng(derive_seed(seed, "delete")))
    return substitute_in_path(thinned, second, np.random.default_rng(derive_seed(seed, "substitute")),
                              _need_graph(graph))
