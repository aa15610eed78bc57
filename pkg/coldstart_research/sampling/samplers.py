from typing import Optional, Sequence, Union

import numpy as np

from .._scheme import SamplingError
from ..data.graph import BipartiteGraph
from ..data.neighborhood import Subgraph
from ._sampler_scheme import NeighborSampler, SamplerKind, TreeSampler

SCORE_DECIMALS = 10


class RandomSampler(TreeSampler):
    """Uniform choice without replacement per parent."""
    kind = SamplerKind.RANDOM

    def _pick(self, parent, candidates, budget, layer, rng):
        return rng.choice(candidates, size=budget, replace=False)


class ImportanceSampler(TreeSampler):
    """Choice without replacement with probability proportional to candidate degree."""
    kind = SamplerKind.IMPORTANCE

    def _pick(self, parent, candidates, budget, layer, rng):
        weights = self.graph.degrees[candidates].astype(np.float64)
        return rng.choice(candidates, size=budget, replace=False, p=weights / weights.sum())


def enhanced_scores(target_vec: np.ndarray, cand_vecs: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """cosine of every candidate's (meta || current) vector against the target's, rounded for stable ties"""
    norms = (np.linalg.norm(cand_vecs, axis=1) + eps) * (np.linalg.norm(target_vec) + eps)
    return np.round(cand_vecs @ target_vec / norms, SCORE_DECIMALS)


class DynamicSampler(NeighborSampler):
    """
    Layer-wise top-K^l selection by cosine between the concatenated (meta || current)
    embedding of each candidate and of the target. Candidates of layer l are the neighbors
    of kept layer l-1 nodes, minus the target and the edge back to each parent's own parent.
    Ties go to the lower node id; a candidate reachable from several parents hangs under the
    first of them. No randomness: identical embeddings give identical trees.
    """
    kind = SamplerKind.DYNAMIC

    def __init__(self, graph: BipartiteGraph, k: Union[int, Sequence[int]], l_max: Optional[int] = None,
                 meta_embs: Optional[np.ndarray] = None, cur_embs: Optional[np.ndarray] = None):
        super().__init__(graph, k, l_max)
        if meta_embs is None or cur_embs is None:
            raise SamplingError("dynamic sampling needs both meta and current embeddings")
        self.meta_embs = np.asarray(meta_embs, dtype=np.float64)
        self.cur_embs = np.asarray(cur_embs, dtype=np.float64)

    def update(self, cur_embs: np.ndarray):
        """swap in the current embeddings (once per epoch); meta embeddings stay fixed"""
        self.cur_embs = np.asarray(cur_embs, dtype=np.float64)

    def _enhanced(self, nodes: np.ndarray) -> np.ndarray:
        nodes = np.asarray(nodes, dtype=np.int64)
        limit = min(len(self.meta_embs), len(self.cur_embs))
        missing = nodes[(nodes < 0) | (nodes >= limit)]
        if len(missing):
            raise SamplingError(f"no embedding for node {int(missing[0])}")
        vecs = np.concatenate([self.meta_embs[nodes], self.cur_embs[nodes]], axis=1)
        bad = ~np.all(np.isfinite(vecs), axis=1)
        if bad.any():
            raise SamplingError(f"no finite embedding for node {int(nodes[bad][0])}")
        return vecs

    def sample(self, target: int, seed: Optional[int] = None, first_order: Optional[np.ndarray] = None) -> Subgraph:
        graph = self.graph
        if not graph.has_node(target):
            raise SamplingError(f"node {target} is not in the graph")
        if graph.degree(target) == 0:
            raise SamplingError(f"node {target} has no neighbors to sample")
        target_vec = self._enhanced(np.array([target]))[0]
        layers = [np.array([target], dtype=np.int64)]
        parents = [np.array([-1], dtype=np.int64)]
        scores = [np.array([1.0])]
        cap = 1
        for l in range(1, self.l_max + 1):
            cap *= self.fanout[l - 1]
            if l == 1:
                found = graph.neighbors(target) if first_order is None else np.asarray(first_order, dtype=np.int64)
                owner = np.zeros(len(found), dtype=np.int64)
            else:
                found_parts, owner_parts = [], []
                for j, node in enumerate(layers[l - 1].tolist()):
                    back = int(layers[l - 2][parents[l - 1][j]])
                    nbrs = graph.neighbors(node)
                    nbrs = nbrs[(nbrs != back) & (nbrs != target)]
                    found_parts.append(nbrs)
                    owner_parts.append(np.full(len(nbrs), j, dtype=np.int64))
                found = np.concatenate(found_parts) if found_parts else np.zeros(0, dtype=np.int64)
                owner = np.concatenate(owner_parts) if owner_parts else np.zeros(0, dtype=np.int64)
            # np.unique keeps the first occurrence, i.e. the lowest-index parent
            cands, first = np.unique(found, return_index=True)
            owner = owner[first]
            if len(cands) == 0:
                layers.append(np.zeros(0, dtype=np.int64))
                parents.append(np.zeros(0, dtype=np.int64))
                scores.append(np.zeros(0))
                continue
            s = enhanced_scores(target_vec, self._enhanced(cands))
            keep = np.lexsort((cands, -s))[:cap]
            layers.append(cands[keep])
            parents.append(owner[keep])
            scores.append(s[keep])
        return Subgraph(int(target), tuple(layers), tuple(parents), tuple(scores))


SAMPLERS = {
    SamplerKind.RANDOM: RandomSampler,
    SamplerKind.IMPORTANCE: ImportanceSampler,
    SamplerKind.DYNAMIC: DynamicSampler,
}


def make_sampler(kind, graph: BipartiteGraph, k, l_max: Optional[int] = None, meta_embs=None,
                 cur_embs=None) -> NeighborSampler:
    kind = SamplerKind(kind)
    if kind is SamplerKind.DYNAMIC:
        return DynamicSampler(graph, k, l_max, meta_embs=meta_embs, cur_embs=cur_embs)
    return SAMPLERS[kind](graph, k, l_max)


def sample_random(graph: BipartiteGraph, target: int, k: int, l_max: int, seed: int,
                  first_order: Optional[np.ndarray] = None) -> Subgraph:
    return RandomSampler(graph, k, l_max).sample(target, seed, first_order)


def sample_importance(graph: BipartiteGraph, target: int, k: int, l_max: int, seed: int,
                      first_order: Optional[np.ndarray] = None) -> Subgraph:
    return ImportanceSampler(graph, k, l_max).sample(target, seed, first_order)


def sample_dynamic(graph: BipartiteGraph, target: int, k: int, l_max: int, meta_embs: np.ndarray,
                   cur_embs: np.ndarray, first_order: Optional[np.ndarray] = None) -> Subgraph:
    return DynamicSampler(graph, k, l_max, meta_embs=meta_embs, cur_embs=cur_embs).sample(target, None, first_order)
