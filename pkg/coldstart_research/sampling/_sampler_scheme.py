from abc import ABC, abstractmethod
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from .._scheme import SamplingError
from ..data.graph import BipartiteGraph
from ..data.neighborhood import Subgraph, grow_tree


class SamplerKind(str, Enum):
    RANDOM = "random"
    IMPORTANCE = "importance"
    DYNAMIC = "dynamic"


def as_fanout(k: Union[int, Sequence[int]], l_max: Optional[int] = None) -> tuple:
    if isinstance(k, (int, np.integer)):
        if l_max is None:
            raise SamplingError("l_max is required with a scalar budget")
        return (int(k),) * int(l_max)
    return tuple(int(x) for x in k)


class NeighborSampler(ABC):
    """
    Builds a per-target neighborhood tree with at most fanout[l-1] children per parent,
    so layer l never holds more than prod(fanout[:l]) nodes (K^l for a uniform budget).
    """
    kind: SamplerKind

    def __init__(self, graph: BipartiteGraph, k: Union[int, Sequence[int]], l_max: Optional[int] = None):
        self.graph = graph
        self.fanout = as_fanout(k, l_max)

    @property
    def l_max(self) -> int:
        return len(self.fanout)

    @abstractmethod
    def sample(self, target: int, seed: Optional[int] = None, first_order: Optional[np.ndarray] = None) -> Subgraph:
        pass


class TreeSampler(NeighborSampler):
    """Grows the tree parent by parent, drawing each parent's children with `_pick`."""

    def sample(self, target: int, seed: Optional[int] = None, first_order: Optional[np.ndarray] = None) -> Subgraph:
        rng = np.random.default_rng(seed)
        return grow_tree(self.graph, target, self.fanout,
                         lambda parent, cands, budget, layer: self._pick(parent, cands, budget, layer, rng),
                         first_order=first_order)

    @abstractmethod
    def _pick(self, parent: int, candidates: np.ndarray, budget: int, layer: int,
              rng: np.random.Generator) -> np.ndarray:
        """Choose `budget` of the candidates (only called when there are more candidates than budget)."""
        pass
