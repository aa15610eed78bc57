from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional, Tuple, Union

import numpy as np

from .._scheme import PathError
from ..data.graph import BipartiteGraph
from ..data.neighborhood import Subgraph

# reserved token, outside every user/item id range
MASK_TOKEN = -1
RETRY_CAP = 10


@dataclass(frozen=True)
class Path:
    nodes: Tuple[int, ...]
    origin: int
    anchor: int = 0          # position of the node the path was generated for
    truncated: bool = False  # walk dead-ended before reaching the requested length

    def __len__(self):
        return len(self.nodes)

    def alternates(self, num_users: int) -> bool:
        sides = [n < num_users for n in self.nodes]
        return all(a != b for a, b in zip(sides, sides[1:]))

    def dump(self, num_users: int) -> str:
        """`side:id` tokens with side-local ids, e.g. 'u:3 i:7 u:1'"""
        return " ".join(f"u:{n}" if n < num_users else f"i:{n - num_users}" for n in self.nodes)


@dataclass(frozen=True)
class MaskedPath:
    path: Path
    mask_pos: int
    original: int

    @property
    def rendered(self) -> Tuple[int, ...]:
        nodes = list(self.path.nodes)
        nodes[self.mask_pos] = MASK_TOKEN
        return tuple(nodes)

    def unmask(self) -> Path:
        return self.path


class PositionedPaths(NamedTuple):
    paths: List[Path]
    incomplete: bool   # some positions could not be filled


Source = Union[BipartiteGraph, Subgraph]


def neighbor_fn(source: Source) -> Callable[[int], np.ndarray]:
    """Walk adjacency: tree edges of a neighborhood (undirected) or the full graph."""
    if isinstance(source, Subgraph):
        adjacency = source.adjacency()
        empty = np.zeros(0, dtype=np.int64)
        return lambda node: adjacency.get(int(node), empty)
    return source.neighbors


def _walk(neighbors, start: int, steps: int, rng: np.random.Generator) -> Tuple[List[int], bool]:
    nodes = [int(start)]
    for _ in range(steps):
        nbrs = neighbors(nodes[-1])
        if len(nbrs) == 0:
            return nodes, False
        nodes.append(int(nbrs[rng.integers(len(nbrs))]))
    return nodes, True


def _walk_with_retries(neighbors, start, steps, rng, retries):
    best = None
    for _ in range(retries + 1):
        nodes, complete = _walk(neighbors, start, steps, rng)
        if complete:
            return nodes, True
        if best is None or len(nodes) > len(best):
            best = nodes
    return best, False


def _check_start(neighbors, start: int):
    if len(neighbors(start)) == 0:
        raise PathError(f"node {start} is isolated, no walk can start from it")


def generate_paths(source: Source, start: int, t_len: int, count: int, seed: int,
                   retries: int = RETRY_CAP) -> List[Path]:
    """`count` uniform random walks of t_len nodes from `start`."""
    if t_len < 2:
        raise PathError(f"paths need at least 2 nodes, got t_len={t_len}")
    neighbors = neighbor_fn(source)
    _check_start(neighbors, start)
    rng = np.random.default_rng(seed)
    paths = []
    for _ in range(count):
        nodes, complete = _walk_with_retries(neighbors, start, t_len - 1, rng, retries)
        paths.append(Path(tuple(nodes), int(start), 0, not complete))
    return paths


def positioned_path(neighbors, target: int, t_len: int, pos: int, rng: np.random.Generator,
                    retries: int = RETRY_CAP) -> Optional[Path]:
    """A walk of t_len nodes holding `target` at index `pos`, or None after the retry cap."""
    for _ in range(retries + 1):
        back, ok_back = _walk(neighbors, target, pos, rng)
        forward, ok_forward = _walk(neighbors, target, t_len - 1 - pos, rng)
        if ok_back and ok_forward:
            return Path(tuple(back[::-1] + forward[1:]), int(target), pos)
    return None


def generate_positioned_paths(source: Source, target: int, t_len: int, seed: int = 0,
                              retries: int = RETRY_CAP) -> PositionedPaths:
    """T walks, the t-th one placing the target at index t."""
    if t_len < 2:
        raise PathError(f"paths need at least 2 nodes, got t_len={t_len}")
    neighbors = neighbor_fn(source)
    _check_start(neighbors, target)
    rng = np.random.default_rng(seed)
    paths = []
    for pos in range(t_len):
        path = positioned_path(neighbors, target, t_len, pos, rng, retries)
        if path is not None:
            paths.append(path)
    return PositionedPaths(paths, len(paths) < t_len)


def mask_path(path: Union[Path, MaskedPath], pos: int) -> MaskedPath:
    if isinstance(path, MaskedPath):
        if path.mask_pos == pos:
            return path
        path = path.unmask()
    if not 0 <= pos < len(path):
        raise PathError(f"mask position {pos} outside a path of length {len(path)}")
    return MaskedPath(path, pos, path.nodes[pos])


def dump_paths(paths: List[Path], num_users: int) -> str:
    return "\n".join(p.dump(num_users) for p in paths) + ("\n" if paths else "")
