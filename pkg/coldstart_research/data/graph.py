from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd
import scipy.sparse as sp

USER, ITEM = "user", "item"


class BipartiteGraph:
    """
    Immutable user-item graph over global node ids: users are 0..U-1, items U..U+I-1.
    Adjacency is stored CSR-style over all nodes, each neighbor list sorted by node id
    and carrying the chronological key of the edge.
    """

    def __init__(self, num_users: int, num_items: int, users: np.ndarray, items: np.ndarray,
                 chrono: Optional[np.ndarray] = None):
        self.num_users = int(num_users)
        self.num_items = int(num_items)
        users = np.array(users, dtype=np.int64)
        items = np.array(items, dtype=np.int64)
        chrono = np.zeros(len(users), dtype=np.int64) if chrono is None else np.array(chrono, dtype=np.int64)

        # both directions of every edge, item ids shifted into the global range
        src = np.concatenate([users, items + self.num_users])
        dst = np.concatenate([items + self.num_users, users])
        key = np.concatenate([chrono, chrono])
        order = np.lexsort((dst, src))
        self._indices = dst[order]
        self._chrono = key[order]
        counts = np.bincount(src, minlength=self.num_nodes) if len(src) else np.zeros(self.num_nodes, dtype=np.int64)
        self._indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self._edge_users = users
        self._edge_items = items
        self._edge_chrono = chrono
        for array in (self._indices, self._chrono, self._indptr, self._edge_users, self._edge_items, self._edge_chrono):
            array.setflags(write=False)
        self._incidence = None

    @property
    def num_nodes(self) -> int:
        return self.num_users + self.num_items

    @property
    def num_edges(self) -> int:
        return len(self._edge_users)

    @property
    def sparsity(self) -> float:
        if self.num_users == 0 or self.num_items == 0:
            return 0.0
        return self.num_edges / (self.num_users * self.num_items)

    def is_user(self, node) -> np.ndarray:
        return np.asarray(node) < self.num_users

    def side(self, node: int) -> str:
        return USER if node < self.num_users else ITEM

    def side_nodes(self, side: str) -> np.ndarray:
        if side == USER:
            return np.arange(self.num_users, dtype=np.int64)
        return np.arange(self.num_users, self.num_nodes, dtype=np.int64)

    def item_node(self, item_id):
        return np.asarray(item_id) + self.num_users

    def item_index(self, node):
        return np.asarray(node) - self.num_users

    def neighbors(self, node: int) -> np.ndarray:
        return self._indices[self._indptr[node]:self._indptr[node + 1]]

    def neighbor_chrono(self, node: int) -> np.ndarray:
        return self._chrono[self._indptr[node]:self._indptr[node + 1]]

    def degree(self, node: int) -> int:
        return int(self._indptr[node + 1] - self._indptr[node])

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self._indptr)

    def has_node(self, node: int) -> bool:
        return 0 <= node < self.num_nodes

    def has_edge(self, a: int, b: int) -> bool:
        nbrs = self.neighbors(a)
        pos = np.searchsorted(nbrs, b)
        return bool(pos < len(nbrs) and nbrs[pos] == b)

    @property
    def incidence(self) -> sp.csr_matrix:
        """User x item 0/1 matrix."""
        if self._incidence is None:
            data = np.ones(self.num_edges, dtype=np.float64)
            self._incidence = sp.csr_matrix((data, (self._edge_users, self._edge_items)),
                                            shape=(self.num_users, self.num_items))
        return self._incidence

    def edges(self) -> pd.DataFrame:
        return pd.DataFrame({"user_id": self._edge_users, "item_id": self._edge_items, "chrono": self._edge_chrono})

    def without_edges(self, users: Iterable[int], items: Iterable[int]) -> "BipartiteGraph":
        """Copy of the graph with the given (user, item) edges removed; ids are side-local."""
        drop = set(zip(np.asarray(list(users), dtype=np.int64).tolist(), np.asarray(list(items), dtype=np.int64).tolist()))
        keep = np.array([(u, i) not in drop for u, i in zip(self._edge_users.tolist(), self._edge_items.tolist())], dtype=bool)
        if len(keep) == 0:
            return self
        return BipartiteGraph(self.num_users, self.num_items, self._edge_users[keep], self._edge_items[keep],
                              self._edge_chrono[keep])

    def __repr__(self):
        return f"BipartiteGraph(users={self.num_users}, items={self.num_items}, edges={self.num_edges})"


def build_graph(interactions: Sequence, num_users: Optional[int] = None, num_items: Optional[int] = None,
                chrono: Optional[Sequence[int]] = None) -> BipartiteGraph:
    """
    Build the bipartite graph from Interaction records over dense ids.
    Duplicate (user, item) pairs collapse to one edge keeping the latest key.
    `chrono` overrides the per-interaction ordering key (file order for timestamp-free data).
    """
    interactions = list(interactions)
    users = np.array([x.user_id for x in interactions], dtype=np.int64)
    items = np.array([x.item_id for x in interactions], dtype=np.int64)
    keys = (np.array([x.timestamp for x in interactions], dtype=np.int64) if chrono is None
            else np.asarray(chrono, dtype=np.int64))
    if num_users is None:
        num_users = int(users.max()) + 1 if len(users) else 0
    if num_items is None:
        num_items = int(items.max()) + 1 if len(items) else 0
    if len(users):
        frame = (pd.DataFrame({"u": users, "i": items, "k": keys, "pos": np.arange(len(users))})
                   .sort_values(["k", "pos"], kind="mergesort")
                   .drop_duplicates(["u", "i"], keep="last")
                   .sort_values(["u", "i"], kind="mergesort"))
        users, items, keys = frame["u"].to_numpy(), frame["i"].to_numpy(), frame["k"].to_numpy()
    return BipartiteGraph(num_users, num_items, users, items, keys)
