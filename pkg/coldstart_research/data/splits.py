import logging
import math
from dataclasses import dataclass
from typing import Dict, NamedTuple, Tuple

import numpy as np
import pandas as pd
from sklearn.model_selection import train_test_split

from .._scheme import SplitError
from .._seeding import derive_seed
from .graph import USER, ITEM, BipartiteGraph


@dataclass(frozen=True)
class MetaSplit:
    side: str
    d_t: np.ndarray   # abundant targets, global ids
    d_n: np.ndarray   # cold nodes, global ids
    threshold: int

    def manifest(self) -> pd.DataFrame:
        frame = pd.DataFrame({
            "node_id": np.concatenate([self.d_t, self.d_n]),
            "partition": ["d_t"] * len(self.d_t) + ["d_n"] * len(self.d_n),
        })
        return frame.sort_values("node_id", kind="mergesort").reset_index(drop=True)


class ExtrinsicSplit(NamedTuple):
    train_n: pd.DataFrame   # user, item (global ids), chrono
    test_n: pd.DataFrame
    dropped: int


def meta_split(graph: BipartiteGraph, side: str, threshold: int) -> MetaSplit:
    """node goes to d_t iff its degree is strictly greater than the threshold"""
    if side not in (USER, ITEM):
        raise SplitError(f"side must be '{USER}' or '{ITEM}', got {side!r}")
    if threshold < 0:
        raise SplitError(f"threshold must be >= 0, got {threshold}")
    nodes = graph.side_nodes(side)
    if len(nodes) == 0:
        raise SplitError(f"the {side} side has no nodes")
    degrees = graph.degrees[nodes]
    abundant = degrees > threshold
    split = MetaSplit(side, nodes[abundant], nodes[~abundant], int(threshold))
    logging.info(f"meta split {side}: {len(split.d_t)} targets (> {threshold}), {len(split.d_n)} cold")
    return split


def intrinsic_split(split: MetaSplit, ratio: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    if not 0.0 < ratio < 1.0:
        raise SplitError(f"ratio must lie in (0, 1), got {ratio}")
    n = len(split.d_t)
    if n < 2:
        raise SplitError(f"need at least 2 {split.side} targets for the intrinsic split, got {n}")
    n_train = min(max(int(math.floor(ratio * n + 1e-9)), 1), n - 1)
    train, test = train_test_split(np.sort(split.d_t), train_size=n_train, test_size=n - n_train,
                                   random_state=derive_seed(seed, "intrinsic", split.side) % (2 ** 32), shuffle=True)
    return np.sort(train), np.sort(test)


def extrinsic_split(graph: BipartiteGraph, d_n: np.ndarray, c_frac: float) -> ExtrinsicSplit:
    """
    Chronological cut of every cold user: the first ceil(c*deg) interactions train, the rest test.
    Users that cannot keep one interaction on both sides are dropped and counted.
    """
    if not 0.0 < c_frac < 1.0:
        raise SplitError(f"c_frac must lie in (0, 1), got {c_frac}")
    train_rows, test_rows = [], []
    dropped = 0
    for user in np.sort(np.asarray(d_n, dtype=np.int64)).tolist():
        if user >= graph.num_users:
            raise SplitError(f"extrinsic split is defined on users, node {user} is an item")
        items = graph.neighbors(user)
        chrono = graph.neighbor_chrono(user)
        deg = len(items)
        n_train = math.ceil(round(c_frac * deg, 9))
        if n_train < 1 or n_train >= deg:
            dropped += 1
            continue
        order = np.lexsort((items, chrono))
        for rank, pos in enumerate(order.tolist()):
            row = (user, int(items[pos]), int(chrono[pos]))
            (train_rows if rank < n_train else test_rows).append(row)
    if dropped:
        logging.warning(f"extrinsic split dropped {dropped} cold user(s) without both a train and a test interaction")
    columns = ["user", "item", "chrono"]
    return ExtrinsicSplit(pd.DataFrame(train_rows, columns=columns, dtype=np.int64),
                          pd.DataFrame(test_rows, columns=columns, dtype=np.int64), dropped)


def build_working_graph(graph: BipartiteGraph, test_t: np.ndarray, test_n: pd.DataFrame, k: int,
                        seed: int, train_n: pd.DataFrame = None) -> BipartiteGraph:
    """
    The graph every later stage sees: held-out cold interactions removed, and every
    intrinsic test target reduced to K seeded first-order edges. Cold training
    interactions (`train_n`) are never masked away.
    """
    drop_u = test_n["user"].to_numpy(dtype=np.int64).tolist()
    drop_i = graph.item_index(test_n["item"].to_numpy(dtype=np.int64)).tolist()
    protected = set()
    if train_n is not None:
        protected = set(zip(train_n["user"].tolist(), train_n["item"].tolist()))
    for node in np.sort(np.asarray(test_t, dtype=np.int64)).tolist():
        nbrs = graph.neighbors(node)
        if len(nbrs) <= k:
            continue
        rng = np.random.default_rng(derive_seed(seed, "test-mask", node))
        kept = set(rng.choice(nbrs, size=k, replace=False).tolist())
        for other in nbrs.tolist():
            if other in kept:
                continue
            user, item = (node, other) if node < graph.num_users else (other, node)
            if (user, item) in protected:
                continue
            drop_u.append(user)
            drop_i.append(item - graph.num_users)
    working = graph.without_edges(drop_u, drop_i)
    logging.info(f"working graph keeps {working.num_edges}/{graph.num_edges} edges")
    return working


@dataclass
class ExperimentSplits:
    """Everything the split stage produces, on both sides."""
    user_meta: MetaSplit
    item_meta: MetaSplit
    train_t: Dict[str, np.ndarray]
    test_t: Dict[str, np.ndarray]
    extrinsic: ExtrinsicSplit
    working: BipartiteGraph

    def targets(self, part: str, sides: str = "both") -> np.ndarray:
        source = self.train_t if part == "train" else self.test_t
        chosen = [USER, ITEM] if sides == "both" else [sides]
        return np.concatenate([source[s] for s in chosen]).astype(np.int64)

    @property
    def cold_users(self) -> np.ndarray:
        return np.unique(self.extrinsic.test_n["user"].to_numpy(dtype=np.int64))

    def manifests(self) -> Dict[str, pd.DataFrame]:
        intrinsic = {}
        for side in (USER, ITEM):
            intrinsic[side] = pd.DataFrame({
                "node_id": np.concatenate([self.train_t[side], self.test_t[side]]),
                "partition": ["train"] * len(self.train_t[side]) + ["test"] * len(self.test_t[side]),
            }).sort_values("node_id", kind="mergesort").reset_index(drop=True)
        return {
            "meta_user.tsv": self.user_meta.manifest(),
            "meta_item.tsv": self.item_meta.manifest(),
            "intrinsic_user.tsv": intrinsic[USER],
            "intrinsic_item.tsv": intrinsic[ITEM],
            "extrinsic_train.tsv": self.extrinsic.train_n,
            "extrinsic_test.tsv": self.extrinsic.test_n,
            "working_edges.tsv": self.working.edges(),
        }

    @classmethod
    def from_manifests(cls, graph: BipartiteGraph, frames: Dict[str, pd.DataFrame], thresholds: Tuple[int, int],
                       dropped: int = 0) -> "ExperimentSplits":
        def meta(name, side, threshold):
            f = frames[name]
            return MetaSplit(side, f.loc[f["partition"] == "d_t", "node_id"].to_numpy(dtype=np.int64),
                             f.loc[f["partition"] == "d_n", "node_id"].to_numpy(dtype=np.int64), threshold)

        def part(name, which):
            f = frames[name]
            return f.loc[f["partition"] == which, "node_id"].to_numpy(dtype=np.int64)

        edges = frames["working_edges.tsv"]
        working = BipartiteGraph(graph.num_users, graph.num_items, edges["user_id"].to_numpy(),
                                 edges["item_id"].to_numpy(), edges["chrono"].to_numpy())
        return cls(
            user_meta=meta("meta_user.tsv", USER, thresholds[0]),
            item_meta=meta("meta_item.tsv", ITEM, thresholds[1]),
            train_t={USER: part("intrinsic_user.tsv", "train"), ITEM: part("intrinsic_item.tsv", "train")},
            test_t={USER: part("intrinsic_user.tsv", "test"), ITEM: part("intrinsic_item.tsv", "test")},
            extrinsic=ExtrinsicSplit(frames["extrinsic_train.tsv"], frames["extrinsic_test.tsv"], dropped),
            working=working,
        )


def build_splits(graph: BipartiteGraph, n_i: int, n_u: int, ratio: float, c_frac: float, k: int,
                 seed: int) -> ExperimentSplits:
    user_meta = meta_split(graph, USER, n_i)
    item_meta = meta_split(graph, ITEM, n_u)
    train_t, test_t = {}, {}
    for side, split in ((USER, user_meta), (ITEM, item_meta)):
        train_t[side], test_t[side] = intrinsic_split(split, ratio, seed)
    extrinsic = extrinsic_split(graph, user_meta.d_n, c_frac)
    working = build_working_graph(graph, np.concatenate([test_t[USER], test_t[ITEM]]), extrinsic.test_n, k, seed,
                                  train_n=extrinsic.train_n)
    return ExperimentSplits(user_meta, item_meta, train_t, test_t, extrinsic, working)
