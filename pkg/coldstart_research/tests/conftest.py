import numpy as np
import pytest

from coldstart_research.config import build_config
from coldstart_research.data.graph import build_graph
from coldstart_research.data.reader import Interaction


def random_graph(n_users: int, n_items: int, n_edges: int, seed: int):
    rng = np.random.default_rng(seed)
    pairs = {(int(rng.integers(n_users)), int(rng.integers(n_items))) for _ in range(n_edges)}
    # every node keeps at least one edge
    pairs |= {(u, u % n_items) for u in range(n_users)}
    pairs |= {(i % n_users, i) for i in range(n_items)}
    return build_graph([Interaction(u, i, k) for k, (u, i) in enumerate(sorted(pairs))], n_users, n_items)


@pytest.fixture
def small_graph():
    '''4 users, 3 items, 8 edges'''
    edges = [(0, 0), (0, 1), (1, 1), (1, 2), (2, 0), (2, 2), (3, 0), (3, 1)]
    return build_graph([Interaction(u, i, t) for t, (u, i) in enumerate(edges)], 4, 3)


@pytest.fixture
def dense_graph():
    return random_graph(12, 10, 60, seed=7)


TINY = {
    "dim": 8,
    "n_layers": 2,
    "path_len": 4,
    "transformer_blocks": 1,
    "transformer_heads": 2,
    "k_intrinsic": 2,
    "k_extrinsic": 3,
    "meta_epochs": 1,
    "pretrain_epochs": 1,
    "gt_epochs": 2,
    "finetune_epochs": 1,
    "intrinsic_epochs": 1,
    "bench_epochs": 1,
    "recon_batch": 64,
    "contrastive_batch": 32,
}


def tiny(out_dir, **overrides):
    """Toy dataset with every knob turned down so a full run takes seconds."""
    return build_config(overrides={**TINY, "out_dir": str(out_dir), **overrides})


@pytest.fixture
def tiny_config(tmp_path):
    return tiny(tmp_path / "run")
