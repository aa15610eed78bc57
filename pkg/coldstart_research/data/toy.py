from pathlib import Path

import numpy as np
import pandas as pd


def make_block_dataset(n_users: int = 200, n_items: int = 100, n_blocks: int = 4, seed: int = 0,
                       heavy_frac: float = 0.6, in_block: float = 0.85) -> pd.DataFrame:
    """
    Synthetic implicit-feedback data with planted block structure.
    Users and items are dealt round-robin into blocks; a user draws `in_block` of its items
    from its own block. A `heavy_frac` share of users is active (30-45 interactions), the
    rest cold (4-20), so both meta-split partitions are populated under the default thresholds.
    Returns columns user, item, timestamp.
    """
    rng = np.random.default_rng(seed)
    user_block = np.arange(n_users) % n_blocks
    item_block = np.arange(n_items) % n_blocks
    rows = []
    clock = 978300000
    for u in range(n_users):
        heavy = rng.random() < heavy_frac
        deg = int(rng.integers(30, 46) if heavy else rng.integers(4, 21))
        own = np.flatnonzero(item_block == user_block[u])
        other = np.flatnonzero(item_block != user_block[u])
        n_own = min(len(own), int(round(in_block * deg)))
        n_other = min(len(other), deg - n_own)
        items = np.concatenate([rng.choice(own, size=n_own, replace=False),
                                rng.choice(other, size=n_other, replace=False)])
        for i in rng.permutation(items).tolist():
            clock += int(rng.integers(1, 600))
            rows.append((u + 1, i + 1, clock))
    return pd.DataFrame(rows, columns=["user", "item", "timestamp"])


def write_tsv(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame[["user", "item", "timestamp"]].to_csv(path, sep="\t", header=False, index=False)
    return path
