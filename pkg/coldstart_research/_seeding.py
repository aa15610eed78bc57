import hashlib

import numpy as np


def _as_entropy(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_seed(*keys) -> int:
    """Stable 63-bit seed from any mix of ints and strings, e.g. derive_seed(seed, "Rg", "mask", node)."""
    sequence = np.random.SeedSequence([_as_entropy(k) for k in keys])
    return int(sequence.generate_state(1, dtype=np.uint64)[0]) >> 1


def make_rng(*keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*keys))
