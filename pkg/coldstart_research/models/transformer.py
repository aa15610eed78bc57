from typing import List, Optional, Sequence, Tuple

import numpy as np

from .._scheme import EncoderError
from ..autodiff import ops
from ..autodiff.params import ParamStore
from ..autodiff.tensor import Tensor
from ..paths.walks import MASK_TOKEN


class PathTransformer:
    '''
    Pre-norm Transformer encoder over user-item paths.
    Tokens are global node ids looked up in the task's embedding table; MASK_TOKEN is
    replaced by a learned mask vector before positional embeddings are added.
    - max_len: positional table length, must cover the longest path
    - n_blocks/n_heads: attention depth and heads, dim must divide by n_heads

    usage:
    - tr = PathTransformer(store, "Rp/tr", 32, 6, rng=rng)
    - hidden = tr.encode(tokens, table)          # B x T x d
    '''

    def __init__(self, store: ParamStore, prefix: str, dim: int, max_len: int, n_blocks: int = 2,
                 n_heads: int = 2, rng: Optional[np.random.Generator] = None):
        if dim % n_heads:
            raise EncoderError(f"dim {dim} does not split into {n_heads} heads")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.prefix = prefix
        self.dim = dim
        self.max_len = max_len
        self.n_heads = n_heads
        self.positions = store.embedding(f"{prefix}/pos", max_len, dim, rng, scale=0.1)
        self.mask_vec = store.embedding(f"{prefix}/mask", 1, dim, rng, scale=0.1)
        self.blocks = []
        for b in range(n_blocks):
            p = f"{prefix}/block{b}"
            self.blocks.append({
                "ln1_g": store.ones(f"{p}/ln1_g", (dim,)), "ln1_b": store.zeros(f"{p}/ln1_b", (dim,)),
                "Wq": store.xavier(f"{p}/Wq", (dim, dim), rng), "Wk": store.xavier(f"{p}/Wk", (dim, dim), rng),
                "Wv": store.xavier(f"{p}/Wv", (dim, dim), rng), "Wo": store.xavier(f"{p}/Wo", (dim, dim), rng),
                "ln2_g": store.ones(f"{p}/ln2_g", (dim,)), "ln2_b": store.zeros(f"{p}/ln2_b", (dim,)),
                "W1": store.xavier(f"{p}/W1", (dim, 2 * dim), rng), "b1": store.zeros(f"{p}/b1", (2 * dim,)),
                "W2": store.xavier(f"{p}/W2", (2 * dim, dim), rng), "b2": store.zeros(f"{p}/b2", (dim,)),
            })
        self.ln_g = store.ones(f"{prefix}/ln_g", (dim,))
        self.ln_b = store.zeros(f"{prefix}/ln_b", (dim,))

    def _embed(self, tokens: np.ndarray, table: Tensor) -> Tensor:
        rows = table.shape[0]
        bad = tokens[(tokens != MASK_TOKEN) & ((tokens < 0) | (tokens >= rows))]
        if len(bad):
            raise EncoderError(f"unknown token id {int(bad[0])} (table has {rows} rows)")
        masked = (tokens == MASK_TOKEN).astype(np.float64)[..., None]
        x = ops.embed_lookup(table, np.where(tokens == MASK_TOKEN, 0, tokens))
        x = x * (1.0 - masked) + ops.mul(masked, ops.reshape(self.mask_vec, (self.dim,)))
        return x + ops.take(self.positions, np.arange(tokens.shape[1]))

    def _attention(self, x: Tensor, block: dict) -> Tuple[Tensor, List[Tensor]]:
        q, k, v = x @ block["Wq"], x @ block["Wk"], x @ block["Wv"]
        width = self.dim // self.n_heads
        heads, weights = [], []
        for h in range(self.n_heads):
            out, w = ops.scaled_dot_attention(ops.slice_last(q, h * width, (h + 1) * width),
                                              ops.slice_last(k, h * width, (h + 1) * width),
                                              ops.slice_last(v, h * width, (h + 1) * width))
            heads.append(out)
            weights.append(w)
        return ops.concat(heads, axis=-1) @ block["Wo"], weights

    def encode(self, tokens, table: Tensor, return_attention: bool = False):
        """B x T token ids (MASK_TOKEN allowed) -> B x T x d hidden states."""
        tokens = np.atleast_2d(np.asarray(tokens, dtype=np.int64))
        if tokens.shape[1] > self.max_len:
            raise EncoderError(f"path of length {tokens.shape[1]} exceeds the positional table ({self.max_len})")
        x = self._embed(tokens, table)
        attention = []
        for block in self.blocks:
            a, w = self._attention(ops.layer_norm(x, block["ln1_g"], block["ln1_b"]), block)
            x = x + a
            hidden = ops.relu(ops.layer_norm(x, block["ln2_g"], block["ln2_b"]) @ block["W1"] + block["b1"])
            x = x + (hidden @ block["W2"] + block["b2"])
            attention.append(w)
        out = ops.layer_norm(x, self.ln_g, self.ln_b)
        return (out, attention) if return_attention else out

    def read_out(self, paths: Sequence[Sequence[int]], positions: Sequence[int], table: Tensor) -> Tensor:
        """
        Hidden state at positions[n] of paths[n], as an N x d tensor in input order.
        Paths of equal length are encoded together.
        """
        lengths = np.array([len(p) for p in paths])
        positions = np.asarray(positions, dtype=np.int64)
        parts, order = [], []
        for length in np.unique(lengths).tolist():
            members = np.flatnonzero(lengths == length)
            hidden = self.encode(np.array([paths[m] for m in members], dtype=np.int64), table)
            flat = ops.reshape(hidden, (len(members) * length, self.dim))
            parts.append(ops.take(flat, np.arange(len(members)) * length + positions[members]))
            order.append(members)
        stacked = ops.concat(parts, axis=0)
        return ops.take(stacked, np.argsort(np.concatenate(order), kind="stable"))


def transformer_forward(path: Sequence[int], transformer: PathTransformer, table) -> Tensor:
    """T x d hidden states of one (possibly masked) path."""
    hidden = transformer.encode(np.asarray(path, dtype=np.int64)[None, :], ops.as_tensor(table))
    return ops.reshape(hidden, (len(path), transformer.dim))
