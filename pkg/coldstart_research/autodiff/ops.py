from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from .._scheme import DimensionError
from .tensor import Tensor, as_tensor


def _unbroadcast(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back onto the operand's shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _compute(op: str, fn, *tensors):
    try:
        return fn()
    except ValueError:
        raise DimensionError(op, *(t.shape for t in tensors))


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = _compute("add", lambda: a.value + b.value, a, b)
    return Tensor._result(out, "add", (a, b),
                          lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = _compute("sub", lambda: a.value - b.value, a, b)
    return Tensor._result(out, "sub", (a, b),
                          lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = _compute("mul", lambda: a.value * b.value, a, b)
    return Tensor._result(out, "mul", (a, b),
                          lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)))


def scale(x, c: float) -> Tensor:
    x = as_tensor(x)
    c = float(c)
    return Tensor._result(x.value * c, "scale", (x,), lambda g: (g * c,))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    av, bv = a.value, b.value
    if av.ndim == 0 or bv.ndim == 0:
        raise DimensionError("matmul", a.shape, b.shape)
    inner_b = bv.shape[-2] if bv.ndim > 1 else bv.shape[0]
    if av.shape[-1] != inner_b:
        raise DimensionError("matmul", a.shape, b.shape)
    out = _compute("matmul", lambda: np.matmul(av, bv), a, b)

    shape2 = list(out.shape)
    if bv.ndim == 1:
        shape2 = shape2 + [1]
    if av.ndim == 1:
        shape2 = shape2[:-1] + [1] + shape2[-1:]

    def back(g):
        a2 = av if av.ndim > 1 else av[None, :]
        b2 = bv if bv.ndim > 1 else bv[:, None]
        g2 = g.reshape(shape2)
        ga = _unbroadcast(np.matmul(g2, np.swapaxes(b2, -1, -2)), a2.shape).reshape(av.shape)
        gb = _unbroadcast(np.matmul(np.swapaxes(a2, -1, -2), g2), b2.shape).reshape(bv.shape)
        return ga, gb

    return Tensor._result(out, "matmul", (a, b), back)


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = _compute("concat", lambda: np.concatenate([t.value for t in tensors], axis=axis), *tensors)
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return Tensor._result(out, "concat", tensors, lambda g: tuple(np.split(g, sizes, axis=axis)))


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = _compute("stack", lambda: np.stack([t.value for t in tensors], axis=axis), *tensors)
    return Tensor._result(out, "stack", tensors,
                          lambda g: tuple(np.moveaxis(g, axis, 0)[i] for i in range(len(tensors))))


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    out = _compute("reshape", lambda: x.value.reshape(shape), x)
    return Tensor._result(out, "reshape", (x,), lambda g: (g.reshape(x.shape),))


def _expand(g: np.ndarray, shape, axis, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum(x, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = x.value.sum(axis=axis, keepdims=keepdims)
    return Tensor._result(out, "sum", (x,), lambda g: (_expand(g, x.shape, axis, keepdims),))


def mean(x, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.value.size if axis is None else x.shape[axis]
    if count == 0:
        raise DimensionError("mean (empty axis)", x.shape)
    out = x.value.mean(axis=axis, keepdims=keepdims)
    return Tensor._result(out, "mean", (x,), lambda g: (_expand(g, x.shape, axis, keepdims) / count,))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    s = expit(x.value)
    return Tensor._result(s, "sigmoid", (x,), lambda g: (g * s * (1.0 - s),))


def tanh(x) -> Tensor:
    x = as_tensor(x)
    t = np.tanh(x.value)
    return Tensor._result(t, "tanh", (x,), lambda g: (g * (1.0 - t * t),))


def relu(x) -> Tensor:
    x = as_tensor(x)
    on = x.value > 0
    return Tensor._result(np.where(on, x.value, 0.0), "relu", (x,), lambda g: (g * on,))


def exp(x) -> Tensor:
    x = as_tensor(x)
    with np.errstate(over="ignore"):
        out = np.exp(x.value)
    return Tensor._result(out, "exp", (x,), lambda g: (g * out,))


def log(x) -> Tensor:
    x = as_tensor(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(x.value)
    return Tensor._result(out, "log", (x,), lambda g: (g / x.value,))


def softplus(x) -> Tensor:
    """log(1 + e^x), the BPR pair loss is softplus(neg - pos)"""
    x = as_tensor(x)
    out = np.logaddexp(0.0, x.value)
    return Tensor._result(out, "softplus", (x,), lambda g: (g * expit(x.value),))


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.value - x.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)
    return Tensor._result(s, "softmax", (x,),
                          lambda g: (s * (g - (g * s).sum(axis=axis, keepdims=True)),))


def logsumexp(x, axis: int = -1, mask: Optional[np.ndarray] = None) -> Tensor:
    """log sum exp over `axis`, restricted to entries where `mask` is true"""
    x = as_tensor(x)
    keep = np.ones(x.shape, dtype=bool) if mask is None else np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
    masked = np.where(keep, x.value, -np.inf)
    top = masked.max(axis=axis, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (top + np.log(np.where(keep, np.exp(masked - top), 0.0).sum(axis=axis, keepdims=True)))
        weights = np.where(keep, np.exp(masked - out), 0.0)
    result = np.squeeze(out, axis=axis)
    return Tensor._result(result, "logsumexp", (x,), lambda g: (np.expand_dims(g, axis) * weights,))


def take(x, idx, op: str = "take") -> Tensor:
    """rows of x along axis 0; idx may have any shape"""
    x = as_tensor(x)
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise DimensionError(f"{op} (index out of range)", x.shape, idx.shape)

    def back(g):
        gx = np.zeros_like(x.value)
        np.add.at(gx, idx, g)
        return (gx,)

    return Tensor._result(x.value[idx], op, (x,), back)


def embed_lookup(table, ids) -> Tensor:
    return take(table, ids, op="embed_lookup")


def take_along(x, rows, cols) -> Tensor:
    """elements x[rows[n], cols[n]] of a 2-d tensor"""
    x = as_tensor(x)
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)

    def back(g):
        gx = np.zeros_like(x.value)
        np.add.at(gx, (rows, cols), g)
        return (gx,)

    out = _compute("take_along", lambda: x.value[rows, cols], x)
    return Tensor._result(out, "take_along", (x,), back)


def swap_last(x) -> Tensor:
    x = as_tensor(x)
    return Tensor._result(np.swapaxes(x.value, -1, -2), "swap_last", (x,), lambda g: (np.swapaxes(g, -1, -2),))


def slice_last(x, start: int, stop: int) -> Tensor:
    x = as_tensor(x)

    def back(g):
        gx = np.zeros_like(x.value)
        gx[..., start:stop] = g
        return (gx,)

    return Tensor._result(x.value[..., start:stop], "slice_last", (x,), back)


def segment_mean(x, segments, num_segments: int) -> Tensor:
    """Row means of x grouped by segment id; a segment without rows yields zeros."""
    x = as_tensor(x)
    segments = np.asarray(segments, dtype=np.int64)
    if x.ndim != 2 or len(segments) != x.shape[0]:
        raise DimensionError("segment_mean", x.shape, segments.shape)
    counts = np.bincount(segments, minlength=num_segments).astype(np.float64) if len(segments) \
        else np.zeros(num_segments)
    sums = np.zeros((num_segments, x.shape[1]))
    np.add.at(sums, segments, x.value)
    safe = np.maximum(counts, 1.0)[:, None]
    out = sums / safe
    return Tensor._result(out, "segment_mean", (x,), lambda g: ((g / safe)[segments],))


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if gamma.shape != (x.shape[-1],) or beta.shape != (x.shape[-1],):
        raise DimensionError("layer_norm", x.shape, gamma.shape, beta.shape)
    mu = x.value.mean(axis=-1, keepdims=True)
    centered = x.value - mu
    inv = 1.0 / np.sqrt((centered ** 2).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv
    out = xhat * gamma.value + beta.value

    def back(g):
        gxhat = g * gamma.value
        gx = inv * (gxhat - gxhat.mean(axis=-1, keepdims=True) - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True))
        return gx, _unbroadcast(g * xhat, gamma.shape), _unbroadcast(g, beta.shape)

    return Tensor._result(out, "layer_norm", (x, gamma, beta), back)


def l2_normalize(x, eps: float = 1e-12) -> Tensor:
    """x / (|x| + eps) along the last axis"""
    x = as_tensor(x)
    norm = np.sqrt((x.value ** 2).sum(axis=-1, keepdims=True))
    s = norm + eps
    out = x.value / s

    def back(g):
        dot = (g * x.value).sum(axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            radial = np.where(norm > 0, x.value * dot / (norm * s * s), 0.0)
        return (g / s - radial,)

    return Tensor._result(out, "l2_normalize", (x,), back)


def cosine_sim(a, b, eps: float = 1e-12) -> Tensor:
    """Row-wise cosine along the last axis, norms guarded by eps."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1:] != b.shape[-1:]:
        raise DimensionError("cosine_sim", a.shape, b.shape)
    return sum(mul(l2_normalize(a, eps), l2_normalize(b, eps)), axis=-1)


def scaled_dot_attention(q, k, v) -> Tuple[Tensor, Tensor]:
    """softmax(q k^T / sqrt(d_k)) v over the last two axes; returns (output, attention weights)"""
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    if q.shape[-1] != k.shape[-1] or k.shape[-2] != v.shape[-2]:
        raise DimensionError("scaled_dot_attention", q.shape, k.shape, v.shape)
    scores = scale(matmul(q, swap_last(k)), 1.0 / np.sqrt(q.shape[-1]))
    weights = softmax(scores, axis=-1)
    return matmul(weights, v), weights
