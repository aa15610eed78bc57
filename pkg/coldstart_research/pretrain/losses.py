import numpy as np

from .._scheme import ConfigError, DimensionError
from ..autodiff import ops
from ..autodiff.tensor import Tensor


def reconstruction_loss(pred: Tensor, truth) -> Tensor:
    """mean over rows of 1 - cos(pred, truth); bounded in [0, 2]"""
    pred, truth = ops.as_tensor(pred), ops.as_tensor(truth)
    if pred.shape != truth.shape:
        raise DimensionError("reconstruction_loss", pred.shape, truth.shape)
    return ops.mean(1.0 - ops.cosine_sim(pred, truth))


def interleave(z1: Tensor, z2: Tensor) -> Tensor:
    """rows z1[0], z2[0], z1[1], z2[1], ... so that the positive of row m is row m ^ 1"""
    z1, z2 = ops.as_tensor(z1), ops.as_tensor(z2)
    if z1.shape != z2.shape or z1.ndim != 2:
        raise DimensionError("interleave", z1.shape, z2.shape)
    n, d = z1.shape
    return ops.reshape(ops.stack([z1, z2], axis=1), (2 * n, d))


def contrastive_loss(z: Tensor, tau: float) -> Tensor:
    '''
    Normalized temperature-scaled cross entropy over 2N interleaved views.
    Anchor m has positive m ^ 1; its denominator runs over every k != m.
    Summed over all 2N anchors and divided by 2N.
    '''
    if tau <= 0:
        raise ConfigError(f"temperature must be positive, got {tau}")
    z = ops.as_tensor(z)
    if z.ndim != 2 or z.shape[0] < 2 or z.shape[0] % 2:
        raise DimensionError("contrastive_loss (needs 2N rows, N >= 1)", z.shape)
    m = z.shape[0]
    zn = ops.l2_normalize(z)
    sims = ops.scale(zn @ ops.swap_last(zn), 1.0 / tau)
    anchors = np.arange(m)
    positives = ops.take_along(sims, anchors, anchors ^ 1)
    denominators = ops.logsumexp(sims, axis=-1, mask=~np.eye(m, dtype=bool))
    return ops.mean(denominators - positives)


def loss_contrastive(z1: Tensor, z2: Tensor, tau: float) -> Tensor:
    return contrastive_loss(interleave(z1, z2), tau)


def bpr_loss(pos: Tensor, neg: Tensor) -> Tensor:
    """mean of -ln sigmoid(pos - neg), written as softplus(neg - pos)"""
    return ops.mean(ops.softplus(ops.as_tensor(neg) - ops.as_tensor(pos)))


def loss_Rg(pred: Tensor, truth) -> Tensor:
    return reconstruction_loss(pred, truth)


def loss_Rp(readouts: Tensor, truth) -> Tensor:
    """per-path read-outs against the owner's ground truth, repeated row-wise"""
    return reconstruction_loss(readouts, truth)


def loss_Cg(z1: Tensor, z2: Tensor, tau: float) -> Tensor:
    return loss_contrastive(z1, z2, tau)


loss_Cp = loss_Cg
