import math

import numpy as np
import pytest

from coldstart_research._scheme import ConfigError, DimensionError
from coldstart_research.autodiff import ParamStore, grad_check, ops
from coldstart_research.pretrain.losses import (bpr_loss, contrastive_loss, interleave, loss_contrastive,
                                                reconstruction_loss)


def contrastive_oracle(z1, z2, tau):
    """double loop over the interleaved views"""
    z = np.empty((2 * len(z1), z1.shape[1]))
    z[0::2], z[1::2] = z1, z2
    m = len(z)
    unit = z / np.linalg.norm(z, axis=1, keepdims=True)
    total = 0.0
    for a in range(m):
        sims = [float(unit[a] @ unit[b]) / tau for b in range(m)]
        denominator = sum(math.exp(sims[b]) for b in range(m) if b != a)
        total += -sims[a ^ 1] + math.log(denominator)
    return total / m


@pytest.mark.parametrize("case", range(100))
def test_contrastive_matches_double_loop(case):
    rng = np.random.default_rng(case)
    n, d = int(rng.integers(1, 9)), int(rng.integers(2, 6))
    tau = (0.1, 0.2, 1.0)[case % 3]
    z1, z2 = rng.normal(size=(n, d)), rng.normal(size=(n, d))
    assert abs(float(loss_contrastive(z1, z2, tau).value) - contrastive_oracle(z1, z2, tau)) <= 1e-9


def test_interleave_pairs_views():
    z1 = np.arange(6.0).reshape(3, 2)
    z2 = -z1
    z = interleave(z1, z2).value
    assert np.array_equal(z[0::2], z1)
    assert np.array_equal(z[1::2], z2)


def test_reconstruction_bounds():
    truth = np.array([[1.0, 2.0], [-3.0, 0.5]])
    assert float(reconstruction_loss(truth * 4.0, truth).value) == pytest.approx(0.0, abs=1e-12)
    assert float(reconstruction_loss(-truth, truth).value) == pytest.approx(2.0, abs=1e-12)


def test_bpr_at_zero_margin():
    scores = np.array([0.3, -1.2, 4.0])
    assert float(bpr_loss(scores, scores).value) == pytest.approx(math.log(2.0), abs=1e-12)
    assert float(bpr_loss(np.array([10.0]), np.array([-10.0])).value) < 1e-8


def test_loss_errors():
    with pytest.raises(DimensionError):
        reconstruction_loss(np.ones((2, 3)), np.ones((3, 3)))
    with pytest.raises(ConfigError):
        contrastive_loss(np.ones((2, 3)), 0.0)
    with pytest.raises(DimensionError):
        contrastive_loss(np.ones((3, 3)), 0.2)
    with pytest.raises(DimensionError):
        interleave(np.ones((2, 3)), np.ones((2, 4)))


def test_loss_gradients():
    rng = np.random.default_rng(11)
    store = ParamStore()
    z1 = store.add("z1", rng.normal(size=(3, 4)))
    z2 = store.add("z2", rng.normal(size=(3, 4)))
    truth = rng.normal(size=(3, 4))
    report = grad_check(lambda: loss_contrastive(z1, z2, 0.2) + reconstruction_loss(z1, truth) +
                        bpr_loss(ops.sum(z1 * z2, axis=-1), ops.sum(z1 * truth, axis=-1)), store)
    assert report.passed, report.table


def test_contrastive_ignores_scale():
    rng = np.random.default_rng(5)
    z1, z2 = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    base = float(loss_contrastive(z1, z2, 0.2).value)
    assert float(loss_contrastive(3.0 * z1, 3.0 * z2, 0.2).value) == pytest.approx(base, abs=1e-10)
