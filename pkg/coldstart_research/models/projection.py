import numpy as np

from ..autodiff import ops
from ..autodiff.params import ParamStore
from ..autodiff.tensor import Tensor


class ProjectionHead:
    """two affine layers with a ReLU between, d -> d"""

    def __init__(self, store: ParamStore, prefix: str, dim: int, rng: np.random.Generator):
        self.W1 = store.xavier(f"{prefix}/W1", (dim, dim), rng)
        self.b1 = store.zeros(f"{prefix}/b1", (dim,))
        self.W2 = store.xavier(f"{prefix}/W2", (dim, dim), rng)
        self.b2 = store.zeros(f"{prefix}/b2", (dim,))

    def __call__(self, h: Tensor) -> Tensor:
        return ops.relu(h @ self.W1 + self.b1) @ self.W2 + self.b2


def project(emb, head: ProjectionHead) -> Tensor:
    return head(ops.as_tensor(emb))
