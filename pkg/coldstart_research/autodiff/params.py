from abc import ABC, abstractmethod
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from .._scheme import NonFiniteError, ParameterError
from .tensor import Tensor


class ParamStore:
    """
    Named trainable tensors plus per-parameter optimizer state.
    Names are unique and usually carry a task prefix, e.g. "Rg/gnn/W1".
    """

    def __init__(self):
        self._params: Dict[str, Tensor] = {}
        self.state: Dict[str, dict] = {}
        self.frozen: set = set()

    def add(self, name: str, value) -> Tensor:
        if name in self._params:
            raise ParameterError(f"parameter {name!r} is already registered")
        tensor = Tensor(value, requires_grad=True, name=name)
        self._params[name] = tensor
        return tensor

    def embedding(self, name: str, rows: int, dim: int, rng: np.random.Generator, scale: float = 0.01) -> Tensor:
        return self.add(name, rng.uniform(-scale, scale, size=(rows, dim)))

    def xavier(self, name: str, shape: Tuple[int, int], rng: np.random.Generator) -> Tensor:
        limit = np.sqrt(6.0 / (shape[0] + shape[1]))
        return self.add(name, rng.uniform(-limit, limit, size=shape))

    def zeros(self, name: str, shape) -> Tensor:
        return self.add(name, np.zeros(shape))

    def ones(self, name: str, shape) -> Tensor:
        return self.add(name, np.ones(shape))

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def items(self):
        return self._params.items()

    def names(self, prefix: str = ""):
        return [n for n in self._params if n.startswith(prefix)]

    def zero_grad(self):
        for p in self._params.values():
            p.zero_grad()

    def freeze(self, prefix: str = ""):
        self.frozen.update(self.names(prefix))

    def trainable(self):
        return [(n, p) for n, p in self._params.items() if n not in self.frozen]

    def snapshot(self, prefix: str = "") -> Dict[str, np.ndarray]:
        return {n: p.value.copy() for n, p in self._params.items() if n.startswith(prefix)}

    def load(self, values: Dict[str, np.ndarray], strict: bool = True):
        for name, value in values.items():
            if name not in self._params:
                if strict:
                    raise ParameterError(f"unknown parameter {name!r}")
                continue
            target = self._params[name]
            if target.shape != np.shape(value):
                raise ParameterError(f"{name}: expected shape {target.shape}, got {np.shape(value)}")
            target.value[...] = value

    def merge(self, other: "ParamStore"):
        for name, tensor in other.items():
            if name in self._params:
                raise ParameterError(f"parameter {name!r} is already registered")
            self._params[name] = tensor
        self.frozen.update(other.frozen)


class Optimizer(ABC):
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, store: ParamStore):
        """Update every trainable parameter from its grad, then zero all grads."""
        for name, p in store.trainable():
            if not np.all(np.isfinite(p.grad)):
                raise NonFiniteError(name, "gradient holds NaN or Inf")
        for name, p in store.trainable():
            self._update(name, p, store.state.setdefault(name, {}))
        store.zero_grad()

    @abstractmethod
    def _update(self, name: str, p: Tensor, state: dict):
        pass


class SGD(Optimizer):
    def _update(self, name, p, state):
        p.value -= self.lr * p.grad


class Adam(Optimizer):
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8, weight_decay: float = 0.0):
        super().__init__(lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay

    def _update(self, name, p, state):
        g = p.grad + self.weight_decay * p.value if self.weight_decay else p.grad
        if "m" not in state:
            state["m"] = np.zeros_like(p.value)
            state["v"] = np.zeros_like(p.value)
            state["t"] = 0
        state["t"] += 1
        state["m"] = self.beta1 * state["m"] + (1.0 - self.beta1) * g
        state["v"] = self.beta2 * state["v"] + (1.0 - self.beta2) * g * g
        m_hat = state["m"] / (1.0 - self.beta1 ** state["t"])
        v_hat = state["v"] / (1.0 - self.beta2 ** state["t"])
        p.value -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


OPTIMIZERS = {"sgd": SGD, "adam": Adam}


def make_optimizer(kind: str, lr: float, **hyper) -> Optimizer:
    if kind not in OPTIMIZERS:
        raise ParameterError(f"unknown optimizer {kind!r}, expected one of {sorted(OPTIMIZERS)}")
    return OPTIMIZERS[kind](lr, **hyper)


def optimizer_step(store: ParamStore, kind: str = "adam", lr: float = 0.003, hyper: Optional[dict] = None):
    """One update of every trainable parameter; Adam moments persist in `store.state`."""
    make_optimizer(kind, lr, **(hyper or {})).step(store)
