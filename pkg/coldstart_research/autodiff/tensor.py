"""
Reverse-mode differentiation over numpy float64 arrays.

Ops record their outputs on the thread's active Tape; backward() walks the tape in
exact reverse order. Leaf tensors with requires_grad accumulate into `.grad` across
calls until they are zeroed, intermediate gradients live only for one backward pass.
"""
import threading
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .._scheme import DimensionError, NonFiniteError

_local = threading.local()


def _active_tape() -> Optional["Tape"]:
    return getattr(_local, "tape", None)


def check_finite(value: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(name)
    return value


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "name", "_parents", "_backward", "_op")

    def __init__(self, value, requires_grad: bool = False, name: Optional[str] = None):
        value = np.array(value, dtype=np.float64)
        self.value = check_finite(value, name or "tensor")
        self.requires_grad = requires_grad
        self.name = name
        self.grad = np.zeros_like(self.value) if requires_grad else None
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[Callable] = None
        self._op: Optional[str] = None

    @classmethod
    def _result(cls, value: np.ndarray, op: str, parents: Sequence["Tensor"], backward: Callable) -> "Tensor":
        out = cls.__new__(cls)
        out.value = check_finite(np.asarray(value, dtype=np.float64), op)
        out.name = op
        out.grad = None
        out._op = op
        tape = _active_tape()
        track = tape is not None and any(p.requires_grad for p in parents)
        out.requires_grad = track
        out._parents = tuple(parents) if track else ()
        out._backward = backward if track else None
        if track:
            tape.record(out)
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def item(self) -> float:
        return float(self.value.reshape(-1)[0]) if self.value.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.value.copy()

    def zero_grad(self):
        if self.grad is not None:
            self.grad[...] = 0.0

    def __repr__(self):
        return f"Tensor(shape={self.shape}, name={self.name!r})"

    # arithmetic sugar, see ops for the definitions
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __truediv__(self, other):
        from . import ops
        if isinstance(other, Tensor):
            raise DimensionError("div", self.shape, other.shape)
        return ops.scale(self, 1.0 / float(other))


class Tape:
    """Operation nodes in execution order, one per thread."""

    def __init__(self):
        self.nodes: List[Tensor] = []
        self._previous = None

    def record(self, node: Tensor):
        self.nodes.append(node)

    def __enter__(self) -> "Tape":
        self._previous = _active_tape()
        _local.tape = self
        return self

    def __exit__(self, *exc):
        _local.tape = self._previous
        self._previous = None
        return False

    def __len__(self):
        return len(self.nodes)

    def backward(self, loss: Tensor):
        backward(loss, self)


def backward(loss: Tensor, tape: Optional[Tape] = None):
    """Accumulate d loss / d leaf into every reachable leaf's `.grad`."""
    if loss.value.size != 1:
        raise DimensionError("backward (loss must be scalar)", loss.shape)
    tape = tape if tape is not None else _active_tape()
    if not loss.requires_grad:
        return
    if loss._op is None:
        loss.grad += 1.0
        return
    if tape is None:
        raise DimensionError("backward (no tape recorded the loss)", loss.shape)
    buffers = {id(loss): np.ones_like(loss.value)}
    for node in reversed(tape.nodes):
        g = buffers.pop(id(node), None)
        if g is None:
            continue
        grads = node._backward(g)
        for parent, pg in zip(node._parents, grads):
            if pg is None or not parent.requires_grad:
                continue
            if parent._op is None:
                parent.grad += pg
            elif id(parent) in buffers:
                buffers[id(parent)] = buffers[id(parent)] + pg
            else:
                buffers[id(parent)] = pg


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)
