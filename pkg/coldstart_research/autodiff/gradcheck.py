from dataclasses import dataclass
from typing import Callable, Dict, Union

import numpy as np
import pandas as pd

from .params import ParamStore
from .tensor import Tape, Tensor


@dataclass
class GradCheckReport:
    table: pd.DataFrame   # name, max_rel_error, passed

    @property
    def passed(self) -> bool:
        return bool(self.table["passed"].all()) if len(self.table) else True


def _loss_value(f: Callable[[], Tensor]) -> float:
    with Tape():
        return float(f().value)


def grad_check(f: Callable[[], Tensor], params: Union[ParamStore, Dict[str, Tensor]], step: float = 1e-5,
               tol: float = 1e-4, floor: float = 1e-8) -> GradCheckReport:
    """
    Compare analytic gradients of the scalar f() against central differences
    (f(p+h) - f(p-h)) / 2h, element by element.
    Relative error is |a - n| / max(|a|, |n|, floor). The floor only shields gradients that
    are zero up to rounding; deep compositions with O(1e-11) difference noise need a larger one.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    named = list(params.items())
    for _, p in named:
        p.zero_grad()
    with Tape() as tape:
        loss = f()
    tape.backward(loss)
    analytic = {name: p.grad.copy() for name, p in named}
    for _, p in named:
        p.zero_grad()

    rows = []
    for name, p in named:
        flat = p.value.reshape(-1)
        numeric = np.zeros(flat.size)
        for j in range(flat.size):
            original = flat[j]
            flat[j] = original + step
            plus = _loss_value(f)
            flat[j] = original - step
            minus = _loss_value(f)
            flat[j] = original
            numeric[j] = (plus - minus) / (2.0 * step)
        a = analytic[name].reshape(-1)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(numeric)), floor)
        err = float(np.max(np.abs(a - numeric) / denom)) if flat.size else 0.0
        rows.append((name, err, err < tol))
    return GradCheckReport(pd.DataFrame(rows, columns=["name", "max_rel_error", "passed"]))
