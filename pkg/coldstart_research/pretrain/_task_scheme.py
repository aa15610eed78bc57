import logging
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from .._scheme import DivergenceError, MissingGroundTruthError, NonFiniteError
from .._seeding import derive_seed, make_rng
from ..autodiff.params import Adam, ParamStore
from ..autodiff.tensor import Tape, Tensor
from ..config import ExperimentConfig
from ..data.graph import BipartiteGraph
from ..data.neighborhood import first_order_sample
from .ground_truth import GroundTruth

LOG_COLUMNS = ["task", "epoch", "loss", "wall_ms"]
BUFFER = "buffers"


@dataclass
class TaskContext:
    """Read-only inputs shared by every task: the working graph, training targets and ground truth."""
    config: ExperimentConfig
    graph: BipartiteGraph
    targets: np.ndarray
    ground_truth: Optional[GroundTruth] = None


class PretextTask(ABC):
    '''
    One pre-training task with its own embedding table, parameters, optimizer and seeds.
    Parameters live under f"{task_id}/..." so several tasks fit in one checkpoint.

    subclasses implement:
    - build(rng): register encoder parameters
    - train_epoch(epoch) -> mean loss
    - sample(nodes, fanout, seed) -> per-node inputs for encode()
    - encode(samples) -> B x d task embeddings, differentiable w.r.t. the store
    '''
    task_id: str = ""

    def __init__(self, context: TaskContext):
        self.context = context
        self.config = context.config
        self.graph = context.graph
        self.store = ParamStore()
        rng = make_rng(self.config.seed, self.task_id, "init")
        self.table = self.store.embedding(f"{self.task_id}/emb", self.graph.num_nodes, self.config.dim, rng,
                                          scale=0.1)
        self.build(rng)
        self.optimizer = Adam(self.config.lr)
        self.skipped = 0
        self.log: List[tuple] = []

    # ---- hooks ----
    @abstractmethod
    def build(self, rng: np.random.Generator):
        pass

    def prepare(self):
        pass

    @abstractmethod
    def train_epoch(self, epoch: int) -> float:
        pass

    @abstractmethod
    def sample(self, nodes: Sequence[int], fanout: Sequence[int], seed: int) -> list:
        pass

    @abstractmethod
    def encode(self, samples: list) -> Tensor:
        pass

    def buffers(self) -> Dict[str, np.ndarray]:
        return {}

    def load_buffers(self, buffers: Dict[str, np.ndarray]):
        pass

    # ---- shared plumbing ----
    def seed(self, *keys) -> int:
        return derive_seed(self.config.seed, self.task_id, *keys)

    def first_order(self, node: int) -> np.ndarray:
        """masked first-order set, identical across tasks for the same node"""
        return first_order_sample(self.graph, int(node), self.config.k_intrinsic, self.config.seed)

    @property
    def ground_truth(self) -> GroundTruth:
        if self.context.ground_truth is None:
            raise MissingGroundTruthError(self.context.targets[:5].tolist())
        return self.context.ground_truth

    def batches(self, count: int, size: int, epoch: int, stage: str = "batch") -> Iterator[np.ndarray]:
        order = make_rng(self.config.seed, self.task_id, stage, epoch).permutation(count)
        for start in range(0, count, size):
            yield order[start:start + size]

    def optimize(self, forward: Callable[[], Tensor]) -> float:
        with Tape() as tape:
            loss = forward()
        tape.backward(loss)
        self.optimizer.step(self.store)
        return float(loss.value)

    def skip(self, n: int = 1):
        self.skipped += n

    def fit(self, epochs: Optional[int] = None) -> pd.DataFrame:
        epochs = self.config.pretrain_epochs if epochs is None else epochs
        self.prepare()
        for epoch in tqdm(range(epochs), disable=not self.config.verbose, desc=self.task_id):
            started = time.perf_counter()
            try:
                loss = self.train_epoch(epoch)
            except NonFiniteError as e:
                raise DivergenceError(self.task_id, epoch, str(e)) from e
            if not np.isfinite(loss):
                raise DivergenceError(self.task_id, epoch)
            wall_ms = int(round((time.perf_counter() - started) * 1000))
            self.log.append((self.task_id, epoch, loss, wall_ms))
            logging.info(f"{self.task_id}\t{epoch}\t{loss:.6f}\t{wall_ms}")
        if self.skipped:
            logging.warning(f"{self.task_id}: skipped {self.skipped} sample(s) without usable neighbors")
        return self.history

    @property
    def history(self) -> pd.DataFrame:
        return pd.DataFrame(self.log, columns=LOG_COLUMNS)

    def arrays(self) -> Dict[str, np.ndarray]:
        arrays = self.store.snapshot(f"{self.task_id}/")
        arrays.update({f"{self.task_id}/{BUFFER}/{k}": v.copy() for k, v in self.buffers().items()})
        return arrays

    def load(self, arrays: Dict[str, np.ndarray]):
        marker = f"{self.task_id}/{BUFFER}/"
        self.store.load({n: a for n, a in arrays.items() if not n.startswith(marker)})
        self.load_buffers({n[len(marker):]: a for n, a in arrays.items() if n.startswith(marker)})
