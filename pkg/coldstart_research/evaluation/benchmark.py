import logging
import time
from typing import Sequence

import numpy as np
import pandas as pd

from ..pretrain._task_scheme import TaskContext
from ..pretrain.tasks import ReconstructGraphTask

BENCH_COLUMNS = ["strategy", "runs", "sampling_ms_mean", "sampling_ms_std", "training_ms_mean", "training_ms_std"]


def sampling_benchmark(context: TaskContext, strategies: Sequence[str], epochs: int) -> pd.DataFrame:
    '''
    Wall-clock cost of neighbor sampling per training epoch, next to the cost of the
    convolution training step on the sampled trees, for each strategy.
    Every strategy trains its own reconstruction task from the same seeds.
    - context: working graph, training targets and ground truth
    - strategies: subset of random / importance / dynamic

    usage:
    - table = sampling_benchmark(context, ["random", "dynamic"], epochs=5)
    '''
    rows = []
    for strategy in strategies:
        config = context.config.model_copy(update={"sampler": strategy})
        task = ReconstructGraphTask(TaskContext(config, context.graph, context.targets, context.ground_truth))
        task.prepare()
        sampling, training = [], []
        for epoch in range(epochs):
            started = time.perf_counter()
            trees = task.training_trees(epoch)
            sampled = time.perf_counter()
            task.train_on(trees, epoch)
            finished = time.perf_counter()
            sampling.append((sampled - started) * 1000.0)
            training.append((finished - sampled) * 1000.0)
        sampling, training = np.array(sampling), np.array(training)
        rows.append((strategy, epochs,
                     float(sampling.mean()) if epochs else 0.0, float(sampling.std()) if epochs else 0.0,
                     float(training.mean()) if epochs else 0.0, float(training.std()) if epochs else 0.0))
        logging.info(f"bench {strategy}: sampling {rows[-1][2]:.1f} ms/epoch, training {rows[-1][4]:.1f} ms/epoch")
    return pd.DataFrame(rows, columns=BENCH_COLUMNS)
