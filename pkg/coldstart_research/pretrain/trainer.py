import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from .._scheme import DivergenceError
from ..autodiff.checkpoint import Checkpoint
from ..config import ExperimentConfig, config_fingerprint
from ..data.splits import ExperimentSplits
from ._task_scheme import LOG_COLUMNS, PretextTask, TaskContext
from .ground_truth import GroundTruth
from .tasks import make_task


@dataclass
class PretrainResult:
    checkpoint: Checkpoint
    log: pd.DataFrame
    failed: List[str] = field(default_factory=list)
    skipped: Dict[str, int] = field(default_factory=dict)

    @property
    def partial(self) -> bool:
        return bool(self.failed)


def task_context(config: ExperimentConfig, splits: ExperimentSplits, gt: Optional[GroundTruth]) -> TaskContext:
    return TaskContext(config, splits.working, splits.targets("train", config.pretrain_sides), gt)


def _run(task: PretextTask):
    try:
        task.fit()
        return task, None
    except DivergenceError as e:
        logging.error(str(e))
        return task, e


def pretrain_all(config: ExperimentConfig, splits: ExperimentSplits, gt: GroundTruth,
                 fingerprint: Optional[str] = None) -> PretrainResult:
    '''
    Train every enabled pretext task independently and pack them into one checkpoint.
    Tasks share only the immutable graph, splits and ground truth, so they may run on
    `config.workers` threads; a diverged task is left out and the checkpoint is marked partial.
    '''
    context = task_context(config, splits, gt)
    tasks = [make_task(t, context) for t in config.tasks]
    logging.info(f"pre-training {','.join(config.tasks)} on {len(context.targets)} targets "
                 f"with {config.workers} worker(s)")
    if config.workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_run, tasks))
    else:
        outcomes = [_run(task) for task in tasks]

    arrays: Dict[str, np.ndarray] = {}
    failed, logs, skipped = [], [], {}
    for task, error in outcomes:
        logs.append(task.history)
        skipped[task.task_id] = task.skipped
        if error is None:
            arrays.update(task.arrays())
        else:
            failed.append(task.task_id)
    fingerprint = fingerprint or config_fingerprint(config)
    checkpoint = Checkpoint(arrays, fingerprint, partial=bool(failed))
    log = pd.concat(logs, ignore_index=True) if logs else pd.DataFrame(columns=LOG_COLUMNS)
    return PretrainResult(checkpoint, log, failed, skipped)


def restore_tasks(config: ExperimentConfig, context: TaskContext, checkpoint: Optional[Checkpoint] = None,
                  task_ids: Optional[List[str]] = None) -> List[PretextTask]:
    """Rebuild task objects, loading their parameters from the checkpoint when one is given."""
    task_ids = task_ids or (checkpoint.sections if checkpoint is not None else list(config.tasks))
    order = [t for t in ("Rg", "Cg", "Rp", "Cp") if t in task_ids]
    tasks = [make_task(t, context) for t in order]
    if checkpoint is not None:
        for task in tasks:
            task.load(checkpoint.section(task.task_id))
    return tasks
