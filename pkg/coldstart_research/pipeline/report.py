import logging
from typing import Dict

import numpy as np
import pandas as pd

from ..evaluation.loss_visualizer import LossVisualizer
from .artifacts import ArtifactStore

LOSS_COLUMNS = ["epoch", "loss"]


def training_log(store: ArtifactStore) -> pd.DataFrame:
    """(task, epoch, loss) rows of every training stage the run went through"""
    parts = []
    gt = store.read_frame("groundtruth", "gt_history.tsv")
    parts.append(gt.assign(task="gt"))
    if store.config.init == "pretrained":
        parts.append(store.read_frame("pretrain", "pretrain_log.tsv"))
    parts.append(store.read_frame("finetune", "finetune_log.tsv"))
    parts.append(store.read_frame("eval", "intrinsic_log.tsv"))
    log = pd.concat([p.loc[:, ["task", "epoch", "loss"]] for p in parts], ignore_index=True)
    return log


def format_metrics(metrics: pd.DataFrame) -> str:
    lines = []
    for metric, value, stderr in metrics.itertuples(index=False):
        lines.append(f"{metric}={value:.6f}")
        if not np.isnan(stderr):
            lines.append(f"{metric}_stderr={stderr:.6f}")
    return "\n".join(lines) + "\n"


def loss_tables(log: pd.DataFrame) -> Dict[str, pd.DataFrame]:
    return {f"loss_{task}.csv": frame.loc[:, LOSS_COLUMNS].reset_index(drop=True)
            for task, frame in log.groupby("task", sort=True)}


def emit_report(store: ArtifactStore):
    '''
    Report folder from the stage artifacts only: metrics.txt (key=value), metrics.tsv,
    one loss_<stage>.csv per training stage, loss_curves.html and bench.tsv when benchmarked.
    Emitting twice from the same artifacts gives the same bytes.

    usage:
    - emit_report(ArtifactStore(config))
    '''
    metrics = store.read_frame("eval", "metrics.tsv")
    log = training_log(store)
    files = {
        "metrics.txt": format_metrics(metrics),
        "metrics.tsv": metrics,
        "loss_curves.html": LossVisualizer(log, output_folder_path=None).to_html(),
    }
    files.update(loss_tables(log))
    if store.exists("bench"):
        files["bench.tsv"] = store.read_frame("bench", "bench.tsv")
    folder = store.write_stage("report", files)
    logging.info(f"report: {len(metrics)} metric(s), {log['task'].nunique()} loss curve(s) in {folder}")
    return folder
