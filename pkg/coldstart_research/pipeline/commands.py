import logging
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

from .._scheme import ArtifactError, PartialCheckpointError
from ..autodiff.checkpoint import Checkpoint
from ..config import ExperimentConfig
from ..data.graph import BipartiteGraph
from ..data.reader import InteractionTable, load_interactions, subsample_interactions
from ..data.splits import ExperimentSplits, build_splits
from ..evaluation.benchmark import sampling_benchmark
from ..evaluation.fusion import (FUSION, FusedRecommender, attach_meta_embeddings, eval_extrinsic, finetune,
                                 fit_intrinsic_fusion, intrinsic_report)
from ..pretrain.ground_truth import GroundTruth, ground_truth_for
from ..pretrain.trainer import pretrain_all, restore_tasks, task_context
from .artifacts import ArtifactStore, write_artifact
from .report import emit_report

EXIT_OK = 0
EXIT_PARTIAL = 3
INTRINSIC = "intrinsic"
METRIC_COLUMNS = ["metric", "value", "stderr"]


def cmd_ingest(config: ExperimentConfig) -> int:
    store = ArtifactStore(config)
    table = load_interactions(config.dataset_path, config.dataset_format)
    table = subsample_interactions(table, config.subsample, config.seed)
    store.write_stage("ingest", {
        "interactions.tsv": table.frame,
        "user_map.tsv": table.user_map,
        "item_map.tsv": table.item_map,
    }, meta={"has_timestamps": table.has_timestamps, "num_users": table.num_users,
             "num_items": table.num_items, "num_interactions": len(table)})
    return EXIT_OK


def load_graph(store: ArtifactStore) -> BipartiteGraph:
    folder, meta = store.require("ingest")
    return InteractionTable.from_folder(folder, bool(meta["has_timestamps"])).graph()


def cmd_split(config: ExperimentConfig) -> int:
    store = ArtifactStore(config)
    graph = load_graph(store)
    splits = build_splits(graph, config.n_i, config.n_u, config.intrinsic_ratio, config.c_frac,
                          config.k_intrinsic, config.seed)
    dropped = splits.extrinsic.dropped
    if dropped:
        logging.warning(f"split: dropped {dropped} cold user(s) with fewer than 2 interactions")
    store.write_stage("split", splits.manifests(), meta={
        "thresholds": [config.n_i, config.n_u],
        "dropped": dropped,
        "cold_users": int(len(splits.cold_users)),
        "train_targets": int(len(splits.targets("train"))),
        "test_targets": int(len(splits.targets("test"))),
    })
    return EXIT_OK


def load_splits(store: ArtifactStore) -> ExperimentSplits:
    graph = load_graph(store)
    folder, meta = store.require("split")
    frames = {}
    for name in meta["files"]:
        frames[name] = pd.read_csv(folder / name, sep="\t")
    return ExperimentSplits.from_manifests(graph, frames, tuple(meta["thresholds"]), int(meta["dropped"]))


def cmd_groundtruth(config: ExperimentConfig) -> int:
    store = ArtifactStore(config)
    splits = load_splits(store)
    targets = np.concatenate([splits.targets("train"), splits.targets("test")])
    gt, history = ground_truth_for(splits.working, targets, config)
    store.write_stage("groundtruth", {
        "gt.ckpt": Checkpoint(gt.arrays(), store.fingerprint("groundtruth")),
        "gt_history.tsv": history,
    }, meta={"targets": int(len(gt.targets))})
    return EXIT_OK


def load_ground_truth(store: ArtifactStore) -> GroundTruth:
    return GroundTruth.from_arrays(store.read_checkpoint("groundtruth", "gt.ckpt").arrays)


def cmd_pretrain(config: ExperimentConfig) -> int:
    '''
    Pre-train the enabled pretext tasks. A diverged task is left out of the checkpoint,
    which is then flagged partial and the command exits with 3.
    '''
    store = ArtifactStore(config)
    splits = load_splits(store)
    gt = load_ground_truth(store)
    result = pretrain_all(config, splits, gt, fingerprint=store.fingerprint("pretrain"))
    store.write_stage("pretrain", {
        "checkpoint.ckpt": result.checkpoint,
        "pretrain_log.tsv": result.log,
    }, meta={"partial": result.partial, "failed": result.failed, "skipped": result.skipped})
    if result.partial:
        logging.error(f"pretrain: task(s) {', '.join(result.failed)} diverged, checkpoint is partial")
        return EXIT_PARTIAL
    return EXIT_OK


def pretrained_tasks(config: ExperimentConfig, store: ArtifactStore, splits: ExperimentSplits,
                     gt: GroundTruth) -> list:
    """Task objects for `config.tasks`, from the pre-training checkpoint or freshly initialized."""
    context = task_context(config, splits, gt)
    if config.init == "random":
        tasks = restore_tasks(config, context, task_ids=list(config.tasks))
        attach_meta_embeddings(tasks, config.k_intrinsic, config.seed)
        return tasks
    folder, meta = store.require("pretrain")
    ckpt = store.read_checkpoint("pretrain", "checkpoint.ckpt")
    if ckpt.partial:
        raise PartialCheckpointError(meta.get("failed", []))
    missing = [t for t in config.tasks if t not in ckpt.sections]
    if missing:
        raise ArtifactError(f"checkpoint in {folder} has no parameters for task(s) {', '.join(missing)}")
    return restore_tasks(config, context, ckpt, task_ids=list(config.tasks))


def model_arrays(model: FusedRecommender) -> Dict[str, np.ndarray]:
    arrays = {}
    for task in model.tasks:
        arrays.update(task.arrays())
    arrays.update(model.store.snapshot(f"{model.name}/"))
    return arrays


def cmd_finetune(config: ExperimentConfig) -> int:
    store = ArtifactStore(config)
    splits = load_splits(store)
    gt = load_ground_truth(store)
    tasks = pretrained_tasks(config, store, splits, gt)
    model = FusedRecommender(tasks, splits.working, config.fanout_extrinsic, config.dim, seed=config.seed)
    history = finetune(model, splits.extrinsic.train_n, epochs=config.finetune_epochs, lr=config.finetune_lr,
                       seed=config.seed, batch_size=config.finetune_batch, freeze_encoders=config.freeze_encoders,
                       resample_each_epoch=config.resample_each_epoch, verbose=config.verbose)
    store.write_stage("finetune", {
        "model.ckpt": Checkpoint(model_arrays(model), store.fingerprint("finetune")),
        "finetune_log.tsv": history,
    }, meta={"tasks": list(config.tasks), "init": config.init, "isolated": len(model.isolated)})
    return EXIT_OK


def load_model(config: ExperimentConfig, store: ArtifactStore, splits: ExperimentSplits,
               gt: GroundTruth) -> FusedRecommender:
    ckpt = store.read_checkpoint("finetune", "model.ckpt")
    tasks = restore_tasks(config, task_context(config, splits, gt), ckpt, task_ids=list(config.tasks))
    model = FusedRecommender(tasks, splits.working, config.fanout_extrinsic, config.dim, seed=config.seed)
    model.store.load(ckpt.section(FUSION))
    return model


def intrinsic_metrics(config: ExperimentConfig, store: ArtifactStore, splits: ExperimentSplits,
                      gt: GroundTruth) -> Tuple[Dict[str, float], pd.DataFrame]:
    """Cosine to ground truth on Test_T, from the pre-trained encoders and a W fitted on Train_T."""
    tasks = pretrained_tasks(config, store, splits, gt)
    model = FusedRecommender(tasks, splits.working, config.fanout_intrinsic, config.dim, seed=config.seed,
                             name=INTRINSIC)
    history = fit_intrinsic_fusion(model, splits.targets("train"), gt, epochs=config.intrinsic_epochs,
                                   lr=config.lr, batch_size=config.recon_batch, seed=config.seed)
    return intrinsic_report(model, splits.targets("test"), gt), history


def cmd_eval(config: ExperimentConfig) -> int:
    '''
    Intrinsic evaluation (cosine to ground truth on the masked intrinsic test targets) and
    extrinsic evaluation (Recall / NDCG at k_eval for the cold users' held-out items).

    usage:
    - cmd_eval(load_config("experiment.cfg"))
    '''
    store = ArtifactStore(config)
    store.require("finetune")
    splits = load_splits(store)
    gt = load_ground_truth(store)
    intrinsic, intrinsic_history = intrinsic_metrics(config, store, splits, gt)
    model = load_model(config, store, splits, gt)
    ranking = eval_extrinsic(model, splits.extrinsic.train_n, splits.extrinsic.test_n, k=config.k_eval)
    if ranking.excluded:
        logging.warning(f"eval: {ranking.excluded} cold user(s) without held-out items left out")
    rows = [(name, value, np.nan) for name, value in intrinsic.items()]
    rows += [(f"recall@{ranking.k}", ranking.recall, ranking.stderr("recall")),
             (f"ndcg@{ranking.k}", ranking.ndcg, ranking.stderr("ndcg"))]
    metrics = pd.DataFrame(rows, columns=METRIC_COLUMNS)
    for name, value, _ in rows:
        logging.info(f"eval: {name} = {value:.6f}")
    store.write_stage("eval", {
        "metrics.tsv": metrics,
        "per_user.tsv": ranking.per_user,
        "intrinsic_log.tsv": intrinsic_history,
    }, meta={"users": int(len(ranking.per_user)), "excluded": int(ranking.excluded)})
    return EXIT_OK


def cmd_bench(config: ExperimentConfig) -> int:
    store = ArtifactStore(config)
    splits = load_splits(store)
    gt = load_ground_truth(store)
    table = sampling_benchmark(task_context(config, splits, gt), config.bench_strategies, config.bench_epochs)
    store.write_stage("bench", {"bench.tsv": table}, meta={"strategies": list(config.bench_strategies)})
    return EXIT_OK


def cmd_report(config: ExperimentConfig) -> int:
    emit_report(ArtifactStore(config))
    return EXIT_OK


def cmd_run(config: ExperimentConfig) -> int:
    '''
    Every stage in order; a partial pre-training checkpoint stops the run with exit code 3.
    Stages whose artifact already matches the configuration are not recomputed.
    '''
    store = ArtifactStore(config)
    steps = [("ingest", cmd_ingest), ("split", cmd_split), ("groundtruth", cmd_groundtruth)]
    if config.init == "pretrained":
        steps.append(("pretrain", cmd_pretrain))
    steps += [("finetune", cmd_finetune), ("eval", cmd_eval)]
    if config.bench_epochs > 0:
        steps.append(("bench", cmd_bench))
    for stage, command in steps:
        if store.exists(stage):
            logging.info(f"{stage}: up to date, skipped")
            continue
        code = command(config)
        if code != EXIT_OK:
            return code
    return cmd_report(config)


def ablation_variants(config: ExperimentConfig) -> Dict[str, dict]:
    """name -> config overrides: full model, each task alone, each task left out, random init"""
    tasks = list(config.tasks)
    variants = {"full": {"tasks": tasks}}
    for t in tasks:
        variants[f"only_{t}"] = {"tasks": [t]}
    if len(tasks) > 1:
        for t in tasks:
            variants[f"without_{t}"] = {"tasks": [o for o in tasks if o != t]}
    variants["random_init"] = {"tasks": tasks, "init": "random"}
    return variants


def variant_config(config: ExperimentConfig, name: str, overrides: dict) -> ExperimentConfig:
    base = Path(config.out_dir)
    return config.with_overrides(**overrides, out_dir=str(base / "ablation" / name), shared_dir=str(base))


def cmd_ablation(config: ExperimentConfig) -> int:
    '''
    Single-task, leave-one-out, full and random-init variants from one configuration,
    into one metric table ablation.tsv. Pre-training runs once for the full task set;
    every variant takes its tasks from that checkpoint, since tasks train independently.
    '''
    config = config.with_overrides(init="pretrained")
    code = cmd_run(config.with_overrides(bench_epochs=0))
    if code != EXIT_OK:
        return code
    base = ArtifactStore(config)
    full = base.read_checkpoint("pretrain", "checkpoint.ckpt")
    log = base.read_frame("pretrain", "pretrain_log.tsv")
    rows: List[dict] = []
    for name, overrides in ablation_variants(config).items():
        variant = variant_config(config, name, overrides)
        store = ArtifactStore(variant)
        if variant.init == "pretrained" and not store.exists("pretrain"):
            store.write_stage("pretrain", {
                "checkpoint.ckpt": full.subset(variant.tasks, store.fingerprint("pretrain")),
                "pretrain_log.tsv": log[log["task"].isin(variant.tasks)].reset_index(drop=True),
            }, meta={"partial": False, "failed": [], "derived_from": base.fingerprint("pretrain")})
        for stage, command in (("finetune", cmd_finetune), ("eval", cmd_eval)):
            if not store.exists(stage):
                command(variant)
        metrics = store.read_frame("eval", "metrics.tsv")
        row = {"variant": name, "tasks": ",".join(variant.tasks), "init": variant.init}
        row.update(dict(zip(metrics["metric"], metrics["value"])))
        rows.append(row)
        logging.info(f"ablation {name}: " + ", ".join(f"{k}={v:.4f}" for k, v in row.items()
                                                        if isinstance(v, float)))
    table = pd.DataFrame(rows)
    write_artifact(Path(config.out_dir) / "ablation" / "ablation.tsv", table)
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "split": cmd_split,
    "groundtruth": cmd_groundtruth,
    "pretrain": cmd_pretrain,
    "finetune": cmd_finetune,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "report": cmd_report,
    "run": cmd_run,
    "ablation": cmd_ablation,
}


def run_command(name: str, config: ExperimentConfig) -> int:
    if name not in COMMANDS:
        raise ArtifactError(f"unknown command {name!r}")
    return COMMANDS[name](config)
