import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import pandas as pd

from .._scheme import ArtifactError, FingerprintMismatchError, MissingArtifactError
from ..autodiff.checkpoint import Checkpoint, atomic_write_bytes, load_checkpoint, save_checkpoint
from ..config import ExperimentConfig, config_fingerprint

STAGES = ("ingest", "split", "groundtruth", "pretrain", "finetune", "eval", "bench", "report")
STAGE_FILE = "stage.json"

# config fields each stage reads; everything else cannot change its output
STAGE_FIELDS: Dict[str, List[str]] = {
    "ingest": ["dataset", "dataset_format", "subsample", "seed"],
    "split": ["n_i", "n_u", "intrinsic_ratio", "c_frac", "k_intrinsic", "seed"],
    "groundtruth": ["dim", "gt_epochs", "gt_lr", "gt_l2", "gt_batch", "neg_per_pos", "seed"],
    "pretrain": ["tasks", "pretrain_sides", "aug", "a", "b", "tau", "lr", "meta_epochs", "pretrain_epochs",
                 "recon_batch", "contrastive_batch", "dim", "n_layers", "path_len", "transformer_blocks",
                 "transformer_heads", "activation", "sampler", "k_intrinsic", "seed"],
    "finetune": ["init", "tasks", "finetune_epochs", "finetune_lr", "finetune_batch", "freeze_encoders",
                 "resample_each_epoch", "k_extrinsic", "k_intrinsic", "dim", "n_layers", "path_len",
                 "transformer_blocks", "transformer_heads", "activation", "sampler", "seed"],
    "eval": ["k_eval", "intrinsic_epochs", "lr", "recon_batch", "seed"],
    "bench": ["bench_epochs", "bench_strategies", "sampler", "dim", "n_layers", "lr", "meta_epochs",
              "recon_batch", "activation", "k_intrinsic", "seed"],
    "report": [],
}


def upstream_stages(config: ExperimentConfig, stage: str) -> List[str]:
    if stage == "ingest":
        return []
    if stage == "finetune":
        return ["pretrain"] if config.init == "pretrained" else ["groundtruth"]
    if stage == "eval":
        return ["finetune", "groundtruth"]
    if stage == "bench":
        return ["groundtruth"]
    if stage == "report":
        return ["eval"]
    return [STAGES[STAGES.index(stage) - 1]]


def stage_fingerprint(config: ExperimentConfig, stage: str) -> str:
    """Chained: a stage's fingerprint covers its own fields and every upstream fingerprint."""
    upstream = [stage_fingerprint(config, s) for s in upstream_stages(config, stage)]
    return config_fingerprint(config, STAGE_FIELDS[stage], upstream)


def ancestry(config: ExperimentConfig, stage: str) -> List[str]:
    """stage and all its ancestors, in pipeline order"""
    seen = {stage}
    todo = [stage]
    while todo:
        for s in upstream_stages(config, todo.pop()):
            if s not in seen:
                seen.add(s)
                todo.append(s)
    return [s for s in STAGES if s in seen]


class ArtifactStore:
    '''
    Stage folders under out_dir, each closed by a stage.json carrying the producing
    fingerprint. Reads fall back to shared_dir, so ablation variants reuse upstream stages.
    Every file is written to a temp name and renamed; stage.json goes last.

    usage:
    - store = ArtifactStore(config)
    - folder, meta = store.require("split")
    '''

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.out_dir = Path(config.out_dir)
        self.shared_dir = Path(config.shared_dir) if config.shared_dir else None

    def folder(self, stage: str) -> Path:
        return self.out_dir / stage

    def fingerprint(self, stage: str) -> str:
        return stage_fingerprint(self.config, stage)

    def _candidates(self, stage: str) -> List[Path]:
        folders = [self.folder(stage)]
        if self.shared_dir is not None and stage != "report":
            folders.append(self.shared_dir / stage)
        return folders

    def _read_meta(self, folder: Path) -> Optional[dict]:
        path = folder / STAGE_FILE
        if not path.exists():
            return None
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ArtifactError(f"unreadable {path}: {e}") from e

    def locate(self, stage: str) -> Optional[Tuple[Path, dict]]:
        """First folder holding a stage.json for `stage`; one matching the fingerprint wins."""
        found = []
        for folder in self._candidates(stage):
            meta = self._read_meta(folder)
            if meta is not None:
                found.append((folder, meta))
        for folder, meta in found:
            if meta.get("fingerprint") == self.fingerprint(stage):
                return folder, meta
        return found[0] if found else None

    def exists(self, stage: str) -> bool:
        located = self.locate(stage)
        return located is not None and located[1].get("fingerprint") == self.fingerprint(stage)

    def require(self, stage: str) -> Tuple[Path, dict]:
        located = self.locate(stage)
        if located is None:
            missing = [s for s in ancestry(self.config, stage) if self.locate(s) is None]
            raise MissingArtifactError(stage, [f"cmd_{s}" for s in missing])
        folder, meta = located
        expected = self.fingerprint(stage)
        if meta.get("fingerprint") != expected:
            raise FingerprintMismatchError(stage, expected, str(meta.get("fingerprint")))
        return folder, meta

    def write_stage(self, stage: str, files: Dict[str, Union[bytes, str, pd.DataFrame, Checkpoint]],
                    meta: Optional[dict] = None) -> Path:
        folder = self.folder(stage)
        folder.mkdir(parents=True, exist_ok=True)
        stale = folder / STAGE_FILE
        if stale.exists():
            stale.unlink()
        for name, content in files.items():
            write_artifact(folder / name, content)
        record = {"stage": stage, "fingerprint": self.fingerprint(stage), "files": sorted(files), **(meta or {})}
        body = json.dumps(record, indent=2, sort_keys=True, default=_plain)
        atomic_write_bytes(folder / STAGE_FILE, body.encode("utf-8"))
        logging.info(f"{stage}: wrote {len(files)} artifact(s) to {folder}")
        return folder

    def read_frame(self, stage: str, name: str) -> pd.DataFrame:
        folder, _ = self.require(stage)
        return read_frame(folder / name)

    def read_checkpoint(self, stage: str, name: str) -> Checkpoint:
        folder, _ = self.require(stage)
        ckpt = load_checkpoint(folder / name)
        expected = self.fingerprint(stage)
        if ckpt.fingerprint != expected:
            raise FingerprintMismatchError(stage, expected, ckpt.fingerprint)
        return ckpt


def _plain(value):
    # numpy scalars in stage metadata
    if hasattr(value, "item"):
        return value.item()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def write_artifact(path: Path, content) -> Path:
    if isinstance(content, Checkpoint):
        return save_checkpoint(path, content)
    if isinstance(content, pd.DataFrame):
        sep = "," if path.suffix == ".csv" else "\t"
        content = content.to_csv(sep=sep, index=False, lineterminator="\n")
    if isinstance(content, str):
        content = content.encode("utf-8")
    return atomic_write_bytes(path, content)


def read_frame(path: Path) -> pd.DataFrame:
    if not path.exists():
        raise ArtifactError(f"missing artifact file {path}")
    return pd.read_csv(path, sep="," if path.suffix == ".csv" else "\t")
