import hashlib
import json
from pathlib import Path
from typing import Iterable, List, Literal, Optional, Sequence

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from ._scheme import ConfigError

TASK_IDS = ("Rg", "Cg", "Rp", "Cp")
TOY_DATASET = Path(__file__).parent / "data" / "dataset" / "toy_blocks.tsv"
# packaged datasets by name; the name, not the install path, enters the fingerprints
BUNDLED_DATASETS = {"toy": TOY_DATASET}

# fields that never change what a stage computes
COSMETIC_FIELDS = ("out_dir", "shared_dir", "verbose", "workers")


class ExperimentConfig(BaseModel):
    """
    Every knob of one experiment. Defaults follow the published setting:
    d=32, lr=0.003, L=4, T=6, K=3 (intrinsic) / 8 (extrinsic), a=b=tau=0.2,
    n_i=25, n_u=15, c=20%, Recall/NDCG@20, 7:3 intrinsic split.
    """
    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    # data
    dataset: str = "toy"
    dataset_format: Literal["ml1m", "tsv"] = "tsv"
    subsample: float = 1.0

    # splits
    n_i: int = 25
    n_u: int = 15
    intrinsic_ratio: float = 0.7
    c_frac: float = 0.2
    k_intrinsic: int = 3
    k_extrinsic: int = 8

    # model
    dim: int = 32
    n_layers: int = 4
    path_len: int = 6
    transformer_blocks: int = 2
    transformer_heads: int = 2
    activation: Literal["tanh", "sigmoid"] = "tanh"
    sampler: Literal["random", "importance", "dynamic"] = "dynamic"

    # pre-training
    tasks: List[str] = list(TASK_IDS)
    pretrain_sides: Literal["user", "item", "both"] = "both"
    aug: Literal["delete", "substitute", "both"] = "delete"
    a: float = 0.2
    b: float = 0.2
    tau: float = 0.2
    lr: float = 0.003
    meta_epochs: int = 5
    pretrain_epochs: int = 10
    recon_batch: int = 128
    contrastive_batch: int = 64

    # ground truth
    gt_epochs: int = 30
    gt_lr: float = 0.01
    gt_l2: float = 0.0
    gt_batch: int = 1024
    neg_per_pos: int = 1

    # fine-tuning and evaluation
    init: Literal["pretrained", "random"] = "pretrained"
    finetune_epochs: int = 10
    finetune_lr: float = 0.003
    finetune_batch: int = 256
    freeze_encoders: bool = False
    resample_each_epoch: bool = False
    intrinsic_epochs: int = 20
    k_eval: int = 20

    # sampling benchmark
    bench_epochs: int = 10
    bench_strategies: List[str] = ["random", "importance", "dynamic"]

    seed: int = 0
    workers: int = 1
    out_dir: str = "results"
    shared_dir: Optional[str] = None
    verbose: bool = False

    @field_validator("tasks", "bench_strategies", mode="before")
    @classmethod
    def _split_list(cls, value):
        if isinstance(value, str):
            return [v.strip() for v in value.split(",") if v.strip()]
        return value

    @field_validator("tasks")
    @classmethod
    def _known_tasks(cls, value):
        unknown = [t for t in value if t not in TASK_IDS]
        if unknown or not value:
            raise ValueError(f"tasks must be a non-empty subset of {','.join(TASK_IDS)}, got {value}")
        # canonical order, so "Cp,Rg" and "Rg,Cp" are the same experiment
        return [t for t in TASK_IDS if t in value]

    @field_validator("bench_strategies")
    @classmethod
    def _known_strategies(cls, value):
        for v in value:
            if v not in ("random", "importance", "dynamic"):
                raise ValueError(f"unknown sampling strategy {v}")
        return value

    @field_validator("intrinsic_ratio", "c_frac")
    @classmethod
    def _open_unit(cls, value):
        if not 0.0 < value < 1.0:
            raise ValueError("must lie in (0, 1)")
        return value

    @field_validator("a", "b")
    @classmethod
    def _closed_unit(cls, value):
        if not 0.0 <= value <= 1.0:
            raise ValueError("must lie in [0, 1]")
        return value

    @field_validator("subsample")
    @classmethod
    def _fraction(cls, value):
        if not 0.0 < value <= 1.0:
            raise ValueError("must lie in (0, 1]")
        return value

    @field_validator("tau", "lr", "gt_lr", "finetune_lr")
    @classmethod
    def _positive_float(cls, value):
        if value <= 0:
            raise ValueError("must be positive")
        return value

    @field_validator("dim", "n_layers", "k_intrinsic", "k_extrinsic", "k_eval", "recon_batch",
                     "contrastive_batch", "gt_batch", "finetune_batch", "transformer_blocks",
                     "transformer_heads", "neg_per_pos", "workers")
    @classmethod
    def _positive_int(cls, value):
        if value < 1:
            raise ValueError("must be >= 1")
        return value

    @field_validator("path_len")
    @classmethod
    def _path_len(cls, value):
        if value < 2:
            raise ValueError("paths need at least 2 nodes")
        return value

    @field_validator("n_i", "n_u", "meta_epochs", "pretrain_epochs", "gt_epochs", "finetune_epochs",
                     "intrinsic_epochs", "bench_epochs")
    @classmethod
    def _non_negative(cls, value):
        if value < 0:
            raise ValueError("must be >= 0")
        return value

    @model_validator(mode="after")
    def _heads_divide_dim(self):
        if self.dim % self.transformer_heads:
            raise ValueError(f"dim {self.dim} is not divisible by {self.transformer_heads} heads")
        return self

    @property
    def dataset_path(self) -> Path:
        return BUNDLED_DATASETS.get(self.dataset, Path(self.dataset))

    @property
    def fanout_intrinsic(self) -> tuple:
        return (self.k_intrinsic,) * self.n_layers

    @property
    def fanout_extrinsic(self) -> tuple:
        # cold nodes keep K_ext first-order neighbors, deeper layers the intrinsic budget
        return (self.k_extrinsic,) + (self.k_intrinsic,) * (self.n_layers - 1)

    def semantic_dict(self) -> dict:
        return {k: v for k, v in self.model_dump().items() if k not in COSMETIC_FIELDS}

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        return build_config(self.model_dump(), overrides)


def read_config_file(path) -> dict:
    """Flat `key = value` file, `#` starts a comment."""
    values = {}
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def build_config(base: Optional[dict] = None, overrides: Optional[dict] = None) -> ExperimentConfig:
    merged = dict(base or {})
    merged.update({k.replace("-", "_"): v for k, v in (overrides or {}).items() if v is not None})
    try:
        return ExperimentConfig(**merged)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def load_config(path=None, overrides: Optional[dict] = None) -> ExperimentConfig:
    base = read_config_file(path) if path is not None else {}
    return build_config(base, overrides)


def fingerprint(payload: dict, upstream: Iterable[str] = ()) -> str:
    """sha256 hex over canonical JSON of `payload`, chained through upstream fingerprints."""
    body = json.dumps({"fields": payload, "upstream": list(upstream)}, sort_keys=True, separators=(",", ":"),
                      default=str)
    return hashlib.sha256(body.encode("utf-8")).hexdigest()


def config_fingerprint(config: ExperimentConfig, fields: Optional[Sequence[str]] = None,
                       upstream: Iterable[str] = ()) -> str:
    semantic = config.semantic_dict()
    if fields is not None:
        semantic = {k: semantic[k] for k in fields}
    return fingerprint(semantic, upstream)
