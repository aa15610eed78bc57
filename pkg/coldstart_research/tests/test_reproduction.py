import numpy as np
import pandas as pd
import pytest

from coldstart_research.config import build_config
from coldstart_research.pipeline import ArtifactStore, ablation_variants, cmd_ablation, cmd_run
from coldstart_research.pipeline.commands import variant_config

from .conftest import tiny

pytestmark = pytest.mark.slow

DESK_SCALE = {
    "dim": 16,
    "n_layers": 2,
    "path_len": 6,
    "meta_epochs": 3,
    "pretrain_epochs": 5,
    "gt_epochs": 30,
    "finetune_epochs": 10,
    "intrinsic_epochs": 10,
    "bench_epochs": 0,
}


def recall_of(config) -> float:
    assert cmd_run(config) == 0
    metrics = ArtifactStore(config).read_frame("eval", "metrics.tsv").set_index("metric")["value"]
    return float(metrics[f"recall@{config.k_eval}"])


def test_pretraining_beats_random_init_and_reconstruction_only(tmp_path):
    scores = {"full": [], "random_init": [], "only_Rg": []}
    for seed in range(3):
        config = build_config(overrides={**DESK_SCALE, "seed": seed, "out_dir": str(tmp_path / f"seed{seed}")})
        variants = ablation_variants(config)
        for name in scores:
            variant = config if name == "full" else variant_config(config, name, variants[name])
            scores[name].append(recall_of(variant))
    full = np.mean(scores["full"])
    assert full > np.mean(scores["random_init"]), scores
    assert full > np.mean(scores["only_Rg"]), scores


def test_ablation_table_covers_every_variant(tmp_path):
    config = tiny(tmp_path / "ablation")
    assert cmd_ablation(config) == 0
    table = pd.read_csv(tmp_path / "ablation" / "ablation" / "ablation.tsv", sep="\t")
    expected = ["full"] + [f"only_{t}" for t in config.tasks] + [f"without_{t}" for t in config.tasks] + \
        ["random_init"]
    assert table["variant"].tolist() == expected
    for column in ("recall@20", "ndcg@20", "intrinsic_cosine"):
        assert table[column].notna().all()
    assert table.loc[table["variant"] == "only_Cg", "tasks"].tolist() == ["Cg"]
