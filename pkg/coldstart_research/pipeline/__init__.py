from .artifacts import ArtifactStore, STAGES, stage_fingerprint
from .commands import cmd_ingest, cmd_split, cmd_groundtruth, cmd_pretrain, cmd_finetune, cmd_eval, cmd_bench
from .commands import cmd_report, cmd_run, cmd_ablation, ablation_variants, run_command
from .report import emit_report
from .cli import main
