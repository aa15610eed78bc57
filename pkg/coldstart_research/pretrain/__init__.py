from ._task_scheme import PretextTask, TaskContext
from .ground_truth import GroundTruth, train_ground_truth, ground_truth_for, sample_negatives
from .losses import reconstruction_loss, contrastive_loss, loss_contrastive, bpr_loss, interleave
from .losses import loss_Rg, loss_Cg, loss_Rp, loss_Cp
from .tasks import ReconstructGraphTask, ContrastGraphTask, ReconstructPathTask, ContrastPathTask, TASKS, make_task
from .trainer import PretrainResult, pretrain_all, restore_tasks, task_context
