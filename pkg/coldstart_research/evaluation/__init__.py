from .metrics import RankingResult, ranking_metrics, rank_candidates, recall_at_k, ndcg_at_k
from .metrics import eval_intrinsic, mean_cosine, items_by_user
from .fusion import FusedRecommender, infer_fused, relevance, finetune, fit_intrinsic_fusion, intrinsic_report
from .fusion import eval_extrinsic, attach_meta_embeddings
from .benchmark import sampling_benchmark, BENCH_COLUMNS
from .loss_visualizer import LossVisualizer
