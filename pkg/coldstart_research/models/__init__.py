from .meta_aggregator import MetaAggregator, meta_aggregate, meta_batch, compute_meta_embeddings, first_order_sets
from .gnn import GnnEncoder, SubgraphBatch, gnn_forward
from .transformer import PathTransformer, transformer_forward
from .projection import ProjectionHead, project
